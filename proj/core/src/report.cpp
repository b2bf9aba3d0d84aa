#include "corticarve/report.hpp"

#include <fmt/format.h>

namespace corticarve {

std::string case_csv(const std::vector<CaseRow>& rows) {
  std::string out = "case,method";
  for (const auto& name : metric_names()) out += "," + name;
  out += "\n";
  for (const auto& row : rows) {
    out += row.case_id + "," + row.method;
    for (const auto& name : metric_names()) out += fmt::format(",{:.6f}", metric_value(row.report, name));
    out += "\n";
  }
  return out;
}

std::string summary_text(const CohortSummary& summary) {
  std::string out = fmt::format("cases: {}  reference: {}\n", summary.cases, summary.reference);
  std::size_t width = 6;
  for (const auto& m : summary.methods) width = std::max(width, m.method.size());

  out += fmt::format("{:<{}}", "method", width);
  for (const auto& name : metric_names()) out += fmt::format("  {:>18}", name);
  out += "\n";
  for (const auto& m : summary.methods) {
    out += fmt::format("{:<{}}", m.method, width);
    for (const auto& s : m.metrics) out += fmt::format("  {:>18}", fmt::format("{:.2f} ± {:.2f}", s.mean, s.sd));
    out += "\n";
    out += fmt::format("{:<{}}", "", width);
    for (const auto& s : m.metrics) {
      std::string p = "-";
      if (s.versus_reference) {
        p = s.versus_reference->degenerate ? "p = 1 (n/a)" : fmt::format("p = {:.2g}", s.versus_reference->p_value);
      }
      out += fmt::format("  {:>18}", p);
    }
    out += "\n";
  }
  return out;
}

}  // namespace corticarve
