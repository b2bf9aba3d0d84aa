#pragma once

#include <string>
#include <vector>

#include "corticarve/metrics.hpp"

namespace corticarve {

struct CaseRow {
  std::string case_id;
  std::string method;
  MaskReport report;
};

/// One row per case and method: case,method,dice,msd_mm,hd_mm,volume_diff,sensitivity,specificity.
std::string case_csv(const std::vector<CaseRow>& rows);

/// Plain-text table: a "mean ± SD" line per method and metric with the paired
/// p-value against the reference underneath.
std::string summary_text(const CohortSummary& summary);

}  // namespace corticarve
