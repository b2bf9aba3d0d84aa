#include "corticarve/metrics.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "corticarve/distance.hpp"

namespace corticarve {

DiceResult dice_overlap(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a.grid, b.grid, "dice_overlap");
  std::size_t na = 0, nb = 0, both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    na += x;
    nb += y;
    both += x && y;
  }
  if (na + nb == 0) return {100.0, true};
  return {100.0 * 2.0 * static_cast<double>(both) / static_cast<double>(na + nb), false};
}

namespace {

BinaryMask boundary_mask(const BinaryMask& m, const std::vector<std::size_t>& surface) {
  BinaryMask out(m.grid);
  for (std::size_t i : surface) out[i] = 1;
  return out;
}

std::vector<std::size_t> surface_or_throw(const BinaryMask& m) {
  if (count_true(m) == 0) throw Error(Errc::no_boundary, "surface distances need non-empty masks");
  return surface_voxels(m);
}

}  // namespace

SurfaceDistances surface_distances(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a.grid, b.grid, "surface_distances");
  const auto sa = surface_or_throw(a);
  const auto sb = surface_or_throw(b);
  const ScalarVolume to_b = squared_edt(boundary_mask(b, sb));
  const ScalarVolume to_a = squared_edt(boundary_mask(a, sa));
  double sum_ab = 0.0, sum_ba = 0.0;
  double max_sq = 0.0;
  for (std::size_t i : sa) {
    sum_ab += std::sqrt(to_b[i]);
    max_sq = std::max(max_sq, to_b[i]);
  }
  for (std::size_t i : sb) {
    sum_ba += std::sqrt(to_a[i]);
    max_sq = std::max(max_sq, to_a[i]);
  }
  // Two directional sums added once keep the result symmetric to the last bit.
  return {(sum_ab + sum_ba) / static_cast<double>(sa.size() + sb.size()), std::sqrt(max_sq)};
}

double volume_difference(const BinaryMask& a, const BinaryMask& reference) {
  require_same_grid(a.grid, reference.grid, "volume_difference");
  const auto nr = static_cast<double>(count_true(reference));
  if (nr == 0.0) throw Error(Errc::degenerate_input, "volume difference needs a non-empty reference");
  return 100.0 * std::abs(static_cast<double>(count_true(a)) - nr) / nr;
}

SensitivitySpecificity sensitivity_specificity(const BinaryMask& prediction, const BinaryMask& truth) {
  require_same_grid(prediction.grid, truth.grid, "sensitivity_specificity");
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = prediction[i] != 0;
    if (truth[i] != 0) {
      p ? ++tp : ++fn;
    } else {
      p ? ++fp : ++tn;
    }
  }
  if (tp + fn == 0 || tn + fp == 0) {
    throw Error(Errc::degenerate_input, "truth mask must contain both brain and non-brain voxels");
  }
  return {100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn),
          100.0 * static_cast<double>(tn) / static_cast<double>(tn + fp)};
}

MaskReport evaluate_masks(const BinaryMask& prediction, const BinaryMask& truth) {
  MaskReport r;
  r.dice = dice_overlap(prediction, truth).percent;
  if (count_true(prediction) == 0) {
    r.mean_surface_mm = r.max_surface_mm = std::numeric_limits<double>::infinity();
  } else {
    const SurfaceDistances sd = surface_distances(prediction, truth);
    r.mean_surface_mm = sd.mean_mm;
    r.max_surface_mm = sd.max_mm;
  }
  r.volume_difference = volume_difference(prediction, truth);
  const SensitivitySpecificity ss = sensitivity_specificity(prediction, truth);
  r.sensitivity = ss.sensitivity;
  r.specificity = ss.specificity;
  return r;
}

double discordant_voxel_pct(std::span<const BinaryMask> frames) {
  if (frames.size() < 2) throw Error(Errc::invalid_argument, "%DV needs at least two frames");
  for (const auto& f : frames) require_same_grid(frames[0].grid, f.grid, "discordant_voxel_pct");
  std::size_t uni = 0, discordant = 0;
  for (std::size_t i = 0; i < frames[0].size(); ++i) {
    std::size_t on = 0;
    for (const auto& f : frames) on += f[i] != 0;
    uni += on > 0;
    discordant += on > 0 && on < frames.size();
  }
  if (uni == 0) throw Error(Errc::degenerate_input, "%DV needs a non-empty union of masks");
  return 100.0 * static_cast<double>(discordant) / static_cast<double>(uni);
}

double exposed_boundary_pct(const BinaryMask& mask) {
  if (count_true(mask) == 0) throw Error(Errc::no_boundary, "EBV needs a non-empty mask");
  const auto surface = surface_voxels(mask);
  const auto& g = mask.grid;
  std::size_t exposed = 0;
  for (std::size_t i : surface) {
    const auto [x, y, z] = g.coords(i);
    int brain = 0;
    for (int dz = -1; dz <= 1; ++dz) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0 && dz == 0) continue;
          const int nx = x + dx, ny = y + dy, nz = z + dz;
          if (g.contains(nx, ny, nz) && mask.at(nx, ny, nz) != 0) ++brain;
        }
      }
    }
    if (26 - brain > brain) ++exposed;
  }
  return 100.0 * static_cast<double>(exposed) / static_cast<double>(surface.size());
}

double student_t_two_sided_p(double t, double df) {
  if (!(df > 0.0)) throw Error(Errc::invalid_argument, "degrees of freedom must be positive");
  if (std::isnan(t)) throw Error(Errc::non_finite, "t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  // P(|T| >= |t|) = I_{df / (df + t^2)}(df / 2, 1 / 2).
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

TTestResult paired_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::invalid_argument, "paired t-test needs equal-length samples");
  if (x.size() < 2) throw Error(Errc::invalid_argument, "paired t-test needs at least two pairs");
  const std::size_t n = x.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = x[i] - y[i];
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));

  TTestResult r;
  r.degrees_of_freedom = static_cast<int>(n - 1);
  if (!(sd > 0.0)) {
    r.degenerate = true;
    r.p_value = 1.0;
    return r;
  }
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  r.p_value = student_t_two_sided_p(r.t, r.degrees_of_freedom);
  return r;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"dice", "msd_mm", "hd_mm", "volume_diff", "sensitivity", "specificity"};
  return names;
}

double metric_value(const MaskReport& r, const std::string& metric) {
  if (metric == "dice") return r.dice;
  if (metric == "msd_mm") return r.mean_surface_mm;
  if (metric == "hd_mm") return r.max_surface_mm;
  if (metric == "volume_diff") return r.volume_difference;
  if (metric == "sensitivity") return r.sensitivity;
  if (metric == "specificity") return r.specificity;
  throw Error(Errc::invalid_argument, "unknown metric '" + metric + "'");
}

CohortSummary summarize_cohort(const std::vector<MethodReports>& methods, const std::string& reference) {
  const auto ref = std::find_if(methods.begin(), methods.end(), [&](const auto& m) { return m.method == reference; });
  if (ref == methods.end()) throw Error(Errc::invalid_argument, "reference method '" + reference + "' not found");
  CohortSummary out;
  out.reference = reference;
  out.cases = ref->reports.size();
  for (const auto& m : methods) {
    if (m.reports.size() != out.cases) {
      throw Error(Errc::invalid_argument, "method '" + m.method + "' does not cover the same cases");
    }
  }
  if (out.cases == 0) throw Error(Errc::invalid_argument, "cohort summary needs at least one case");

  for (const auto& m : methods) {
    MethodSummary ms;
    ms.method = m.method;
    for (const auto& name : metric_names()) {
      std::vector<double> v, r;
      for (std::size_t i = 0; i < out.cases; ++i) {
        v.push_back(metric_value(m.reports[i], name));
        r.push_back(metric_value(ref->reports[i], name));
      }
      MetricSummary s;
      s.metric = name;
      s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - s.mean) * (x - s.mean);
      s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
      if (m.method != reference && out.cases >= 2) s.versus_reference = paired_t_test(v, r);
      ms.metrics.push_back(std::move(s));
    }
    out.methods.push_back(std::move(ms));
  }
  return out;
}

}  // namespace corticarve
