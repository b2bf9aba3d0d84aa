#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corticarve/volume.hpp"

namespace corticarve {

/// Agreement of a predicted mask with a reference. Percentages in [0, 100]
/// except volume_difference, which is unbounded above.
struct MaskReport {
  double dice = 0.0;
  double mean_surface_mm = 0.0;
  double max_surface_mm = 0.0;
  double volume_difference = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
};

struct DiceResult {
  double percent = 0.0;
  /// Both masks empty; reported as 100.
  bool degenerate = false;
};

DiceResult dice_overlap(const BinaryMask& a, const BinaryMask& b);

struct SurfaceDistances {
  /// Mean over the distances of every boundary voxel of both masks to the
  /// other mask's boundary (both directions pooled).
  double mean_mm = 0.0;
  /// Symmetric Hausdorff distance between the boundary sets.
  double max_mm = 0.0;
};

/// Exact voxel-center distances between 6-connected boundary sets. Throws
/// Errc::no_boundary if either mask is empty.
SurfaceDistances surface_distances(const BinaryMask& a, const BinaryMask& b);

/// 100 * | |a| - |ref| | / |ref|. Throws Errc::degenerate_input for an empty reference.
double volume_difference(const BinaryMask& a, const BinaryMask& reference);

struct SensitivitySpecificity {
  double sensitivity = 0.0;
  double specificity = 0.0;
};

/// Throws Errc::degenerate_input unless the truth contains both classes.
SensitivitySpecificity sensitivity_specificity(const BinaryMask& prediction, const BinaryMask& truth);

/// Full battery. An empty prediction gets infinite surface distances rather
/// than an error.
MaskReport evaluate_masks(const BinaryMask& prediction, const BinaryMask& truth);

/// Percentage of voxels where the frames disagree, relative to the union of
/// all frames. Needs at least two frames on one grid and a non-empty union.
double discordant_voxel_pct(std::span<const BinaryMask> frames);

/// Percentage of boundary voxels whose 26-neighbourhood holds strictly more
/// non-brain than brain voxels (out-of-grid neighbours count as non-brain).
double exposed_boundary_pct(const BinaryMask& mask);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  int degrees_of_freedom = 0;
  /// Zero-variance differences; p is reported as 1.
  bool degenerate = false;
};

/// Two-sided paired Student t-test on x - y.
TTestResult paired_t_test(std::span<const double> x, std::span<const double> y);

/// Two-sided tail probability P(|T| >= |t|) for Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

struct MetricSummary {
  std::string metric;
  double mean = 0.0;
  double sd = 0.0;
  /// Paired test against the reference method; absent for the reference itself.
  std::optional<TTestResult> versus_reference;
};

struct MethodSummary {
  std::string method;
  std::vector<MetricSummary> metrics;
};

struct CohortSummary {
  std::string reference;
  std::size_t cases = 0;
  std::vector<MethodSummary> methods;
};

struct MethodReports {
  std::string method;
  std::vector<MaskReport> reports;
};

/// Names of the MaskReport fields in report order.
const std::vector<std::string>& metric_names();
double metric_value(const MaskReport& r, const std::string& metric);

/// Mean ± SD (sample SD) per metric and method, plus paired t-tests of every
/// method against `reference`. All methods must cover the same cases.
CohortSummary summarize_cohort(const std::vector<MethodReports>& methods, const std::string& reference);

}  // namespace corticarve
