#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "corticarve/volume.hpp"

namespace corticarve {

/// Closed sampling interval [lo, hi].
struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v, double tol = 1e-12) const { return v >= lo - tol && v <= hi + tol; }
  bool operator==(const Range&) const = default;
};

/// Sampling ranges for the generative model. Defaults reproduce the published
/// uniform hyperparameter ranges; the remaining fields pin choices the method
/// leaves open (downsampling factors, gamma form, banding).
struct SynthesisConfig {
  Range affine_translation_mm{0.0, 50.0};
  Range affine_rotation_deg{0.0, 45.0};
  Range affine_scaling_pct{80.0, 120.0};
  Range deformation_voxel_length_mm{8.0, 16.0};
  Range deformation_sd_mm{0.0, 3.0};
  Range label_intensity_mean{0.0, 1.0};
  Range label_intensity_sd{0.0, 0.1};
  Range bias_field_voxel_length_mm{4.0, 64.0};
  Range bias_field_sd{0.0, 0.5};
  Range fov_cropping_mm{0.0, 50.0};
  Range gamma_exponent{-0.25, 0.25};
  std::vector<int> downsample_factors{1, 2, 3, 4, 5, 6};
  double downsample_probability = 0.5;
  int svf_steps = 5;
  std::vector<std::uint32_t> brain_labels{1};
  double sdt_band_mm = 5.0;
  double sdt_background_weight = 0.1;

  /// Throws Errc::config_inverted_range / Errc::invalid_argument.
  void validate() const;
  bool operator==(const SynthesisConfig&) const = default;
};

/// Every random hyperparameter drawn while synthesizing one sample.
struct SynthesisDraws {
  Vec3 translation_mm = Vec3::Zero();
  Vec3 rotation_deg = Vec3::Zero();
  Vec3 scale = Vec3::Ones();
  double deformation_voxel_length_mm = 0.0;
  double deformation_sd_mm = 0.0;
  std::map<std::uint32_t, double> label_mean;
  std::map<std::uint32_t, double> label_sd;
  double bias_voxel_length_mm = 0.0;
  double bias_sd = 0.0;
  double gamma = 0.0;
  std::array<int, 3> downsample_factor{1, 1, 1};
  std::array<double, 3> crop_mm{0.0, 0.0, 0.0};

  /// True when every drawn value lies inside its configured range.
  bool within(const SynthesisConfig& cfg) const;
};

}  // namespace corticarve
