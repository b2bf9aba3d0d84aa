#include "corticarve/synthesis_config.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace corticarve {

namespace {

void check_range(const Range& r, const char* name) {
  if (r.lo > r.hi) {
    throw Error(Errc::config_inverted_range, std::string("inverted range for ") + name);
  }
}

bool within_signed(const Range& r, double v) { return r.contains(std::abs(v)); }

}  // namespace

void SynthesisConfig::validate() const {
  check_range(affine_translation_mm, "affine_translation_mm");
  check_range(affine_rotation_deg, "affine_rotation_deg");
  check_range(affine_scaling_pct, "affine_scaling_pct");
  check_range(deformation_voxel_length_mm, "deformation_voxel_length_mm");
  check_range(deformation_sd_mm, "deformation_sd_mm");
  check_range(label_intensity_mean, "label_intensity_mean");
  check_range(label_intensity_sd, "label_intensity_sd");
  check_range(bias_field_voxel_length_mm, "bias_field_voxel_length_mm");
  check_range(bias_field_sd, "bias_field_sd");
  check_range(fov_cropping_mm, "fov_cropping_mm");
  check_range(gamma_exponent, "gamma_exponent");
  if (affine_scaling_pct.lo <= 0.0 || affine_scaling_pct.hi >= 200.0) {
    throw Error(Errc::invalid_argument, "affine_scaling_pct must lie in (0, 200)");
  }
  if (deformation_voxel_length_mm.lo <= 0.0 || bias_field_voxel_length_mm.lo <= 0.0) {
    throw Error(Errc::invalid_argument, "field voxel lengths must be positive");
  }
  if (deformation_sd_mm.lo < 0.0 || label_intensity_sd.lo < 0.0 || bias_field_sd.lo < 0.0 ||
      fov_cropping_mm.lo < 0.0 || affine_translation_mm.lo < 0.0 || affine_rotation_deg.lo < 0.0) {
    throw Error(Errc::invalid_argument, "magnitudes and standard deviations must be non-negative");
  }
  for (int f : downsample_factors) {
    if (f < 1) throw Error(Errc::invalid_argument, "downsample factors must be >= 1");
  }
  if (downsample_probability < 0.0 || downsample_probability > 1.0) {
    throw Error(Errc::invalid_argument, "downsample_probability must lie in [0, 1]");
  }
  if (svf_steps < 1) throw Error(Errc::invalid_argument, "svf_steps must be >= 1");
  if (brain_labels.empty()) throw Error(Errc::invalid_argument, "brain label set must not be empty");
  if (!(sdt_band_mm > 0.0)) throw Error(Errc::invalid_argument, "sdt_band_mm must be positive");
  if (!(sdt_background_weight > 0.0)) throw Error(Errc::invalid_argument, "sdt_background_weight must be positive");
}

bool SynthesisDraws::within(const SynthesisConfig& cfg) const {
  for (int a = 0; a < 3; ++a) {
    if (!within_signed(cfg.affine_translation_mm, translation_mm[a])) return false;
    if (!within_signed(cfg.affine_rotation_deg, rotation_deg[a])) return false;
    if (!cfg.affine_scaling_pct.contains(scale[a] * 100.0, 1e-9)) return false;
    if (!cfg.fov_cropping_mm.contains(crop_mm[a])) return false;
    const int f = downsample_factor[a];
    if (f != 1 && std::find(cfg.downsample_factors.begin(), cfg.downsample_factors.end(), f) ==
                      cfg.downsample_factors.end()) {
      return false;
    }
  }
  if (!cfg.deformation_voxel_length_mm.contains(deformation_voxel_length_mm)) return false;
  if (!cfg.deformation_sd_mm.contains(deformation_sd_mm)) return false;
  for (const auto& [id, m] : label_mean) {
    if (!cfg.label_intensity_mean.contains(m)) return false;
  }
  for (const auto& [id, sd] : label_sd) {
    if (!cfg.label_intensity_sd.contains(sd)) return false;
  }
  if (!cfg.bias_field_voxel_length_mm.contains(bias_voxel_length_mm)) return false;
  if (!cfg.bias_field_sd.contains(bias_sd)) return false;
  return cfg.gamma_exponent.contains(gamma);
}

}  // namespace corticarve
