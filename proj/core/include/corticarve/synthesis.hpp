#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <vector>

#include "corticarve/distance.hpp"
#include "corticarve/geometry.hpp"
#include "corticarve/rng.hpp"
#include "corticarve/synthesis_config.hpp"
#include "corticarve/volume.hpp"

namespace corticarve {

/// One randomized training pair. Image, mask, banded SDT and weights share a
/// grid; `draws` records every sampled hyperparameter.
struct SynthSample {
  ScalarVolume image;
  BinaryMask mask;
  SdtVolume sdt;
  ScalarVolume weights;
  std::uint64_t seed = 0;
  SynthesisDraws draws;
};

struct ExtracerebralLabeling {
  LabelVolume labels;
  /// Voxel count of each new extra-cerebral label, in ascending intensity order.
  std::vector<std::size_t> bin_counts;
  std::vector<std::uint32_t> new_label_ids;
  /// Set when tied intensities leave one or more bins empty.
  bool degenerate = false;
};

/// Splits non-zero head voxels that carry no brain label into `k` intensity
/// bins with equal voxel counts (quantile thresholds) and merges them into the
/// label map under fresh ids.
ExtracerebralLabeling fit_extracerebral_labels(const ScalarVolume& head, const LabelVolume& brain_labels, int k = 6);

BinaryMask merge_brain_labels(const LabelVolume& labels, const std::set<std::uint32_t>& brain_labels);

/// Sorted unique label ids present in the volume.
std::vector<std::uint32_t> unique_labels(const LabelVolume& labels);

/// Paints every voxel with a draw from its label's Gaussian; each label
/// (including 0) gets mean ~ U(label_intensity_mean) and SD ~ U(label_intensity_sd).
ScalarVolume render_gmm_image(const LabelVolume& labels, const SynthesisConfig& cfg, Rng& rng,
                              SynthesisDraws* draws = nullptr);

/// img * exp(field), where the field is trilinearly upsampled from `coarse`.
ScalarVolume apply_bias_field(const ScalarVolume& img, const ScalarVolume& coarse);
ScalarVolume apply_bias_field(const ScalarVolume& img, const SynthesisConfig& cfg, Rng& rng,
                              SynthesisDraws* draws = nullptr);

/// Min-max normalizes to [0, 1] then raises every voxel to exp(g). A constant
/// image normalizes to zeros.
ScalarVolume apply_gamma(const ScalarVolume& img, double g);

/// Slabs zeroed at the low and high end of each axis, in voxels.
struct CropSpec {
  std::array<int, 3> low{0, 0, 0};
  std::array<int, 3> high{0, 0, 0};
};

ScalarVolume crop_fov(const ScalarVolume& img, const CropSpec& crop);
/// Draws a crop per axis and zeroes image content; the targets are never cropped.
ScalarVolume crop_fov(const ScalarVolume& img, const SynthesisConfig& cfg, Rng& rng, SynthesisDraws* draws = nullptr);

/// Box-average downsampling by an integer factor per axis followed by linear
/// upsampling back onto the original lattice. A factor of 1 leaves an axis alone.
ScalarVolume degrade_resolution(const ScalarVolume& img, const std::array<int, 3>& factors);
ScalarVolume degrade_resolution(const ScalarVolume& img, const SynthesisConfig& cfg, Rng& rng,
                                SynthesisDraws* draws = nullptr);

/// Full generative pipeline: warp -> merge mask -> banded SDT -> GMM -> bias ->
/// gamma -> resolution degradation -> crop -> [0, 1] rescale. Pure in (labels, cfg, seed).
SynthSample synthesize_sample(const LabelVolume& labels, const SynthesisConfig& cfg, std::uint64_t seed);

}  // namespace corticarve
