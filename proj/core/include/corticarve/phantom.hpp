#pragma once

#include <cstdint>

#include "corticarve/volume.hpp"

namespace corticarve {

/// Procedural "head" label maps for desk-scale experiments: a lumpy ellipsoid
/// brain (label 1), a surrounding skull shell (label 2) separated by a thin
/// gap, and distractor blobs (labels 3, 4, ...) outside the brain.
struct PhantomConfig {
  Dims dims{32, 32, 32};
  // 32 x 8 mm spans 256 mm, the field of view of 1 mm training maps, so the
  // mm-valued synthesis ranges keep their proportion to the head.
  double spacing_mm = 8.0;
  double brain_radius_min_mm = 60.0;
  double brain_radius_max_mm = 72.0;
  double gap_min_mm = 6.0;
  double gap_max_mm = 12.0;
  double skull_min_mm = 8.0;
  double skull_max_mm = 16.0;
  int blob_count = 3;
  double blob_radius_min_mm = 12.0;
  double blob_radius_max_mm = 24.0;
};

LabelVolume make_phantom(const PhantomConfig& cfg, std::uint64_t seed);

}  // namespace corticarve
