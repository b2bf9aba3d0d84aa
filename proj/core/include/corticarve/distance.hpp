#pragma once

#include <cstddef>
#include <vector>

#include "corticarve/volume.hpp"

namespace corticarve {

/// Exact Euclidean distance (mm) from every voxel to the nearest true voxel,
/// honoring anisotropic spacing. Separable lower-envelope-of-parabolas passes
/// along x, y, z. Throws Errc::no_boundary for all-true or all-false masks.
ScalarVolume exact_edt(const BinaryMask& mask);

/// Same as exact_edt but returns squared distances and accepts masks without a
/// boundary (all-false gives +inf everywhere).
ScalarVolume squared_edt(const BinaryMask& mask);

/// Positive inside (distance to the nearest outside voxel center), negative
/// outside (minus the distance to the nearest inside voxel center).
SdtVolume signed_distance_transform(const BinaryMask& mask);

struct BandedSdt {
  SdtVolume values;
  ScalarVolume weights;
};

/// Clamps values to [-band, band]; weight is `background_weight` where the
/// unclamped magnitude exceeds the band, 1 elsewhere.
BandedSdt band_target(const SdtVolume& sdt, double band_mm = 5.0, double background_weight = 0.1);

/// Banded signed distance of `mask`, saturating at -band (all false) or +band
/// (all true) when the mask has no boundary.
BandedSdt banded_signed_distance(const BinaryMask& mask, double band_mm = 5.0, double background_weight = 0.1);

BinaryMask mask_from_sdt(const SdtVolume& sdt, double threshold = 0.0);

/// True voxels with at least one false 6-neighbour; out-of-grid counts as false.
std::vector<std::size_t> surface_voxels(const BinaryMask& mask);

}  // namespace corticarve
