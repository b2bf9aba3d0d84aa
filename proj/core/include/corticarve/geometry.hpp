#pragma once

#include <vector>

#include "corticarve/rng.hpp"
#include "corticarve/synthesis_config.hpp"
#include "corticarve/volume.hpp"

namespace corticarve {

/// Random affine parameters. Rotation is composed as Rz * Ry * Rx and, like
/// scaling, acts about the center of the warped volume.
struct AffineSample {
  Vec3 translation_mm = Vec3::Zero();
  Vec3 rotation_deg = Vec3::Zero();
  Vec3 scale = Vec3::Ones();

  /// Forward world-space transform about `center`:
  /// T(center + translation) * R * S * T(-center).
  Affine matrix(const Vec3& center) const;
  bool operator==(const AffineSample&) const = default;
};

struct VelocityTag {};
struct DeformationTag {};

/// Three vector components per voxel (mm), interleaved, on a Grid.
template <class Tag>
struct VectorVolume {
  Grid grid;
  std::vector<double> vectors;

  VectorVolume() = default;
  explicit VectorVolume(Grid g) : grid(std::move(g)), vectors(grid.size() * 3, 0.0) {}

  Vec3 at(std::size_t i) const { return {vectors[3 * i], vectors[3 * i + 1], vectors[3 * i + 2]}; }
  void set(std::size_t i, const Vec3& v) {
    vectors[3 * i] = v[0];
    vectors[3 * i + 1] = v[1];
    vectors[3 * i + 2] = v[2];
  }
  /// Component-wise trilinear sample at a continuous voxel coordinate
  /// (edge-clamped).
  Vec3 sample(const Vec3& p) const;
};

/// Stationary velocity field on a coarse isotropic grid.
using VelocityField = VectorVolume<VelocityTag>;
/// Dense displacement field on the target grid.
using DenseDeformation = VectorVolume<DeformationTag>;

AffineSample sample_affine(const SynthesisConfig& cfg, Rng& rng);

/// Isotropic grid of voxel length `voxel_mm` whose lattice spans the field of
/// view of `target`, aligned with its axes and centered on it.
Grid coarse_grid(const Grid& target, double voxel_mm);

/// Draws voxel length and SD from the config and fills a coarse grid with
/// Normal(0, SD) vectors.
VelocityField sample_velocity_field(const Grid& target, const SynthesisConfig& cfg, Rng& rng,
                                    SynthesisDraws* draws = nullptr);

/// Exponentiates `v` by scaling and squaring: start from v / 2^steps and
/// self-compose `steps` times on the velocity grid, then trilinearly upsample
/// the displacement onto `target`.
DenseDeformation integrate_svf(const VelocityField& v, int steps, const Grid& target);

/// Backward warp: output voxel p samples the input at
/// affine^-1(world(p) + displacement(p)). An empty deformation means zero
/// displacement. Integral volumes require Interp::nearest.
template <class T, class Tag>
Volume<T, Tag> warp_volume(const Volume<T, Tag>& vol, const AffineSample& affine, const DenseDeformation& def,
                           Interp mode);

/// Composes two displacement fields on the same grid: result(x) = b(x) + a(x + b(x)).
DenseDeformation compose(const DenseDeformation& a, const DenseDeformation& b);

/// Central-difference Jacobian determinant of identity + displacement at every
/// interior voxel (boundary voxels report 1).
ScalarVolume jacobian_determinant(const DenseDeformation& def);

}  // namespace corticarve
