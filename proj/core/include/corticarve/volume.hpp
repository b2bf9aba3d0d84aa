#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "corticarve/error.hpp"

namespace corticarve {

using Vec3 = Eigen::Vector3d;
using Affine = Eigen::Matrix4d;
using Dims = std::array<int, 3>;

/// Voxel lattice with spacing (mm) and a voxel-to-world affine (mm).
///
/// Voxel (x, y, z) is stored at linear index x + nx * (y + ny * z), i.e. the
/// x index varies fastest. Voxel coordinates refer to voxel centers.
struct Grid {
  Dims dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Affine affine = Affine::Identity();

  /// Axis-aligned grid whose voxel (0,0,0) center sits at `origin`.
  static Grid make(Dims dims, Vec3 spacing = Vec3::Ones(), Vec3 origin = Vec3::Zero());

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(z));
  }
  std::array<int, 3> coords(std::size_t i) const noexcept {
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    return {static_cast<int>(i % nx), static_cast<int>((i / nx) % ny), static_cast<int>(i / (nx * ny))};
  }
  bool contains(int x, int y, int z) const noexcept {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }

  Vec3 to_world(const Vec3& voxel) const { return (affine * voxel.homogeneous()).head<3>(); }
  Vec3 to_voxel(const Vec3& world) const { return (affine.inverse() * world.homogeneous()).head<3>(); }
  /// World position of the geometric center of the lattice.
  Vec3 center_world() const;

  /// Throws Errc::invalid_argument if dims, spacing or affine are invalid.
  void validate() const;
  bool same_geometry(const Grid& other, double tol = 1e-9) const;
};

/// Dense 3D array on a Grid. The Tag parameter distinguishes volumes that share
/// a value type but not a meaning (e.g. intensities vs. signed distances).
template <class T, class Tag = void>
struct Volume {
  using value_type = T;

  Grid grid;
  std::vector<T> data;

  Volume() = default;
  explicit Volume(Grid g, T fill = T{}) : grid(std::move(g)), data(grid.size(), fill) {}
  Volume(Grid g, std::vector<T> values) : grid(std::move(g)), data(std::move(values)) {
    if (data.size() != grid.size()) {
      throw Error(Errc::invalid_argument, "volume data length does not match grid dims");
    }
  }

  std::size_t size() const noexcept { return data.size(); }
  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }
  T& at(int x, int y, int z) { return data[grid.index(x, y, z)]; }
  const T& at(int x, int y, int z) const { return data[grid.index(x, y, z)]; }

  bool operator==(const Volume&) const = default;
};

struct SdtTag {};

using ScalarVolume = Volume<double>;
using LabelVolume = Volume<std::uint32_t>;
using BinaryMask = Volume<std::uint8_t>;
/// Signed distance to a mask boundary in mm; positive inside the mask.
using SdtVolume = Volume<double, SdtTag>;

enum class Interp { trilinear, nearest };

void require_same_grid(const Grid& a, const Grid& b, const char* what);

/// Trilinear interpolation at a continuous voxel coordinate. Coordinates
/// outside the lattice are clamped to the nearest in-bounds sample point.
template <class T, class Tag>
double trilinear_sample(const Volume<T, Tag>& vol, const Vec3& p) {
  const auto& d = vol.grid.dims;
  double c[3];
  int i0[3], i1[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(p[a], 0.0, static_cast<double>(d[a] - 1));
    i0[a] = static_cast<int>(std::floor(c[a]));
    i1[a] = std::min(i0[a] + 1, d[a] - 1);
    f[a] = c[a] - i0[a];
  }
  const auto v = [&](int x, int y, int z) { return static_cast<double>(vol.at(x, y, z)); };
  const double c00 = v(i0[0], i0[1], i0[2]) * (1 - f[0]) + v(i1[0], i0[1], i0[2]) * f[0];
  const double c10 = v(i0[0], i1[1], i0[2]) * (1 - f[0]) + v(i1[0], i1[1], i0[2]) * f[0];
  const double c01 = v(i0[0], i0[1], i1[2]) * (1 - f[0]) + v(i1[0], i0[1], i1[2]) * f[0];
  const double c11 = v(i0[0], i1[1], i1[2]) * (1 - f[0]) + v(i1[0], i1[1], i1[2]) * f[0];
  const double c0 = c00 * (1 - f[1]) + c10 * f[1];
  const double c1 = c01 * (1 - f[1]) + c11 * f[1];
  return c0 * (1 - f[2]) + c1 * f[2];
}

/// Nearest-neighbour lookup with the same edge clamping as trilinear_sample.
template <class T, class Tag>
T nearest_sample(const Volume<T, Tag>& vol, const Vec3& p) {
  const auto& d = vol.grid.dims;
  int i[3];
  for (int a = 0; a < 3; ++a) {
    i[a] = static_cast<int>(std::lround(std::clamp(p[a], 0.0, static_cast<double>(d[a] - 1))));
  }
  return vol.at(i[0], i[1], i[2]);
}

namespace detail {
/// Removes sub-1e-6 voxel jitter so that mapping a grid onto itself hits the
/// interpolation nodes exactly.
inline Vec3 snap_to_nodes(Vec3 p) {
  for (int a = 0; a < 3; ++a) {
    const double r = std::round(p[a]);
    if (std::abs(p[a] - r) < 1e-6) p[a] = r;
  }
  return p;
}
}  // namespace detail

/// Resamples `vol` onto `target`: each target voxel maps through
/// target.affine and then the inverse of the source affine. Integral volumes
/// (labels, masks) only accept nearest-neighbour sampling.
template <class T, class Tag>
Volume<T, Tag> resample_to_grid(const Volume<T, Tag>& vol, const Grid& target, Interp mode) {
  if constexpr (std::is_integral_v<T>) {
    if (mode != Interp::nearest) {
      throw Error(Errc::invalid_argument, "trilinear resampling would mix labels; use nearest");
    }
  }
  target.validate();
  if (vol.grid.same_geometry(target)) return Volume<T, Tag>(target, vol.data);

  const Affine map = vol.grid.affine.inverse() * target.affine;
  Volume<T, Tag> out(target);
  for (int z = 0; z < target.dims[2]; ++z) {
    for (int y = 0; y < target.dims[1]; ++y) {
      for (int x = 0; x < target.dims[0]; ++x) {
        const Vec3 p = detail::snap_to_nodes((map * Eigen::Vector4d(x, y, z, 1.0)).head<3>());
        T& dst = out.at(x, y, z);
        if constexpr (std::is_integral_v<T>) {
          dst = nearest_sample(vol, p);
        } else {
          dst = mode == Interp::nearest ? nearest_sample(vol, p) : static_cast<T>(trilinear_sample(vol, p));
        }
      }
    }
  }
  return out;
}

/// Isotropic grid of voxel size `voxel_mm` covering the same field of view as
/// `grid` (outer voxel corners preserved, dims rounded up).
Grid conform_grid(const Grid& grid, double voxel_mm = 1.0);

struct Conformed {
  ScalarVolume volume;
  Grid original;
};

/// Trilinear resample to isotropic `voxel_mm` spacing followed by a min-max
/// rescale of intensities to [0, 1].
Conformed conform(const ScalarVolume& vol, double voxel_mm = 1.0);

/// Affine min-max rescale to [0, 1]. Throws Errc::degenerate_input for a
/// constant volume.
ScalarVolume rescale_unit(const ScalarVolume& vol);

std::size_t count_true(const BinaryMask& mask);

}  // namespace corticarve
