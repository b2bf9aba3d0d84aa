#include "corticarve/volume.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace corticarve {

Grid Grid::make(Dims dims, Vec3 spacing, Vec3 origin) {
  Grid g;
  g.dims = dims;
  g.spacing = spacing;
  g.affine = Affine::Identity();
  for (int a = 0; a < 3; ++a) g.affine(a, a) = spacing[a];
  g.affine.block<3, 1>(0, 3) = origin;
  g.validate();
  return g;
}

Vec3 Grid::center_world() const {
  const Vec3 c((dims[0] - 1) / 2.0, (dims[1] - 1) / 2.0, (dims[2] - 1) / 2.0);
  return to_world(c);
}

void Grid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 1) throw Error(Errc::invalid_argument, "grid dims must be >= 1");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) {
      throw Error(Errc::invalid_argument, "grid spacing must be positive");
    }
  }
  if (!affine.allFinite() || std::abs(affine.determinant()) <= 1e-12) {
    throw Error(Errc::invalid_argument, "grid affine must be finite and invertible");
  }
}

bool Grid::same_geometry(const Grid& other, double tol) const {
  return dims == other.dims && (spacing - other.spacing).cwiseAbs().maxCoeff() <= tol &&
         (affine - other.affine).cwiseAbs().maxCoeff() <= tol;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_geometry(b, 1e-6)) {
    throw Error(Errc::grid_mismatch, std::string(what) + ": grid mismatch");
  }
}

Grid conform_grid(const Grid& grid, double voxel_mm) {
  grid.validate();
  if (!(voxel_mm > 0.0)) throw Error(Errc::invalid_argument, "conform voxel size must be positive");

  Grid out;
  Affine aff = Affine::Identity();
  // Lower corner of the field of view, in source voxel units.
  const Vec3 corner = grid.to_world(Vec3::Constant(-0.5));
  for (int a = 0; a < 3; ++a) {
    const Vec3 axis = grid.affine.block<3, 1>(0, a);
    const double len = axis.norm();
    const double extent = grid.dims[a] * len;
    // Tolerate round-off so that an exact multiple does not gain a voxel.
    out.dims[a] = std::max(1, static_cast<int>(std::ceil(extent / voxel_mm - 1e-6)));
    aff.block<3, 1>(0, a) = axis / len * voxel_mm;
  }
  aff.block<3, 1>(0, 3) = corner + aff.block<3, 3>(0, 0) * Vec3::Constant(0.5);
  out.affine = aff;
  out.spacing = Vec3::Constant(voxel_mm);
  out.validate();
  return out;
}

ScalarVolume rescale_unit(const ScalarVolume& vol) {
  if (vol.data.empty()) throw Error(Errc::degenerate_input, "degenerate intensity range");
  const auto [lo_it, hi_it] = std::minmax_element(vol.data.begin(), vol.data.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw Error(Errc::degenerate_input, "degenerate intensity range");
  ScalarVolume out(vol.grid);
  const double range = hi - lo;
  for (std::size_t i = 0; i < vol.size(); ++i) out[i] = (vol[i] - lo) / range;
  return out;
}

Conformed conform(const ScalarVolume& vol, double voxel_mm) {
  const auto [lo_it, hi_it] = std::minmax_element(vol.data.begin(), vol.data.end());
  if (vol.data.empty() || !(*hi_it > *lo_it)) {
    throw Error(Errc::degenerate_input, "degenerate intensity range");
  }
  const Grid target = conform_grid(vol.grid, voxel_mm);
  ScalarVolume resampled = resample_to_grid(vol, target, Interp::trilinear);
  return {rescale_unit(resampled), vol.grid};
}

std::size_t count_true(const BinaryMask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.data.begin(), mask.data.end(), [](auto v) { return v != 0; }));
}

}  // namespace corticarve
