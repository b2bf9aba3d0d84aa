#include "corticarve/geometry.hpp"

#include <cmath>
#include <numbers>

namespace corticarve {

namespace {

Eigen::Matrix3d rotation_zyx(const Vec3& deg) {
  const Vec3 r = deg * (std::numbers::pi / 180.0);
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(r[0], Vec3::UnitX()).toRotationMatrix();
  const Eigen::Matrix3d ry = Eigen::AngleAxisd(r[1], Vec3::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(r[2], Vec3::UnitZ()).toRotationMatrix();
  return rz * ry * rx;
}

double draw_signed(const Range& r, Rng& rng) {
  const double magnitude = rng.uniform(r.lo, r.hi);
  return rng.sign() * magnitude;
}

}  // namespace

Affine AffineSample::matrix(const Vec3& center) const {
  Affine m = Affine::Identity();
  m.block<3, 3>(0, 0) = rotation_zyx(rotation_deg) * scale.asDiagonal();
  m.block<3, 1>(0, 3) = center + translation_mm - m.block<3, 3>(0, 0) * center;
  return m;
}

template <class Tag>
Vec3 VectorVolume<Tag>::sample(const Vec3& p) const {
  const auto& d = grid.dims;
  double c[3];
  int i0[3], i1[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    c[a] = std::clamp(p[a], 0.0, static_cast<double>(d[a] - 1));
    i0[a] = static_cast<int>(std::floor(c[a]));
    i1[a] = std::min(i0[a] + 1, d[a] - 1);
    f[a] = c[a] - i0[a];
  }
  Vec3 out = Vec3::Zero();
  for (int dz = 0; dz < 2; ++dz) {
    const double wz = dz ? f[2] : 1.0 - f[2];
    const int z = dz ? i1[2] : i0[2];
    for (int dy = 0; dy < 2; ++dy) {
      const double wy = dy ? f[1] : 1.0 - f[1];
      const int y = dy ? i1[1] : i0[1];
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? f[0] : 1.0 - f[0]) * wy * wz;
        if (w == 0.0) continue;
        out += w * at(grid.index(dx ? i1[0] : i0[0], y, z));
      }
    }
  }
  return out;
}

template struct VectorVolume<VelocityTag>;
template struct VectorVolume<DeformationTag>;

AffineSample sample_affine(const SynthesisConfig& cfg, Rng& rng) {
  AffineSample s;
  for (int a = 0; a < 3; ++a) s.translation_mm[a] = draw_signed(cfg.affine_translation_mm, rng);
  for (int a = 0; a < 3; ++a) s.rotation_deg[a] = draw_signed(cfg.affine_rotation_deg, rng);
  for (int a = 0; a < 3; ++a) s.scale[a] = rng.uniform(cfg.affine_scaling_pct.lo, cfg.affine_scaling_pct.hi) / 100.0;
  return s;
}

Grid coarse_grid(const Grid& target, double voxel_mm) {
  if (!(voxel_mm > 0.0)) throw Error(Errc::invalid_argument, "coarse voxel length must be positive");
  Grid g;
  Affine aff = Affine::Identity();
  for (int a = 0; a < 3; ++a) {
    const Vec3 axis = target.affine.block<3, 1>(0, a);
    const double len = axis.norm();
    const double extent = (target.dims[a] - 1) * len;
    g.dims[a] = static_cast<int>(std::ceil(extent / voxel_mm - 1e-9)) + 1;
    aff.block<3, 1>(0, a) = axis / len * voxel_mm;
  }
  const Vec3 half((g.dims[0] - 1) / 2.0, (g.dims[1] - 1) / 2.0, (g.dims[2] - 1) / 2.0);
  aff.block<3, 1>(0, 3) = target.center_world() - aff.block<3, 3>(0, 0) * half;
  g.affine = aff;
  g.spacing = Vec3::Constant(voxel_mm);
  return g;
}

VelocityField sample_velocity_field(const Grid& target, const SynthesisConfig& cfg, Rng& rng,
                                    SynthesisDraws* draws) {
  const double length = rng.uniform(cfg.deformation_voxel_length_mm.lo, cfg.deformation_voxel_length_mm.hi);
  const double sd = rng.uniform(cfg.deformation_sd_mm.lo, cfg.deformation_sd_mm.hi);
  if (draws) {
    draws->deformation_voxel_length_mm = length;
    draws->deformation_sd_mm = sd;
  }
  VelocityField v(coarse_grid(target, length));
  for (double& c : v.vectors) c = rng.normal(0.0, sd);
  return v;
}

DenseDeformation integrate_svf(const VelocityField& v, int steps, const Grid& target) {
  if (steps < 1) throw Error(Errc::invalid_argument, "scaling and squaring needs at least one step");
  const Eigen::Matrix3d to_voxel = v.grid.affine.block<3, 3>(0, 0).inverse();

  VelocityField phi = v;
  const double scale = std::ldexp(1.0, -steps);
  for (double& c : phi.vectors) c *= scale;

  const auto& d = v.grid.dims;
  for (int s = 0; s < steps; ++s) {
    VelocityField next(phi.grid);
    for (int z = 0; z < d[2]; ++z) {
      for (int y = 0; y < d[1]; ++y) {
        for (int x = 0; x < d[0]; ++x) {
          const std::size_t i = phi.grid.index(x, y, z);
          const Vec3 u = phi.at(i);
          const Vec3 p = Vec3(x, y, z) + to_voxel * u;
          next.set(i, u + phi.sample(p));
        }
      }
    }
    phi = std::move(next);
  }

  DenseDeformation out(target);
  const Affine map = v.grid.affine.inverse() * target.affine;
  for (int z = 0; z < target.dims[2]; ++z) {
    for (int y = 0; y < target.dims[1]; ++y) {
      for (int x = 0; x < target.dims[0]; ++x) {
        const Vec3 p = (map * Eigen::Vector4d(x, y, z, 1.0)).head<3>();
        out.set(target.index(x, y, z), phi.sample(p));
      }
    }
  }
  return out;
}

template <class T, class Tag>
Volume<T, Tag> warp_volume(const Volume<T, Tag>& vol, const AffineSample& affine, const DenseDeformation& def,
                           Interp mode) {
  if constexpr (std::is_integral_v<T>) {
    if (mode != Interp::nearest) throw Error(Errc::invalid_argument, "label volumes must be warped with nearest");
  }
  const bool has_def = !def.vectors.empty();
  if (has_def && def.grid.dims != vol.grid.dims) {
    throw Error(Errc::grid_mismatch, "deformation grid does not match volume dims");
  }
  const Affine& a = vol.grid.affine;
  const Affine m = affine.matrix(vol.grid.center_world());
  const Affine back = a.inverse() * m.inverse();
  const Affine voxel_map = back * a;
  const Eigen::Matrix3d disp_map = back.block<3, 3>(0, 0);

  Volume<T, Tag> out(vol.grid);
  const auto& d = vol.grid.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const std::size_t i = vol.grid.index(x, y, z);
        Vec3 p = (voxel_map * Eigen::Vector4d(x, y, z, 1.0)).head<3>();
        if (has_def) p += disp_map * def.at(i);
        p = detail::snap_to_nodes(p);
        if constexpr (std::is_integral_v<T>) {
          out[i] = nearest_sample(vol, p);
        } else {
          out[i] = mode == Interp::nearest ? nearest_sample(vol, p) : static_cast<T>(trilinear_sample(vol, p));
        }
      }
    }
  }
  return out;
}

template ScalarVolume warp_volume(const ScalarVolume&, const AffineSample&, const DenseDeformation&, Interp);
template LabelVolume warp_volume(const LabelVolume&, const AffineSample&, const DenseDeformation&, Interp);
template BinaryMask warp_volume(const BinaryMask&, const AffineSample&, const DenseDeformation&, Interp);

DenseDeformation compose(const DenseDeformation& a, const DenseDeformation& b) {
  if (a.grid.dims != b.grid.dims) throw Error(Errc::grid_mismatch, "compose: grid mismatch");
  const Eigen::Matrix3d to_voxel = a.grid.affine.block<3, 3>(0, 0).inverse();
  DenseDeformation out(b.grid);
  const auto& d = b.grid.dims;
  for (int z = 0; z < d[2]; ++z) {
    for (int y = 0; y < d[1]; ++y) {
      for (int x = 0; x < d[0]; ++x) {
        const std::size_t i = b.grid.index(x, y, z);
        const Vec3 u = b.at(i);
        out.set(i, u + a.sample(Vec3(x, y, z) + to_voxel * u));
      }
    }
  }
  return out;
}

ScalarVolume jacobian_determinant(const DenseDeformation& def) {
  const auto& g = def.grid;
  const Eigen::Matrix3d to_voxel = g.affine.block<3, 3>(0, 0).inverse();
  ScalarVolume out(g, 1.0);
  const auto& d = g.dims;
  for (int z = 1; z + 1 < d[2]; ++z) {
    for (int y = 1; y + 1 < d[1]; ++y) {
      for (int x = 1; x + 1 < d[0]; ++x) {
        Eigen::Matrix3d grad;  // d(displacement)/d(voxel index)
        grad.col(0) = (def.at(g.index(x + 1, y, z)) - def.at(g.index(x - 1, y, z))) / 2.0;
        grad.col(1) = (def.at(g.index(x, y + 1, z)) - def.at(g.index(x, y - 1, z))) / 2.0;
        grad.col(2) = (def.at(g.index(x, y, z + 1)) - def.at(g.index(x, y, z - 1))) / 2.0;
        const Eigen::Matrix3d jac = Eigen::Matrix3d::Identity() + grad * to_voxel;
        out.at(x, y, z) = jac.determinant();
      }
    }
  }
  return out;
}

}  // namespace corticarve
