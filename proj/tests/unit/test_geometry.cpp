#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "corticarve/geometry.hpp"

using namespace corticarve;

namespace {

VelocityField constant_field(const Grid& target, double voxel_mm, const Vec3& v) {
  VelocityField f(coarse_grid(target, voxel_mm));
  for (std::size_t i = 0; i < f.grid.size(); ++i) f.set(i, v);
  return f;
}

}  // namespace

TEST(Affine, IdentityParametersGiveIdentityMatrix) {
  const AffineSample a;
  EXPECT_LT((a.matrix(Vec3(3, 4, 5)) - Affine::Identity()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Affine, RotationAboutCenterKeepsCenterFixed) {
  AffineSample a;
  a.rotation_deg = Vec3(0, 0, 90);
  const Vec3 c(10, 20, 30);
  const Affine m = a.matrix(c);
  EXPECT_LT(((m * c.homogeneous()).head<3>() - c).norm(), 1e-12);
  // +x maps to +y under a 90 degree rotation about z.
  const Vec3 p = (m * (c + Vec3(1, 0, 0)).homogeneous()).head<3>();
  EXPECT_LT((p - (c + Vec3(0, 1, 0))).norm(), 1e-12);
}

TEST(Affine, DrawsStayInRange) {
  SynthesisConfig cfg;
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const AffineSample a = sample_affine(cfg, rng);
    for (int k = 0; k < 3; ++k) {
      EXPECT_LE(std::abs(a.translation_mm[k]), 50.0);
      EXPECT_LE(std::abs(a.rotation_deg[k]), 45.0);
      EXPECT_GE(a.scale[k], 0.8);
      EXPECT_LE(a.scale[k], 1.2);
    }
    EXPECT_GT(std::abs(a.matrix(Vec3::Zero()).determinant()), 0.0);
  }
}

TEST(Affine, SeededDrawsRepeat) {
  SynthesisConfig cfg;
  Rng a(11), b(11);
  EXPECT_EQ(sample_affine(cfg, a), sample_affine(cfg, b));
}

TEST(CoarseGrid, CoversTargetAndIsCentered) {
  const Grid target = Grid::make({32, 32, 32}, Vec3::Ones(), Vec3(-15.5, -15.5, -15.5));
  const Grid c = coarse_grid(target, 10.0);
  EXPECT_EQ(c.spacing, Vec3::Constant(10.0));
  EXPECT_LT((c.center_world() - target.center_world()).norm(), 1e-9);
  for (int a = 0; a < 3; ++a) EXPECT_GE((c.dims[a] - 1) * 10.0, 31.0);
}

TEST(Svf, ZeroFieldIsExactIdentity) {
  const Grid target = Grid::make({12, 10, 8});
  const DenseDeformation d = integrate_svf(constant_field(target, 4.0, Vec3::Zero()), 5, target);
  for (double v : d.vectors) EXPECT_EQ(v, 0.0);
}

TEST(Svf, ConstantVelocityIsTranslation) {
  const Grid target = Grid::make({24, 24, 24});
  const DenseDeformation d = integrate_svf(constant_field(target, 4.0, Vec3(3, 0, 0)), 5, target);
  double worst = 0.0;
  for (int z = 4; z < 20; ++z) {
    for (int y = 4; y < 20; ++y) {
      for (int x = 4; x < 20; ++x) {
        worst = std::max(worst, (d.at(target.index(x, y, z)) - Vec3(3, 0, 0)).norm());
      }
    }
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Svf, SmoothFieldIsDiffeomorphic) {
  const Grid target = Grid::make({20, 20, 20});
  SynthesisConfig cfg;
  cfg.deformation_sd_mm = {3.0, 3.0};
  Rng rng(5);
  const DenseDeformation d = integrate_svf(sample_velocity_field(target, cfg, rng), 5, target);
  const ScalarVolume j = jacobian_determinant(d);
  for (double v : j.data) EXPECT_GT(v, 0.0);
}

TEST(Compose, TranslationsAdd) {
  const Grid g = Grid::make({6, 6, 6});
  DenseDeformation a(g), b(g);
  for (std::size_t i = 0; i < g.size(); ++i) {
    a.set(i, Vec3(1, 0, 0));
    b.set(i, Vec3(0, 2, 0));
  }
  const DenseDeformation c = compose(a, b);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LT((c.at(i) - Vec3(1, 2, 0)).norm(), 1e-12);
}

TEST(Warp, IdentityLeavesLabelsUnchanged) {
  LabelVolume l(Grid::make({7, 6, 5}, Vec3(1, 2, 1)));
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<std::uint32_t>(i % 4);
  EXPECT_EQ(warp_volume(l, AffineSample{}, DenseDeformation{}, Interp::nearest).data, l.data);
}

TEST(Warp, DisplacementSamplesShiftedPosition) {
  ScalarVolume v(Grid::make({8, 1, 1}));
  for (int x = 0; x < 8; ++x) v[x] = x;
  DenseDeformation d(v.grid);
  for (std::size_t i = 0; i < v.size(); ++i) d.set(i, Vec3(2, 0, 0));
  const ScalarVolume w = warp_volume(v, AffineSample{}, d, Interp::trilinear);
  EXPECT_DOUBLE_EQ(w[0], 2.0);
  EXPECT_DOUBLE_EQ(w[5], 7.0);
  EXPECT_DOUBLE_EQ(w[7], 7.0);
}

TEST(Warp, ForwardTranslationMovesContent) {
  LabelVolume l(Grid::make({10, 1, 1}));
  l[3] = 1;
  AffineSample a;
  a.translation_mm = Vec3(2, 0, 0);
  const LabelVolume w = warp_volume(l, a, DenseDeformation{}, Interp::nearest);
  EXPECT_EQ(w[5], 1u);
  EXPECT_EQ(w[3], 0u);
}

TEST(Warp, IntegralVolumesRejectTrilinear) {
  LabelVolume l(Grid::make({3, 3, 3}));
  EXPECT_THROW(warp_volume(l, AffineSample{}, DenseDeformation{}, Interp::trilinear), Error);
}
