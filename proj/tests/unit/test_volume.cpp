#include <gtest/gtest.h>

#include "corticarve/volume.hpp"

using namespace corticarve;

TEST(Grid, IndexAndCoordsAreInverse) {
  const Grid g = Grid::make({4, 5, 6});
  for (std::size_t i = 0; i < g.size(); ++i) {
    const auto c = g.coords(i);
    EXPECT_EQ(g.index(c[0], c[1], c[2]), i);
  }
  EXPECT_EQ(g.index(1, 0, 0), 1u);
  EXPECT_EQ(g.index(0, 1, 0), 4u);
  EXPECT_EQ(g.index(0, 0, 1), 20u);
}

TEST(Grid, WorldVoxelRoundTrip) {
  Grid g = Grid::make({8, 8, 8}, Vec3(1.0, 2.0, 3.0), Vec3(-4.0, 5.0, 6.0));
  const Vec3 v(1.25, 2.5, 7.0);
  EXPECT_LT((g.to_voxel(g.to_world(v)) - v).norm(), 1e-12);
  EXPECT_NEAR(g.to_world(Vec3::Zero())[0], -4.0, 1e-12);
}

TEST(Grid, RejectsBadGeometry) {
  EXPECT_THROW(Grid::make({0, 2, 2}), Error);
  EXPECT_THROW(Grid::make({2, 2, 2}, Vec3(1.0, -1.0, 1.0)), Error);
}

TEST(Volume, DataLengthMustMatchGrid) {
  EXPECT_THROW(ScalarVolume(Grid::make({2, 2, 2}), std::vector<double>(7)), Error);
}

TEST(Resample, IdentityIsBitExact) {
  ScalarVolume v(Grid::make({5, 4, 3}, Vec3(1.1, 0.9, 2.0), Vec3(3, 4, 5)));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.37 * i);
  Grid slightly_off = v.grid;
  slightly_off.affine(0, 3) += 1e-12;
  EXPECT_EQ(resample_to_grid(v, slightly_off, Interp::trilinear).data, v.data);
}

TEST(Resample, TrilinearMidpointAverages) {
  ScalarVolume v(Grid::make({2, 1, 1}));
  v[0] = 2.0;
  v[1] = 6.0;
  EXPECT_DOUBLE_EQ(trilinear_sample(v, Vec3(0.5, 0, 0)), 4.0);
  EXPECT_DOUBLE_EQ(trilinear_sample(v, Vec3(-3.0, 0, 0)), 2.0);
  EXPECT_DOUBLE_EQ(trilinear_sample(v, Vec3(9.0, 0, 0)), 6.0);
}

TEST(Resample, LabelsRequireNearest) {
  LabelVolume l(Grid::make({2, 2, 2}));
  EXPECT_THROW(resample_to_grid(l, Grid::make({3, 3, 3}), Interp::trilinear), Error);
  EXPECT_NO_THROW(resample_to_grid(l, Grid::make({3, 3, 3}), Interp::nearest));
}

TEST(Resample, ShiftByWholeVoxel) {
  ScalarVolume v(Grid::make({4, 1, 1}));
  v.data = {0, 1, 2, 3};
  const Grid shifted = Grid::make({4, 1, 1}, Vec3::Ones(), Vec3(1, 0, 0));
  const ScalarVolume r = resample_to_grid(v, shifted, Interp::trilinear);
  EXPECT_EQ(r.data, (std::vector<double>{1, 2, 3, 3}));
}

TEST(Conform, PreservesFieldOfView) {
  const Grid g = Grid::make({10, 20, 7}, Vec3(1.5, 0.5, 3.0));
  const Grid c = conform_grid(g, 1.0);
  EXPECT_EQ(c.dims, (Dims{15, 10, 21}));
  const Vec3 corner_in = g.to_world(Vec3::Constant(-0.5));
  const Vec3 corner_out = c.to_world(Vec3::Constant(-0.5));
  EXPECT_LT((corner_in - corner_out).norm(), 1e-9);
}

TEST(Conform, IsotropicInputIsUnchanged) {
  ScalarVolume v(Grid::make({6, 6, 6}, Vec3::Constant(4.0), Vec3(-10, -10, -10)));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i % 17);
  const Conformed c = conform(v, 4.0);
  EXPECT_TRUE(c.volume.grid.same_geometry(v.grid, 1e-9));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_DOUBLE_EQ(c.volume[i], v[i] / 16.0);
}

TEST(Conform, ConstantInputIsRejected) {
  ScalarVolume v(Grid::make({3, 3, 3}), 5.0);
  try {
    conform(v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_input);
  }
}

TEST(RescaleUnit, MapsToUnitInterval) {
  ScalarVolume v(Grid::make({3, 1, 1}));
  v.data = {-2.0, 0.0, 2.0};
  EXPECT_EQ(rescale_unit(v).data, (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(GridMismatch, IsReported) {
  try {
    require_same_grid(Grid::make({2, 2, 2}), Grid::make({2, 2, 3}), "test");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::grid_mismatch);
  }
}
