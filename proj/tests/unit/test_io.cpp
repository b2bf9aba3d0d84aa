#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>

#include "corticarve/io.hpp"

using namespace corticarve;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "corticarve_test_io";
  fs::create_directories(dir);
  return dir / name;
}

Grid oblique_grid() {
  Grid g = Grid::make({5, 4, 3}, Vec3(1.5, 2.0, 0.75), Vec3(-10.25, 3.5, 7.0));
  g.affine(0, 1) = 0.125;  // shear survives the sform exactly in float32
  return g;
}

void expect_error(const std::function<void()>& f, Errc code) {
  try {
    f();
    FAIL() << "expected " << errc_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

template <class T>
void put(std::string& s, std::size_t off, T v) {
  std::memcpy(s.data() + off, &v, sizeof v);
}

/// Minimal hand-built NIfTI-1 header for reader tests.
std::string nifti_fixture(short datatype, short bitpix, const std::string& payload, float slope = 0.0f,
                          float inter = 0.0f, const char* magic = "n+1") {
  std::string s(352, '\0');
  put<int>(s, 0, 348);
  const short dim[8] = {3, 3, 1, 1, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) put<short>(s, 40 + 2 * i, dim[i]);
  put<short>(s, 70, datatype);
  put<short>(s, 72, bitpix);
  for (int i = 0; i < 4; ++i) put<float>(s, 76 + 4 * i, 1.0f);
  put<float>(s, 108, 352.0f);
  put<float>(s, 112, slope);
  put<float>(s, 116, inter);
  std::memcpy(s.data() + 344, magic, 4);
  return s + payload;
}

}  // namespace

TEST(Nifti, Float32RoundTripIsBitIdentical) {
  ScalarVolume v(oblique_grid());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(std::sin(1.7 * i) * 100.0);
  for (const char* name : {"f.nii", "f.nii.gz"}) {
    write_volume(v, temp_path(name));
    const ScalarVolume r = read_scalar_volume(temp_path(name));
    EXPECT_EQ(r.data, v.data);
    EXPECT_EQ(r.grid.dims, v.grid.dims);
    EXPECT_EQ(r.grid.affine, v.grid.affine);
  }
}

TEST(Nifti, IntegralRoundTrips) {
  LabelVolume l(oblique_grid());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = static_cast<std::uint32_t>(i * 37 % 30000);
  write_volume(l, temp_path("l.nii.gz"));
  const AnyVolume any = read_volume(temp_path("l.nii.gz"));
  ASSERT_TRUE(std::holds_alternative<LabelVolume>(any));
  EXPECT_EQ(std::get<LabelVolume>(any).data, l.data);

  BinaryMask m(oblique_grid());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = i % 3 == 0;
  write_volume(m, temp_path("m.nii"));
  EXPECT_EQ(read_mask(temp_path("m.nii")).data, m.data);
  EXPECT_EQ(read_header(temp_path("m.nii")).datatype, DataType::uint8);
  const ScalarVolume as_scalar = read_scalar_volume(temp_path("m.nii"));
  for (double x : as_scalar.data) EXPECT_TRUE(x == 0.0 || x == 1.0);
}

TEST(Nifti, PayloadSizeArithmetic) {
  ScalarVolume v(Grid::make({16, 8, 4}));
  write_volume(v, temp_path("size.nii"));
  EXPECT_EQ(fs::file_size(temp_path("size.nii")), 348u + 4u + 16u * 8u * 4u * 4u);
}

TEST(Nifti, HeaderScalingApplied) {
  std::string payload(6, '\0');
  const short vals[3] = {1, -2, 7};
  std::memcpy(payload.data(), vals, 6);
  write_file_atomic(temp_path("scaled.nii"), nifti_fixture(4, 16, payload, 2.0f, 1.0f));
  const ScalarVolume v = read_scalar_volume(temp_path("scaled.nii"));
  EXPECT_EQ(v.data, (std::vector<double>{3.0, -3.0, 15.0}));
}

TEST(Nifti, DetachedHeaderIsUnsupported) {
  write_file_atomic(temp_path("ni1.nii"), nifti_fixture(16, 32, std::string(12, '\0'), 0, 0, "ni1"));
  expect_error([] { read_volume(temp_path("ni1.nii")); }, Errc::unsupported_format);
}

TEST(Nifti, DistinctErrorCodes) {
  write_file_atomic(temp_path("magic.nii"), nifti_fixture(16, 32, std::string(12, '\0'), 0, 0, "xyz"));
  expect_error([] { read_volume(temp_path("magic.nii")); }, Errc::bad_magic);
  write_file_atomic(temp_path("dtype.nii"), nifti_fixture(64, 64, std::string(24, '\0')));
  expect_error([] { read_volume(temp_path("dtype.nii")); }, Errc::unsupported_datatype);
  write_file_atomic(temp_path("short.nii"), nifti_fixture(16, 32, std::string(5, '\0')));
  expect_error([] { read_volume(temp_path("short.nii")); }, Errc::truncated_payload);
  expect_error([] { read_volume(temp_path("missing.nii")); }, Errc::io_failure);
}

TEST(Nifti, OutOfRangeCastRejected) {
  ScalarVolume v(Grid::make({2, 1, 1}));
  v.data = {1.0, 300.0};
  expect_error([&] { write_volume(v, temp_path("range.nii"), DataType::uint8); }, Errc::out_of_range_cast);
  EXPECT_FALSE(fs::exists(temp_path("range.nii")));
  v.data = {1.0, -40000.0};
  expect_error([&] { write_volume(v, temp_path("range.nii"), DataType::int16); }, Errc::out_of_range_cast);
}

TEST(Raw, RoundTripsWithSidecar) {
  ScalarVolume v(oblique_grid());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) * 0.5f - 3.0f;
  write_volume(v, temp_path("vol.raw"));
  EXPECT_TRUE(fs::exists(temp_path("vol.json")));
  const ScalarVolume r = read_scalar_volume(temp_path("vol.raw"));
  EXPECT_EQ(r.data, v.data);
  EXPECT_EQ(r.grid.affine, v.grid.affine);

  LabelVolume l(oblique_grid(), 4u);
  write_volume(l, temp_path("lab.raw"));
  const AnyVolume any = read_volume(temp_path("lab.json"));
  ASSERT_TRUE(std::holds_alternative<LabelVolume>(any));
  EXPECT_EQ(std::get<LabelVolume>(any).data, l.data);
}

TEST(Raw, BadSidecarAndTruncation) {
  write_file_atomic(temp_path("bad.json"), "{\"format\": \"something-else\"}");
  write_file_atomic(temp_path("bad.raw"), "");
  expect_error([] { read_volume(temp_path("bad.raw")); }, Errc::bad_magic);
  ScalarVolume v(Grid::make({4, 4, 4}), 1.0);
  write_volume(v, temp_path("cut.raw"));
  const std::string bytes = read_file(temp_path("cut.raw"));
  write_file_atomic(temp_path("cut.raw"), bytes.substr(0, 10));
  expect_error([] { read_volume(temp_path("cut.raw")); }, Errc::truncated_payload);
}

TEST(Formats, UnknownExtension) {
  expect_error([] { read_volume(temp_path("x.mgz")); }, Errc::unsupported_format);
}

TEST(AtomicWrite, ReplacesContentAndLeavesNoTemporaries) {
  const fs::path p = temp_path("atomic/target.txt");
  fs::create_directories(p.parent_path());
  write_file_atomic(p, "first");
  write_file_atomic(p, "second");
  EXPECT_EQ(read_file(p), "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(p.parent_path())) ++files;
  EXPECT_EQ(files, 1u);
}
