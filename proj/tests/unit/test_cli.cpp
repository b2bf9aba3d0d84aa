#include <gtest/gtest.h>

#include <filesystem>

#include "corticarve/checkpoint.hpp"
#include "corticarve/io.hpp"
#include "corticarve/phantom.hpp"
#include "corticarve_cli/cli.hpp"

using namespace corticarve;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "corticarve_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "corticarve");
  return cli::run(args);
}

std::vector<std::pair<std::string, std::string>> tree(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : fs::directory_iterator(dir)) out.emplace_back(e.path().filename().string(), read_file(e.path()));
  std::sort(out.begin(), out.end());
  return out;
}

fs::path small_phantom(const fs::path& dir) {
  const fs::path p = dir / "labels.nii.gz";
  EXPECT_EQ(run({"phantom", "--out", p.string(), "--size", "12", "--spacing", "20", "--seed", "3"}), cli::kOk);
  return p;
}

}  // namespace

TEST(Cli, UsageErrorsExitWithOne) {
  EXPECT_EQ(run({}), cli::kUsage);
  EXPECT_EQ(run({"frobnicate"}), cli::kUsage);
  EXPECT_EQ(run({"ebv", "--no-such-flag", "x.nii"}), cli::kUsage);
  EXPECT_EQ(run({"strip", "--image", "x.nii"}), cli::kUsage);
  EXPECT_EQ(run({"sdt", "--mask", "m.nii", "--out", "o.nii", "--weights", "w.nii"}), cli::kUsage);
}

TEST(Cli, HelpExitsWithZero) { EXPECT_EQ(run({"--help"}), cli::kOk); }

TEST(Cli, DataErrorsExitWithTwo) {
  const fs::path dir = fresh_dir("data_errors");
  EXPECT_EQ(run({"ebv", (dir / "missing.nii").string()}), cli::kDataError);

  BinaryMask a(Grid::make({4, 4, 4}));
  BinaryMask b(Grid::make({5, 4, 4}));
  a[5] = b[5] = 1;
  write_volume(a, dir / "a.nii");
  write_volume(b, dir / "b.nii");
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"evaluate", "--pred", (dir / "a.nii").string(), "--truth", (dir / "b.nii").string()}),
            cli::kDataError);
  EXPECT_NE(testing::internal::GetCapturedStderr().find("grid"), std::string::npos);
}

TEST(Cli, GenerateIsByteReproducible) {
  const fs::path dir = fresh_dir("generate");
  const fs::path labels = small_phantom(dir);
  for (const char* out : {"one", "two"}) {
    ASSERT_EQ(run({"generate", "--labels", labels.string(), "--out-dir", (dir / out).string(), "--count", "3",
                   "--seed", "7", "--jobs", "2"}),
              cli::kOk);
  }
  const auto one = tree(dir / "one");
  EXPECT_EQ(one.size(), 12u);
  EXPECT_EQ(one, tree(dir / "two"));
  ASSERT_EQ(run({"generate", "--labels", labels.string(), "--out-dir", (dir / "three").string(), "--count", "3",
                 "--seed", "8"}),
            cli::kOk);
  EXPECT_NE(one, tree(dir / "three"));
}

TEST(Cli, GenerateRawFormat) {
  const fs::path dir = fresh_dir("generate_raw");
  const fs::path labels = small_phantom(dir);
  ASSERT_EQ(run({"generate", "--labels", labels.string(), "--out-dir", (dir / "out").string(), "--format", "raw"}),
            cli::kOk);
  const ScalarVolume img = read_scalar_volume(dir / "out" / "sample_0000_image.raw");
  for (double v : img.data) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_EQ(run({"generate", "--labels", labels.string(), "--out-dir", (dir / "x").string(), "--format", "mgz"}),
            cli::kUsage);
}

TEST(Cli, StripWritesMaskOnInputGrid) {
  const fs::path dir = fresh_dir("strip");
  UNetConfig c;
  c.levels = 2;
  c.filters = {2, 4};
  c.input_dims = {8, 8, 8};
  c.voxel_size_mm = 16.0;
  save_checkpoint(UNet<float>(c, 1), dir / "m.ckpt");
  ScalarVolume img(Grid::make({10, 9, 7}, Vec3(12.0, 14.0, 20.0)));
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<double>(i % 13);
  write_volume(img, dir / "img.nii");
  ASSERT_EQ(run({"strip", "--model", (dir / "m.ckpt").string(), "--image", (dir / "img.nii").string(), "--out",
                 (dir / "mask.nii.gz").string(), "--out-sdt", (dir / "sdt.nii").string()}),
            cli::kOk);
  const BinaryMask m = read_mask(dir / "mask.nii.gz");
  EXPECT_TRUE(m.grid.same_geometry(img.grid, 1e-5));
  EXPECT_EQ(read_header(dir / "mask.nii.gz").datatype, DataType::uint8);
  EXPECT_TRUE(fs::exists(dir / "sdt.nii"));
}

TEST(Cli, FailedCommandLeavesNoOutput) {
  const fs::path dir = fresh_dir("no_partial");
  write_file_atomic(dir / "m.ckpt", "garbage");
  ScalarVolume img(Grid::make({4, 4, 4}), 1.0);
  write_volume(img, dir / "img.nii");
  EXPECT_EQ(run({"strip", "--model", (dir / "m.ckpt").string(), "--image", (dir / "img.nii").string(), "--out",
                 (dir / "mask.nii").string()}),
            cli::kDataError);
  EXPECT_FALSE(fs::exists(dir / "mask.nii"));
  EXPECT_EQ(tree(dir).size(), 2u);
}

TEST(Cli, DiscordanceAndExposureReports) {
  const fs::path dir = fresh_dir("dv");
  BinaryMask m(Grid::make({6, 6, 6}));
  for (int z = 1; z < 5; ++z)
    for (int y = 1; y < 5; ++y)
      for (int x = 1; x < 5; ++x) m.at(x, y, z) = 1;
  write_volume(m, dir / "f0.nii");
  write_volume(m, dir / "f1.nii");
  testing::internal::CaptureStdout();
  EXPECT_EQ(run({"--json", "dv", (dir / "f0.nii").string(), (dir / "f1.nii").string()}), cli::kOk);
  const std::string out = testing::internal::GetCapturedStdout();
  EXPECT_NE(out.find("\"dv_pct\":0.0"), std::string::npos) << out;
  EXPECT_EQ(run({"ebv", (dir / "f0.nii").string()}), cli::kOk);
}
