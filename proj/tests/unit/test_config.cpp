#include <gtest/gtest.h>

#include <filesystem>

#include "corticarve/config_file.hpp"
#include "corticarve/io.hpp"

using namespace corticarve;
namespace fs = std::filesystem;

namespace {

Errc code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error for: " << text;
  return Errc::invalid_argument;
}

}  // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
  EXPECT_EQ(parse_config(""), ProjectConfig{});
  EXPECT_EQ(parse_config("synthesis: {}\ntrain: {}\n"), ProjectConfig{});
}

TEST(Config, PartialOverrideKeepsOtherDefaults) {
  const ProjectConfig c = parse_config("synthesis:\n  gamma_exponent: [-0.1, 0.2]\n");
  ProjectConfig expected;
  expected.synthesis.gamma_exponent = {-0.1, 0.2};
  EXPECT_EQ(c, expected);
}

TEST(Config, TopLevelKeysAreAccepted) {
  const ProjectConfig c = parse_config("steps: 12\nsvf_steps: 3\nhead: dice\nfilters: [4, 8, 16]\n");
  EXPECT_EQ(c.train.steps, 12);
  EXPECT_EQ(c.synthesis.svf_steps, 3);
  EXPECT_EQ(c.train.network.head, Head::dice);
  EXPECT_EQ(c.train.network.filters, (std::vector<int>{4, 8, 16}));
}

TEST(Config, ErrorCodes) {
  EXPECT_EQ(code_of("synthesis:\n  affine_rotation_deg: [45, 0]\n"), Errc::config_inverted_range);
  EXPECT_EQ(code_of("synthesis:\n  no_such_key: 1\n"), Errc::config_unknown_key);
  EXPECT_EQ(code_of("bogus: 1\n"), Errc::config_unknown_key);
  EXPECT_EQ(code_of("synthesis: [1, 2\n"), Errc::config_parse);
  EXPECT_EQ(code_of("train:\n  steps: many\n"), Errc::config_parse);
  EXPECT_EQ(code_of("synthesis:\n  gamma_exponent: [0.1]\n"), Errc::config_parse);
}

TEST(Config, SaveLoadIsIdempotent) {
  ProjectConfig c;
  c.synthesis.gamma_exponent = {-0.3, 0.1};
  c.synthesis.downsample_probability = 0.1 + 0.2;  // not representable in short decimal
  c.synthesis.brain_labels = {1, 7};
  c.train.learning_rate = 3e-5;
  c.train.checkpoint_path = "models/a b.ckpt";
  c.train.network.head = Head::dice;
  const fs::path dir = fs::temp_directory_path() / "corticarve_test_config";
  fs::create_directories(dir);
  save_config(c, dir / "a.yaml");
  const ProjectConfig once = load_config(dir / "a.yaml");
  EXPECT_EQ(once, c);
  save_config(once, dir / "b.yaml");
  EXPECT_EQ(read_file(dir / "a.yaml"), read_file(dir / "b.yaml"));
}
