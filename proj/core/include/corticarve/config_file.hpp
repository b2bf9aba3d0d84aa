#pragma once

#include <filesystem>
#include <string>

#include "corticarve/synthesis_config.hpp"
#include "corticarve/train.hpp"

namespace corticarve {

struct ProjectConfig {
  SynthesisConfig synthesis;
  TrainConfig train;

  bool operator==(const ProjectConfig&) const = default;
};

/// YAML document with optional `synthesis:` and `train:` mappings. Keys may
/// also appear at the top level, since the two key sets are disjoint. Missing
/// keys keep their defaults; unknown keys throw Errc::config_unknown_key,
/// syntax errors Errc::config_parse, and lo > hi ranges
/// Errc::config_inverted_range.
ProjectConfig parse_config(const std::string& text);
ProjectConfig load_config(const std::filesystem::path& path);

/// Emits every key, so that parse_config(dump_config(c)) == c.
std::string dump_config(const ProjectConfig& cfg);
void save_config(const ProjectConfig& cfg, const std::filesystem::path& path);

}  // namespace corticarve
