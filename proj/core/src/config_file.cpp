#include "corticarve/config_file.hpp"

#include <yaml-cpp/yaml.h>

#include <functional>
#include <map>

#include "corticarve/io.hpp"

namespace corticarve {

namespace {

struct Binding {
  std::function<void(const YAML::Node&)> read;
  std::function<void(YAML::Emitter&)> write;
};

using Section = std::vector<std::pair<std::string, Binding>>;

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) throw Error(Errc::config_parse, "'" + key + "' must be a scalar");
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw Error(Errc::config_parse, "'" + key + "' has an invalid value '" + n.Scalar() + "'");
  }
}

template <class T>
std::vector<T> list(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) throw Error(Errc::config_parse, "'" + key + "' must be a list");
  std::vector<T> out;
  for (const auto& item : n) out.push_back(scalar<T>(item, key));
  return out;
}

template <class T>
Binding bind(const std::string& key, T& field) {
  return {[&field, key](const YAML::Node& n) { field = scalar<T>(n, key); },
          [&field](YAML::Emitter& e) { e << field; }};
}

template <class T>
Binding bind_list(const std::string& key, std::vector<T>& field) {
  return {[&field, key](const YAML::Node& n) { field = list<T>(n, key); },
          [&field](YAML::Emitter& e) { e << YAML::Flow << field; }};
}

Binding bind_range(const std::string& key, Range& field) {
  return {[&field, key](const YAML::Node& n) {
            const auto v = list<double>(n, key);
            if (v.size() != 2) throw Error(Errc::config_parse, "'" + key + "' must be a [lo, hi] pair");
            if (v[0] > v[1]) throw Error(Errc::config_inverted_range, "inverted range for " + key);
            field = {v[0], v[1]};
          },
          [&field](YAML::Emitter& e) { e << YAML::Flow << std::vector<double>{field.lo, field.hi}; }};
}

Binding bind_dims(const std::string& key, Dims& field) {
  return {[&field, key](const YAML::Node& n) {
            const auto v = list<int>(n, key);
            if (v.size() != 3) throw Error(Errc::config_parse, "'" + key + "' must have three entries");
            field = {v[0], v[1], v[2]};
          },
          [&field](YAML::Emitter& e) { e << YAML::Flow << std::vector<int>(field.begin(), field.end()); }};
}

Section synthesis_keys(SynthesisConfig& s) {
  return {
      {"affine_translation_mm", bind_range("affine_translation_mm", s.affine_translation_mm)},
      {"affine_rotation_deg", bind_range("affine_rotation_deg", s.affine_rotation_deg)},
      {"affine_scaling_pct", bind_range("affine_scaling_pct", s.affine_scaling_pct)},
      {"deformation_voxel_length_mm", bind_range("deformation_voxel_length_mm", s.deformation_voxel_length_mm)},
      {"deformation_sd_mm", bind_range("deformation_sd_mm", s.deformation_sd_mm)},
      {"label_intensity_mean", bind_range("label_intensity_mean", s.label_intensity_mean)},
      {"label_intensity_sd", bind_range("label_intensity_sd", s.label_intensity_sd)},
      {"bias_field_voxel_length_mm", bind_range("bias_field_voxel_length_mm", s.bias_field_voxel_length_mm)},
      {"bias_field_sd", bind_range("bias_field_sd", s.bias_field_sd)},
      {"fov_cropping_mm", bind_range("fov_cropping_mm", s.fov_cropping_mm)},
      {"gamma_exponent", bind_range("gamma_exponent", s.gamma_exponent)},
      {"downsample_factors", bind_list("downsample_factors", s.downsample_factors)},
      {"downsample_probability", bind("downsample_probability", s.downsample_probability)},
      {"svf_steps", bind("svf_steps", s.svf_steps)},
      {"brain_labels", bind_list("brain_labels", s.brain_labels)},
      {"sdt_band_mm", bind("sdt_band_mm", s.sdt_band_mm)},
      {"sdt_background_weight", bind("sdt_background_weight", s.sdt_background_weight)},
  };
}

Section train_keys(TrainConfig& t) {
  Binding head{[&t](const YAML::Node& n) { t.network.head = head_from_string(scalar<std::string>(n, "head")); },
               [&t](YAML::Emitter& e) { e << to_string(t.network.head); }};
  Binding path{[&t](const YAML::Node& n) { t.checkpoint_path = scalar<std::string>(n, "checkpoint_path"); },
               [&t](YAML::Emitter& e) { e << YAML::DoubleQuoted << t.checkpoint_path.string(); }};
  return {
      {"steps", bind("steps", t.steps)},
      {"learning_rate", bind("learning_rate", t.learning_rate)},
      {"val_interval", bind("val_interval", t.val_interval)},
      {"val_samples", bind("val_samples", t.val_samples)},
      {"patience", bind("patience", t.patience)},
      {"seed", bind("seed", t.seed)},
      {"checkpoint_interval", bind("checkpoint_interval", t.checkpoint_interval)},
      {"checkpoint_path", std::move(path)},
      {"levels", bind("levels", t.network.levels)},
      {"filters", bind_list("filters", t.network.filters)},
      {"convs_per_level", bind("convs_per_level", t.network.convs_per_level)},
      {"leaky_slope", bind("leaky_slope", t.network.leaky_slope)},
      {"head", std::move(head)},
      {"input_dims", bind_dims("input_dims", t.network.input_dims)},
      {"voxel_size_mm", bind("voxel_size_mm", t.network.voxel_size_mm)},
  };
}

const Binding* find(const Section& section, const std::string& key) {
  for (const auto& [name, b] : section) {
    if (name == key) return &b;
  }
  return nullptr;
}

}  // namespace

ProjectConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(Errc::config_parse, std::string("malformed config: ") + e.what());
  }
  ProjectConfig cfg;
  if (root.IsNull()) return cfg;
  if (!root.IsMap()) throw Error(Errc::config_parse, "config must be a mapping of keys to values");

  const Section synth = synthesis_keys(cfg.synthesis);
  const Section train = train_keys(cfg.train);
  const auto apply = [](const Section& section, const std::string& key, const YAML::Node& value) {
    const Binding* b = find(section, key);
    if (!b) return false;
    b->read(value);
    return true;
  };

  for (const auto& entry : root) {
    const std::string key = entry.first.as<std::string>();
    const YAML::Node& value = entry.second;
    if (key == "synthesis" || key == "train") {
      if (value.IsNull()) continue;
      if (!value.IsMap()) throw Error(Errc::config_parse, "'" + key + "' must be a mapping");
      const Section& section = key == "synthesis" ? synth : train;
      for (const auto& inner : value) {
        const std::string name = inner.first.as<std::string>();
        if (!apply(section, name, inner.second)) {
          throw Error(Errc::config_unknown_key, "unknown key '" + key + "." + name + "'");
        }
      }
      continue;
    }
    if (!apply(synth, key, value) && !apply(train, key, value)) {
      throw Error(Errc::config_unknown_key, "unknown key '" + key + "'");
    }
  }
  cfg.synthesis.validate();
  cfg.train.validate();
  return cfg;
}

ProjectConfig load_config(const std::filesystem::path& path) { return parse_config(read_file(path)); }

std::string dump_config(const ProjectConfig& in) {
  ProjectConfig cfg = in;
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  for (const auto& [title, section] : {std::pair{"synthesis", synthesis_keys(cfg.synthesis)},
                                       std::pair{"train", train_keys(cfg.train)}}) {
    e << YAML::Key << title << YAML::Value << YAML::BeginMap;
    for (const auto& [name, b] : section) {
      e << YAML::Key << name << YAML::Value;
      b.write(e);
    }
    e << YAML::EndMap;
  }
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

void save_config(const ProjectConfig& cfg, const std::filesystem::path& path) {
  write_file_atomic(path, dump_config(cfg));
}

}  // namespace corticarve
