#include "corticarve/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "corticarve/io.hpp"
#include "json.hpp"

namespace corticarve {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw Error(Errc::truncated_payload, "checkpoint truncated");
    std::string_view s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    const std::string_view s = take(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[b])) << (8 * b);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

json config_to_json(const UNetConfig& c) {
  return {{"levels", c.levels},
          {"filters", c.filters},
          {"convs_per_level", c.convs_per_level},
          {"leaky_slope", c.leaky_slope},
          {"head", to_string(c.head)},
          {"input_dims", {c.input_dims[0], c.input_dims[1], c.input_dims[2]}},
          {"voxel_size_mm", c.voxel_size_mm}};
}

UNetConfig config_from_json(const json& j) {
  UNetConfig c;
  c.levels = j.at("levels").get<int>();
  c.filters = j.at("filters").get<std::vector<int>>();
  c.convs_per_level = j.at("convs_per_level").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.head = head_from_string(j.at("head").get<std::string>());
  for (int a = 0; a < 3; ++a) c.input_dims[a] = j.at("input_dims").at(a).get<int>();
  c.voxel_size_mm = j.at("voxel_size_mm").get<double>();
  c.validate();
  return c;
}

struct Array {
  std::vector<std::uint32_t> shape;
  std::span<const float> values;
};

void put_array(std::string& out, const std::string& name, const std::vector<std::uint32_t>& shape,
               std::span<const float> values) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (std::uint32_t d : shape) put_u32(out, d);
  for (float v : values) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

}  // namespace

void save_checkpoint(const UNet<float>& model, const fs::path& path) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  json meta = {{"network", config_to_json(model.config())}, {"adam_steps", model.adam_steps()}};
  const std::string text = meta.dump();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;

  const auto params = model.parameters();
  const bool has_adam = model.adam_m().size() == params.size() && model.adam_v().size() == params.size();
  put_u32(out, static_cast<std::uint32_t>(2 * model.layers().size() + (has_adam ? 2 : 0)));
  for (const ConvLayerInfo& layer : model.layers()) {
    const auto cout = static_cast<std::uint32_t>(layer.out_channels);
    const auto cin = static_cast<std::uint32_t>(layer.in_channels);
    put_array(out, layer.name + ".weight", {3, 3, 3, cout, cin}, params.subspan(layer.weight_offset, 27 * cout * cin));
    put_array(out, layer.name + ".bias", {cout}, params.subspan(layer.bias_offset, cout));
  }
  if (has_adam) {
    const auto n = static_cast<std::uint32_t>(params.size());
    put_array(out, "adam.m", {n}, model.adam_m());
    put_array(out, "adam.v", {n}, model.adam_v());
  }
  write_file_atomic(path, out);
}

UNet<float> load_checkpoint(const fs::path& path) {
  const std::string bytes = read_file(path);
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof kCheckpointMagic).data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    throw Error(Errc::bad_magic, "not a checkpoint file: " + path.string());
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw Error(Errc::unsupported_format, "unsupported checkpoint version " + std::to_string(version));
  }
  json meta;
  UNetConfig config;
  std::int64_t adam_steps = 0;
  try {
    meta = json::parse(r.take(r.u32()));
    config = config_from_json(meta.at("network"));
    adam_steps = meta.value("adam_steps", std::int64_t{0});
  } catch (const json::exception& e) {
    throw Error(Errc::bad_magic, std::string("malformed checkpoint metadata: ") + e.what());
  }

  std::map<std::string, std::pair<std::vector<std::uint32_t>, std::vector<float>>> arrays;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.take(r.u32()));
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw Error(Errc::unsupported_format, "implausible array rank in checkpoint");
    std::vector<std::uint32_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.u32();
      n *= d;
    }
    const std::string_view raw = r.take(4 * n);
    std::vector<float> values(n);
    for (std::size_t k = 0; k < n; ++k) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * k + b])) << (8 * b);
      values[k] = std::bit_cast<float>(bits);
    }
    arrays[name] = {std::move(shape), std::move(values)};
  }
  if (!r.done()) throw Error(Errc::unsupported_format, "trailing bytes after checkpoint arrays");

  UNet<float> model(config);
  std::span<float> params = model.mutable_parameters();
  auto fetch = [&](const std::string& name, const std::vector<std::uint32_t>& shape) -> const std::vector<float>& {
    const auto it = arrays.find(name);
    if (it == arrays.end()) throw Error(Errc::truncated_payload, "checkpoint is missing array " + name);
    if (it->second.first != shape) throw Error(Errc::unsupported_format, "shape mismatch for array " + name);
    return it->second.second;
  };
  for (const ConvLayerInfo& layer : model.layers()) {
    const auto cout = static_cast<std::uint32_t>(layer.out_channels);
    const auto cin = static_cast<std::uint32_t>(layer.in_channels);
    const auto& w = fetch(layer.name + ".weight", {3, 3, 3, cout, cin});
    std::copy(w.begin(), w.end(), params.begin() + static_cast<std::ptrdiff_t>(layer.weight_offset));
    const auto& b = fetch(layer.name + ".bias", {cout});
    std::copy(b.begin(), b.end(), params.begin() + static_cast<std::ptrdiff_t>(layer.bias_offset));
  }
  if (arrays.count("adam.m") && arrays.count("adam.v")) {
    const auto n = static_cast<std::uint32_t>(params.size());
    model.adam_m() = fetch("adam.m", {n});
    model.adam_v() = fetch("adam.v", {n});
    model.set_adam_steps(adam_steps);
  }
  return model;
}

}  // namespace corticarve
