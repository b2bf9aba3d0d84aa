#include "corticarve/io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>

#include "json.hpp"

namespace corticarve {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(DataType type) {
  switch (type) {
    case DataType::uint8: return "uint8";
    case DataType::int16: return "int16";
    case DataType::float32: return "float32";
  }
  return "unknown";
}

DataType datatype_from_string(const std::string& name) {
  if (name == "uint8") return DataType::uint8;
  if (name == "int16") return DataType::int16;
  if (name == "float32") return DataType::float32;
  throw Error(Errc::unsupported_datatype, "unsupported datatype '" + name + "'");
}

namespace {

constexpr int kNiftiHeaderSize = 348;
constexpr int kNiftiVoxOffset = 352;
constexpr short kIntentLabel = 1002;

std::size_t bytes_per_voxel(DataType t) {
  switch (t) {
    case DataType::uint8: return 1;
    case DataType::int16: return 2;
    case DataType::float32: return 4;
  }
  return 0;
}

short nifti_code(DataType t) {
  switch (t) {
    case DataType::uint8: return 2;
    case DataType::int16: return 4;
    case DataType::float32: return 16;
  }
  return 0;
}

DataType from_nifti_code(short code) {
  switch (code) {
    case 2: return DataType::uint8;
    case 4: return DataType::int16;
    case 16: return DataType::float32;
    default: throw Error(Errc::unsupported_datatype, "unsupported NIfTI datatype code " + std::to_string(code));
  }
}

template <class T>
void put_le(std::string& buf, std::size_t off, T value) {
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) buf[off + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
}

template <class T>
T get_le(std::string_view buf, std::size_t off) {
  using U = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                               std::conditional_t<sizeof(T) == 2, std::uint16_t,
                                                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) {
    bits |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(buf[off + b])) << (8 * b));
  }
  return std::bit_cast<T>(bits);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

enum class Container { nifti, nifti_gz, raw };

Container container_of(const fs::path& path) {
  const std::string name = path.filename().string();
  if (ends_with(name, ".nii")) return Container::nifti;
  if (ends_with(name, ".nii.gz")) return Container::nifti_gz;
  if (ends_with(name, ".raw") || ends_with(name, ".json")) return Container::raw;
  throw Error(Errc::unsupported_format, "unrecognized volume extension: " + path.string());
}

fs::path raw_payload_path(const fs::path& path) {
  fs::path p = path;
  return p.replace_extension(".raw");
}

fs::path raw_sidecar_path(const fs::path& path) {
  fs::path p = path;
  return p.replace_extension(".json");
}

/// Reads a whole file, transparently inflating gzip content.
std::string read_maybe_gz(const fs::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw Error(Errc::io_failure, "cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int n = 0;
  while ((n = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
  const bool failed = n < 0;
  gzclose(f);
  if (failed) throw Error(Errc::truncated_payload, "corrupt compressed stream in " + path.string());
  return out;
}

std::string gzip_bytes(std::string_view raw) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(Errc::io_failure, "deflateInit2 failed");
  }
  std::string out(deflateBound(&zs, static_cast<uLong>(raw.size())) + 64, '\0');
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::io_failure, "gzip compression failed");
  out.resize(zs.total_out);
  return out;
}

/// Encodes voxel values; integral targets must be in range after rounding.
template <class T, class Tag>
std::string encode_payload(const Volume<T, Tag>& vol, DataType type) {
  const std::size_t bpv = bytes_per_voxel(type);
  std::string buf(vol.size() * bpv, '\0');
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const double v = static_cast<double>(vol[i]);
    if (!std::isfinite(v)) throw Error(Errc::non_finite, "cannot write non-finite voxel values");
    switch (type) {
      case DataType::uint8: {
        const double r = std::round(v);
        if (r < 0.0 || r > 255.0) throw Error(Errc::out_of_range_cast, "value out of range for uint8");
        buf[i] = static_cast<char>(static_cast<std::uint8_t>(r));
        break;
      }
      case DataType::int16: {
        const double r = std::round(v);
        if (r < -32768.0 || r > 32767.0) throw Error(Errc::out_of_range_cast, "value out of range for int16");
        put_le<std::int16_t>(buf, i * 2, static_cast<std::int16_t>(r));
        break;
      }
      case DataType::float32: {
        const double lim = std::numeric_limits<float>::max();
        if (std::abs(v) > lim) throw Error(Errc::out_of_range_cast, "value out of range for float32");
        put_le<float>(buf, i * 4, static_cast<float>(v));
        break;
      }
    }
  }
  return buf;
}

double decode_voxel(std::string_view payload, std::size_t i, DataType type) {
  switch (type) {
    case DataType::uint8: return static_cast<unsigned char>(payload[i]);
    case DataType::int16: return get_le<std::int16_t>(payload, i * 2);
    case DataType::float32: return get_le<float>(payload, i * 4);
  }
  return 0.0;
}

std::string nifti_header(const Grid& g, DataType type, bool labels) {
  std::string h(kNiftiVoxOffset, '\0');
  put_le<std::int32_t>(h, 0, kNiftiHeaderSize);
  put_le<std::int16_t>(h, 40, 3);
  for (int a = 0; a < 3; ++a) put_le<std::int16_t>(h, 42 + 2 * a, static_cast<std::int16_t>(g.dims[a]));
  for (int a = 3; a < 7; ++a) put_le<std::int16_t>(h, 42 + 2 * a, 1);
  put_le<std::int16_t>(h, 68, labels ? kIntentLabel : 0);
  put_le<std::int16_t>(h, 70, nifti_code(type));
  put_le<std::int16_t>(h, 72, static_cast<std::int16_t>(8 * bytes_per_voxel(type)));
  put_le<float>(h, 76, 1.0f);
  for (int a = 0; a < 3; ++a) put_le<float>(h, 80 + 4 * a, static_cast<float>(g.spacing[a]));
  put_le<float>(h, 108, static_cast<float>(kNiftiVoxOffset));
  put_le<float>(h, 112, 1.0f);
  put_le<float>(h, 116, 0.0f);
  h[123] = 2;  // xyzt_units: mm
  put_le<std::int16_t>(h, 252, 0);
  put_le<std::int16_t>(h, 254, 1);  // sform_code: scanner
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) put_le<float>(h, 280 + 16 * r + 4 * c, static_cast<float>(g.affine(r, c)));
  }
  std::memcpy(h.data() + 344, "n+1\0", 4);
  return h;
}

struct ParsedNifti {
  VolumeHeader header;
  std::string_view payload;
};

ParsedNifti parse_nifti(std::string_view bytes) {
  if (bytes.size() < kNiftiHeaderSize) throw Error(Errc::truncated_payload, "NIfTI header truncated");
  if (std::memcmp(bytes.data() + 344, "ni1\0", 4) == 0) {
    throw Error(Errc::unsupported_format, "detached NIfTI header/image pairs (ni1) are not supported");
  }
  if (std::memcmp(bytes.data() + 344, "n+1\0", 4) != 0) throw Error(Errc::bad_magic, "bad NIfTI magic");
  if (get_le<std::int32_t>(bytes, 0) != kNiftiHeaderSize) {
    throw Error(Errc::unsupported_format, "NIfTI sizeof_hdr is not 348 (big-endian or NIfTI-2?)");
  }
  VolumeHeader vh;
  const auto ndim = get_le<std::int16_t>(bytes, 40);
  if (ndim < 1 || ndim > 7) throw Error(Errc::unsupported_format, "invalid NIfTI dim[0]");
  Dims dims{1, 1, 1};
  for (int a = 0; a < std::min<int>(3, ndim); ++a) dims[a] = get_le<std::int16_t>(bytes, 42 + 2 * a);
  for (int a = 3; a < ndim; ++a) {
    if (get_le<std::int16_t>(bytes, 42 + 2 * a) > 1) {
      throw Error(Errc::unsupported_format, "only 3D NIfTI volumes are supported");
    }
  }
  vh.datatype = from_nifti_code(get_le<std::int16_t>(bytes, 70));
  vh.labels = get_le<std::int16_t>(bytes, 68) == kIntentLabel && vh.datatype != DataType::float32;

  Vec3 spacing;
  for (int a = 0; a < 3; ++a) {
    const double p = std::abs(get_le<float>(bytes, 80 + 4 * a));
    spacing[a] = p > 0.0 ? p : 1.0;
  }
  Affine aff = Affine::Identity();
  if (get_le<std::int16_t>(bytes, 254) > 0) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) aff(r, c) = get_le<float>(bytes, 280 + 16 * r + 4 * c);
    }
  } else {
    // No sform: axis-aligned fallback from pixdim (plus qoffset when a qform is present).
    for (int a = 0; a < 3; ++a) aff(a, a) = spacing[a];
    if (get_le<std::int16_t>(bytes, 252) > 0) {
      for (int a = 0; a < 3; ++a) aff(a, 3) = get_le<float>(bytes, 268 + 4 * a);
    }
  }
  vh.grid.dims = dims;
  vh.grid.spacing = spacing;
  vh.grid.affine = aff;
  vh.grid.validate();

  const float slope = get_le<float>(bytes, 112);
  const float inter = get_le<float>(bytes, 116);
  if (slope != 0.0f && std::isfinite(slope) && std::isfinite(inter)) {
    vh.scl_slope = slope;
    vh.scl_inter = inter;
  }

  const double offset = get_le<float>(bytes, 108);
  const auto vox_offset = static_cast<std::size_t>(std::max(offset, static_cast<double>(kNiftiVoxOffset)));
  const std::size_t need = vh.grid.size() * bytes_per_voxel(vh.datatype);
  if (bytes.size() < vox_offset + need) throw Error(Errc::truncated_payload, "NIfTI payload truncated");
  return {vh, bytes.substr(vox_offset, need)};
}

json grid_to_json(const Grid& g) {
  json affine = json::array();
  for (int r = 0; r < 4; ++r) affine.push_back({g.affine(r, 0), g.affine(r, 1), g.affine(r, 2), g.affine(r, 3)});
  return {{"dims", {g.dims[0], g.dims[1], g.dims[2]}},
          {"spacing", {g.spacing[0], g.spacing[1], g.spacing[2]}},
          {"affine", affine}};
}

VolumeHeader parse_sidecar(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::bad_magic, std::string("unreadable raw sidecar: ") + e.what());
  }
  if (j.value("format", "") != "corticarve-raw") throw Error(Errc::bad_magic, "sidecar is not a corticarve-raw header");
  VolumeHeader vh;
  try {
    for (int a = 0; a < 3; ++a) {
      vh.grid.dims[a] = j.at("dims").at(a).get<int>();
      vh.grid.spacing[a] = j.at("spacing").at(a).get<double>();
    }
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) vh.grid.affine(r, c) = j.at("affine").at(r).at(c).get<double>();
    }
    vh.datatype = datatype_from_string(j.at("datatype").get<std::string>());
    vh.little_endian = j.value("endian", "little") == "little";
    vh.labels = j.value("labels", false) && vh.datatype != DataType::float32;
    vh.scl_slope = j.value("scl_slope", 1.0);
    vh.scl_inter = j.value("scl_inter", 0.0);
  } catch (const json::exception& e) {
    throw Error(Errc::bad_magic, std::string("malformed raw sidecar: ") + e.what());
  }
  if (!vh.little_endian) throw Error(Errc::unsupported_format, "big-endian raw payloads are not supported");
  vh.grid.validate();
  return vh;
}

struct Loaded {
  VolumeHeader header;
  std::string storage;
  std::string_view payload;
};

Loaded load(const fs::path& path) {
  Loaded out;
  const Container kind = container_of(path);
  if (kind == Container::raw) {
    out.header = parse_sidecar(read_file(raw_sidecar_path(path)));
    out.storage = read_file(raw_payload_path(path));
    const std::size_t need = out.header.grid.size() * bytes_per_voxel(out.header.datatype);
    if (out.storage.size() < need) throw Error(Errc::truncated_payload, "raw payload truncated");
    out.payload = std::string_view(out.storage).substr(0, need);
    return out;
  }
  out.storage = read_maybe_gz(path);
  ParsedNifti parsed = parse_nifti(out.storage);
  out.header = parsed.header;
  out.payload = parsed.payload;
  return out;
}

ScalarVolume decode_scalar(const Loaded& l) {
  ScalarVolume vol(l.header.grid);
  const bool scaled = l.header.scl_slope != 1.0 || l.header.scl_inter != 0.0;
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const double v = decode_voxel(l.payload, i, l.header.datatype);
    vol[i] = scaled ? v * l.header.scl_slope + l.header.scl_inter : v;
  }
  return vol;
}

LabelVolume decode_labels(const Loaded& l) {
  if (l.header.datatype == DataType::float32) {
    throw Error(Errc::unsupported_datatype, "label maps require an integral datatype");
  }
  LabelVolume vol(l.header.grid);
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const double v = decode_voxel(l.payload, i, l.header.datatype);
    if (v < 0.0) throw Error(Errc::out_of_range_cast, "negative label id");
    vol[i] = static_cast<std::uint32_t>(v);
  }
  return vol;
}

template <class T, class Tag>
void write_any(const Volume<T, Tag>& vol, const fs::path& path, DataType type, bool labels) {
  vol.grid.validate();
  const std::string payload = encode_payload(vol, type);
  const Container kind = container_of(path);
  if (kind == Container::raw) {
    json j = grid_to_json(vol.grid);
    j["format"] = "corticarve-raw";
    j["version"] = 1;
    j["datatype"] = to_string(type);
    j["endian"] = "little";
    j["labels"] = labels;
    write_file_atomic(raw_payload_path(path), payload);
    write_file_atomic(raw_sidecar_path(path), j.dump(2) + "\n");
    return;
  }
  std::string bytes = nifti_header(vol.grid, type, labels) + payload;
  if (kind == Container::nifti_gz) bytes = gzip_bytes(bytes);
  write_file_atomic(path, bytes);
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::random_device rd;
  const fs::path tmp = dir / (".tmp-" + path.filename().string() + "-" + std::to_string(rd()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_failure, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(Errc::io_failure, "short write to " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::io_failure, "cannot rename into " + path.string());
  }
}

VolumeHeader read_header(const fs::path& path) { return load(path).header; }

AnyVolume read_volume(const fs::path& path) {
  const Loaded l = load(path);
  if (l.header.labels) return decode_labels(l);
  return decode_scalar(l);
}

ScalarVolume read_scalar_volume(const fs::path& path) { return decode_scalar(load(path)); }

LabelVolume read_label_volume(const fs::path& path) { return decode_labels(load(path)); }

BinaryMask read_mask(const fs::path& path) {
  const ScalarVolume v = decode_scalar(load(path));
  BinaryMask m(v.grid);
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = v[i] != 0.0 ? 1 : 0;
  return m;
}

void write_volume(const ScalarVolume& vol, const fs::path& path, DataType type) { write_any(vol, path, type, false); }

void write_volume(const LabelVolume& vol, const fs::path& path, DataType type) {
  if (type == DataType::float32) throw Error(Errc::unsupported_datatype, "label maps require an integral datatype");
  write_any(vol, path, type, true);
}

void write_volume(const BinaryMask& mask, const fs::path& path) { write_any(mask, path, DataType::uint8, false); }

void write_volume(const SdtVolume& sdt, const fs::path& path) { write_any(sdt, path, DataType::float32, false); }

}  // namespace corticarve
