#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <variant>

#include "corticarve/volume.hpp"

namespace corticarve {

enum class DataType { uint8, int16, float32 };

std::string to_string(DataType type);
DataType datatype_from_string(const std::string& name);

struct VolumeHeader {
  Grid grid;
  DataType datatype = DataType::float32;
  bool little_endian = true;
  /// Integral payload that should load as a label map.
  bool labels = false;
  double scl_slope = 1.0;
  double scl_inter = 0.0;
};

using AnyVolume = std::variant<ScalarVolume, LabelVolume>;

/// Supported containers, chosen by extension:
///  - single-file NIfTI-1 (".nii", ".nii.gz"): 348-byte header, magic "n+1",
///    sform orientation, uint8/int16/float32 payloads, scl_slope/scl_inter
///    applied to scalar loads;
///  - raw little-endian payload (".raw") with a JSON sidecar (".json").
/// Integral volumes flagged as labels (NIfTI intent 1002, sidecar
/// `"labels": true`) load as LabelVolume, everything else as ScalarVolume.
AnyVolume read_volume(const std::filesystem::path& path);
VolumeHeader read_header(const std::filesystem::path& path);

ScalarVolume read_scalar_volume(const std::filesystem::path& path);
/// Requires an integral datatype; no label flag needed.
LabelVolume read_label_volume(const std::filesystem::path& path);
/// Non-zero voxels are true.
BinaryMask read_mask(const std::filesystem::path& path);

void write_volume(const ScalarVolume& vol, const std::filesystem::path& path, DataType type = DataType::float32);
void write_volume(const LabelVolume& vol, const std::filesystem::path& path, DataType type = DataType::int16);
void write_volume(const BinaryMask& mask, const std::filesystem::path& path);
void write_volume(const SdtVolume& sdt, const std::filesystem::path& path);

/// Replaces `path` with `bytes` via a sibling temporary file and rename, so a
/// failed write never leaves a truncated file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace corticarve
