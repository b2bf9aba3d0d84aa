#pragma once

#include <filesystem>

#include "corticarve/nnet.hpp"

namespace corticarve {

/// Versioned binary checkpoint: "CRVCKPT\0" magic, u32 format version, u32
/// JSON length + JSON config, u32 array count, then per array a u32 name
/// length + name, u32 rank + u32 dims, and little-endian float32 payload.
/// The byte layout is documented in docs/formats.md.
inline constexpr char kCheckpointMagic[8] = {'C', 'R', 'V', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const UNet<float>& model, const std::filesystem::path& path);
UNet<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace corticarve
