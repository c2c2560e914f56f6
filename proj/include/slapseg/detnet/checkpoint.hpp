#pragma once

#include <filesystem>

#include "slapseg/detnet/model.hpp"

namespace slapseg::det {

inline constexpr char kCheckpointMagic[8] = {'S', 'L', 'P', 'S', 'E', 'G', 'M', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary layout (little endian): magic, u32 version, config header, u32
/// tensor count, then per tensor a name, rank, dims and f64 values, and a
/// trailing SHA-256 of everything before it.
void save_model(const ModelParams& params, const std::filesystem::path& path);

/// Throws CorruptFileError on truncation or checksum mismatch, VersionError
/// on an unknown format version or when `expected` is given and the stored
/// anchor configuration differs from it.
ModelParams load_model(const std::filesystem::path& path, const AnchorConfig* expected = nullptr);

}  // namespace slapseg::det
