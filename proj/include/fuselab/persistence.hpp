#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fuselab/model.hpp"

namespace fuselab {

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Binary model file: "FUSELAB\0", u32 format version, u64 header length, a
/// JSON header (model config, config hash, vocabulary, label space,
/// parameter names and shapes), the parameters as little-endian f64 in
/// header order, and a CRC-32 of everything before it.
void save_model(const FusionModel& model, const std::filesystem::path& path);

// FormatError on a bad magic, version mismatch, checksum failure or a header
// that does not match the rebuilt model.
FusionModel load_model(const std::filesystem::path& path);

// Hex CRC-32 of the canonical model-config JSON.
std::string config_hash(const ModelConfig& config);

}  // namespace fuselab
