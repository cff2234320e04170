#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "mnmt/tensor.hpp"

namespace mnmt {

// Binary layout, all integers little-endian:
//   "MNMT01" | u32 version | u32 n + config text | u32 tensor count |
//   per tensor: u32 n + name | u32 rank | u32 dims[rank] | f32 data[] |
//   u64 FNV-1a of every preceding byte
inline constexpr std::string_view kCheckpointMagic = "MNMT01";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string config;  // key=value lines
  TensorMap tensors;   // widened back to float64
};

std::uint64_t fnv1a64(std::string_view bytes);

std::string serialize_checkpoint(const std::string& config, const TensorMap& tensors);
/// Throws CorruptionError on a bad magic, version, layout or checksum.
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const std::string& config,
                     const TensorMap& tensors);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Checksum stored in the trailer of a checkpoint file.
std::uint64_t checkpoint_checksum(const std::filesystem::path& path);

/// Parameters rebuilt from checkpoint tensors (fresh Adam state).
ParamSet to_param_set(const Checkpoint& checkpoint);

}  // namespace mnmt
