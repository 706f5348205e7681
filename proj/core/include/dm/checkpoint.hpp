#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dm/tensor.hpp"

namespace dm::nn {

/// On-disk container for named tensors plus a JSON metadata block.
///
/// Byte layout (little-endian throughout):
///   "DMCK" | u32 version | u64 json_len | json bytes | u32 tensor_count |
///   { u32 name_len | name | u64 rows | u64 cols | rows*cols f64 } ... |
///   u32 crc32 of all preceding bytes
struct Checkpoint {
  nlohmann::json metadata;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

inline constexpr uint32_t kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);

/// Atomic write (temp file + rename).
void write_checkpoint_file(const std::filesystem::path& path,
                           const Checkpoint& ckpt);
Checkpoint read_checkpoint_file(const std::filesystem::path& path);

uint32_t crc32(std::string_view bytes);

}  // namespace dm::nn
