#pragma once
// Binary checkpoints.
//
// Layout (all integers little-endian):
//   "XGAN" u32 version=1 u64 step u32 record_count
//   record: u32 name_len, name bytes, u8 dtype (1 = f32, 2 = f64),
//           u32 rank, rank x u64 extents, payload
//   u32 alias_count, then per alias: u32 len, name, u32 len, slot id
//   u32 config_len, config JSON
// Each slot contributes "<id>", "<id>@adam_m" and "<id>@adam_v" records.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "xgan/nn/param_store.hpp"

namespace xgan {

struct CheckpointData {
  std::uint64_t step = 0;
  std::map<std::string, Tensor<float>> records;
  std::map<std::string, std::string> aliases;
  std::string config_json;
};

/// Writes atomically (temp file + rename). Throws IoError with the path.
void save_checkpoint(const std::filesystem::path& path, const ParameterStore<float>& store, std::uint64_t step,
                     const std::string& config_json);

/// Throws CheckpointError for missing, truncated or malformed files.
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Copies values and Adam moments into a store built from the same
/// configuration. Throws CheckpointError on any missing slot, shape or
/// alias mismatch.
void restore_store(ParameterStore<float>& store, const CheckpointData& data);

}  // namespace xgan
