#pragma once

#include <string>

#include "erc/model.hpp"

namespace erc {

// Single-file binary checkpoint:
//   magic "ERCCKPT\0" | u32 version | u32 json_len | json header
//   | u32 tensor_count | per tensor: u32 name_len, name, u32 rank,
//     u32 dims[rank], raw little-endian f64 values
//   | u64 fnv1a checksum of everything before it
// The JSON header embeds the ModelConfig and the label/speaker/word
// vocabularies, so a checkpoint is self-describing. Round trips are
// bit-exact; newer format versions and corrupt/truncated files are refused.

constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);

} // namespace erc
