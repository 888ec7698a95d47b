// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout:
//
//   ANTICIPATE-CHECKPOINT v1\n
//   architecture <tag>\n
//   vocab_hash <16 hex digits>\n
//   config <key> <value>\n        (zero or more, sorted by key)
//   block <name> <rank> <d0> ...\n (one per parameter array, in model order)
//   data\n
//   <each block's values as little-endian IEEE-754 float64, in block order>
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "anticipate/tensor.hpp"

namespace anticipate {

inline constexpr const char* kCheckpointMagic = "ANTICIPATE-CHECKPOINT v1";

struct Checkpoint {
  std::string architecture;
  std::uint64_t vocab_hash = 0;
  std::map<std::string, std::string> config;
  std::vector<std::pair<std::string, Tensor>> blocks;

  const std::string& config_value(const std::string& key) const;
  double config_double(const std::string& key) const;
  std::uint64_t config_uint(const std::string& key) const;
  const Tensor& block(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& file, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& file);

/// Round-trippable text form of a double.
std::string format_double(double v);

}  // namespace anticipate
