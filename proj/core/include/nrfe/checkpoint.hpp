// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container shared by encoders, teacher, student and the
// distillation-target cache.
//
// Layout (all integers little-endian):
//   8 bytes   magic "NRFECKPT"
//   u32       container version (currently 1)
//   u64       header length in bytes
//   header    UTF-8 JSON object:
//               {"kind": str, "meta": {...}, "tensors": [{"name", "rows", "cols"}, ...]}
//   payload   for each listed tensor, rows*cols IEEE-754 doubles, row-major
#pragma once

#include "nrfe/autodiff.hpp"
#include "nrfe/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nrfe {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointData {
  std::string kind;
  /// JSON text of the "meta" object.
  std::string meta_json;
  std::vector<std::pair<std::string, ad::Matrix>> tensors;

  const ad::Matrix* find(std::string_view name) const;
};

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Snapshot of the current values of a parameter list.
std::vector<std::pair<std::string, ad::Matrix>> snapshot(const nn::ParameterList& params);

/// Loads every parameter of `params` from the tensor of the same name.
/// Throws FormatError on a missing tensor or shape mismatch.
void load_parameters(const CheckpointData& data, const nn::ParameterList& params);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ull);
std::uint64_t file_hash(const std::filesystem::path& path);
std::string hex64(std::uint64_t value);

}  // namespace nrfe
