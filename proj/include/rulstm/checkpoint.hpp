// Copyright 2026 The rulstm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#ifndef RULSTM_CHECKPOINT_HPP_
#define RULSTM_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rulstm/tensor.hpp"

namespace rulstm {

// RUCK checkpoint container, all integers little-endian:
//
//   char[4]  magic "RUCK"
//   u32      format version (1)
//   u32      block count
//   per block:
//     u32    name length, then the UTF-8 name bytes
//     u32    rows
//     u32    cols
//     f64    rows * cols values, row-major
//   u64      metadata length, then that many bytes of UTF-8 JSON
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<std::pair<std::string, Matrix>> blocks;
  nlohmann::json metadata = nlohmann::json::object();

  const Matrix* find(const std::string& name) const;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace rulstm

#endif  // RULSTM_CHECKPOINT_HPP_
