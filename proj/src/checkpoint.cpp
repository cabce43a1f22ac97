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


#include "rulstm/checkpoint.hpp"

#include "binary.hpp"
#include "rulstm/errors.hpp"

namespace rulstm {

namespace {

using binary::put;
using binary::put_f64;

constexpr char kMagic[4] = {'R', 'U', 'C', 'K'};

}  // namespace

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : blocks) {
    if (n == name) return &m;
  }
  return nullptr;
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.blocks.size()));
  for (const auto& [name, m] : ckpt.blocks) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
    for (double v : m.data()) put_f64(out, v);
  }
  const std::string meta = ckpt.metadata.dump();
  put<std::uint64_t>(out, meta.size());
  out += meta;
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  binary::Reader in(bytes, "checkpoint");
  if (in.get_string(4) != std::string(kMagic, 4)) throw IoError("checkpoint: bad magic");
  const auto version = in.get<std::uint32_t>();
  if (version != Checkpoint::kVersion) {
    throw IoError("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t b = 0; b < count; ++b) {
    std::string name = in.get_string(in.get<std::uint32_t>());
    const auto rows = in.get<std::uint32_t>();
    const auto cols = in.get<std::uint32_t>();
    Matrix m(rows, cols);
    for (double& v : m.data()) v = in.get_f64();
    ckpt.blocks.emplace_back(std::move(name), std::move(m));
  }
  const auto meta_len = in.get<std::uint64_t>();
  const std::string meta = in.get_string(meta_len);
  try {
    ckpt.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad metadata: ") + e.what());
  }
  if (!in.done()) throw IoError("checkpoint: trailing bytes");
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  binary::write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(binary::read_file(path));
}

}  // namespace rulstm
