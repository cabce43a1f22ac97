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


// Little-endian encoding helpers shared by the binary containers.

#ifndef RULSTM_SRC_BINARY_HPP_
#define RULSTM_SRC_BINARY_HPP_

#include <bit>
#include <cstring>
#include <filesystem>
#include <string>
#include <type_traits>
#include <utility>

#include "rulstm/errors.hpp"

namespace rulstm::binary {

template <class T>
T byteswap(T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

template <class T>
void put(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

inline void put_f64(std::string& out, double v) { put(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_f32(std::string& out, float v) { put(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  Reader(const std::string& bytes, std::string context)
      : bytes_(bytes), context_(std::move(context)) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    if constexpr (std::endian::native == std::endian::big) value = byteswap(value);
    return value;
  }

  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  float get_f32() { return std::bit_cast<float>(get<std::uint32_t>()); }

  std::string get_string(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  [[noreturn]] void fail(const std::string& what) const { throw IoError(context_ + ": " + what); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) fail("truncated data");
  }

  const std::string& bytes_;
  std::string context_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

}  // namespace rulstm::binary

#endif  // RULSTM_SRC_BINARY_HPP_
