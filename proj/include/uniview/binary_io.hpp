// Copyright 2026 The UniView Authors
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

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "uniview/errors.hpp"

namespace uniview::binary {

static_assert(std::endian::native == std::endian::little,
              "record formats are little-endian; add byte swapping for this host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void put_array(std::ostream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(T) * count));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw IoError("truncated record");
  return value;
}

template <typename T>
void get_array(std::istream& in, T* data, std::size_t count) {
  if (!in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(sizeof(T) * count)))
    throw IoError("truncated record");
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::size_t max_len = 1u << 26) {
  const auto n = get<std::uint32_t>(in);
  if (n > max_len) throw IoError("string length out of range");
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), n)) throw IoError("truncated record");
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[9]) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0)
    throw IoError(std::string("bad magic, expected ") + magic);
}

}  // namespace uniview::binary
