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

#include "uniview/nn/checkpoint.hpp"

#include <fstream>

#include "uniview/binary_io.hpp"

namespace uniview::nn {

using namespace uniview::binary;

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("UVCK0001", 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [name, t] : store.params()) {
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (Index e : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
    put_array(out, t.value.data(), static_cast<std::size_t>(t.value.size()));
  }
  if (!out) throw IoError("write failed for " + path.string());
}

ParamStore read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  expect_magic(in, "UVCK0001");
  ParamStore store;
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, 4096);
    const auto rank = get<std::uint32_t>(in);
    if (rank == 0 || rank > 8) throw IoError("checkpoint rank out of range for " + name);
    Shape shape(rank);
    for (auto& e : shape) e = static_cast<Index>(get<std::uint64_t>(in));
    Tensor& t = store.add(name, shape);
    get_array(in, t.value.data(), static_cast<std::size_t>(t.value.size()));
  }
  return store;
}

int load_checkpoint(const std::filesystem::path& path, ParamStore& store, bool strict) {
  const ParamStore file = read_checkpoint(path);
  if (strict)
    for (const auto& [name, t] : store.params())
      if (!file.contains(name)) throw IoError("checkpoint lacks parameter " + name);
  return store.copy_matching(file);
}

}  // namespace uniview::nn
