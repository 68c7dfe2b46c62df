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

#include <filesystem>

#include "uniview/nn/tensor.hpp"

namespace uniview::nn {

/// "UVCK0001", uint32 count, then per parameter in sorted name order:
/// uint32 name length + name bytes, uint32 rank, rank x uint64 extents, float64 values.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);

/// Reads every parameter in the file.
ParamStore read_checkpoint(const std::filesystem::path& path);

/// Overwrites parameters of `store` from the file. With `strict`, every stored parameter must
/// appear in the file; returns the number of parameters loaded.
int load_checkpoint(const std::filesystem::path& path, ParamStore& store, bool strict = true);

}  // namespace uniview::nn
