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

#include "uniview/env.hpp"
#include "uniview/voxel.hpp"

namespace uniview {

/// Episode record, little-endian:
///   "UVDS0001"
///   int32 N, H, W, T, instruction_id, flags (bit 0 = success)
///   uint32 byte length + rig JSON text
///   per frame: float32 rgb[N][H][W][3], then float32 depth[N][H][W]
///   float32 actions[T-1][7] (dpos xyz, drot xyz, gripper 0/1)
///   uint8 gripper[T-1] (1 = close)
void write_uvds(const std::filesystem::path& path, const Episode& episode);
Episode read_uvds(const std::filesystem::path& path);

/// Ground-truth voxel sidecar, little-endian:
///   "UVVX0001", int32 L, B, P, float64 origin[3], float64 cell_size[3],
///   uint8 occ[L][B][P], float32 rgb[L][B][P][3]
void write_voxels(const std::filesystem::path& path, const VoxelGrid& voxels);
VoxelGrid read_voxels(const std::filesystem::path& path);

}  // namespace uniview
