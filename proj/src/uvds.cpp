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

#include "uniview/uvds.hpp"

#include <fstream>

#include "uniview/binary_io.hpp"
#include "uniview/rig_io.hpp"

namespace uniview {

using namespace binary;

void write_uvds(const std::filesystem::path& path, const Episode& episode) {
  const int n = static_cast<int>(episode.rig.size());
  if (episode.frames.empty()) throw ShapeError("episode has no frames");
  const int h = episode.rig.cameras.at(0).intrinsics.height;
  const int w = episode.rig.cameras.at(0).intrinsics.width;
  const int t = static_cast<int>(episode.frames.size());
  if (static_cast<int>(episode.actions.size()) != t - 1)
    throw ShapeError("episode must hold exactly frames-1 actions");
  for (const auto& cam : episode.rig.cameras)
    if (cam.intrinsics.width != w || cam.intrinsics.height != h)
      throw ShapeError("UVDS requires one image size across the rig");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("UVDS0001", 8);
  for (int v : {n, h, w, t, episode.instruction_id, episode.success ? 1 : 0}) put<std::int32_t>(out, v);
  put_string(out, rig_to_string(episode.rig));
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  for (const auto& frame : episode.frames) {
    if (static_cast<int>(frame.views.size()) != n) throw ShapeError("frame view count differs from rig");
    for (const auto& view : frame.views) {
      if (view.rgb.size() != pixels * 3) throw ShapeError("frame image size differs from rig");
      put_array(out, view.rgb.data(), view.rgb.size());
    }
    for (const auto& view : frame.views) put_array(out, view.depth.data(), view.depth.size());
  }
  for (const auto& a : episode.actions) {
    for (double v : a.pose()) put<float>(out, static_cast<float>(v));
    put<float>(out, a.close ? 1.0f : 0.0f);
  }
  for (const auto& a : episode.actions) put<std::uint8_t>(out, a.close ? 1 : 0);
  if (!out) throw IoError("write failed for " + path.string());
}

Episode read_uvds(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  expect_magic(in, "UVDS0001");
  const int n = get<std::int32_t>(in), h = get<std::int32_t>(in), w = get<std::int32_t>(in);
  const int t = get<std::int32_t>(in);
  Episode ep;
  ep.instruction_id = get<std::int32_t>(in);
  ep.success = (get<std::int32_t>(in) & 1) != 0;
  if (n <= 0 || h <= 0 || w <= 0 || t <= 0) throw IoError("UVDS header out of range");
  ep.rig = rig_from_string(get_string(in));
  if (static_cast<int>(ep.rig.size()) != n) throw IoError("UVDS rig size disagrees with header");
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  ep.frames.resize(t);
  for (int f = 0; f < t; ++f) {
    auto& frame = ep.frames[f];
    frame.t = f;
    frame.views.resize(n);
    for (auto& view : frame.views) {
      view.width = w;
      view.height = h;
      view.rgb.resize(pixels * 3);
      get_array(in, view.rgb.data(), view.rgb.size());
    }
    for (auto& view : frame.views) {
      view.depth.resize(pixels);
      get_array(in, view.depth.data(), view.depth.size());
    }
  }
  ep.actions.resize(t - 1);
  for (auto& a : ep.actions) {
    float v[7];
    get_array(in, v, 7);
    a.dpos = Vec3(v[0], v[1], v[2]);
    a.drot = Vec3(v[3], v[4], v[5]);
  }
  for (auto& a : ep.actions) a.close = get<std::uint8_t>(in) != 0;
  return ep;
}

void write_voxels(const std::filesystem::path& path, const VoxelGrid& voxels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("UVVX0001", 8);
  for (int d : voxels.grid.dims) put<std::int32_t>(out, d);
  for (int a = 0; a < 3; ++a) put<double>(out, voxels.grid.origin[a]);
  for (int a = 0; a < 3; ++a) put<double>(out, voxels.grid.cell_size[a]);
  for (Eigen::Index c = 0; c < voxels.occ.size(); ++c)
    put<std::uint8_t>(out, voxels.occ[c] >= 0.5 ? 1 : 0);
  for (Eigen::Index c = 0; c < voxels.occ.size(); ++c)
    for (int k = 0; k < 3; ++k) put<float>(out, static_cast<float>(voxels.rgb(c, k)));
  if (!out) throw IoError("write failed for " + path.string());
}

VoxelGrid read_voxels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  expect_magic(in, "UVVX0001");
  Grid grid;
  for (int& d : grid.dims) d = get<std::int32_t>(in);
  for (int a = 0; a < 3; ++a) grid.origin[a] = get<double>(in);
  for (int a = 0; a < 3; ++a) grid.cell_size[a] = get<double>(in);
  grid.validate();
  VoxelGrid vox(grid);
  for (int c = 0; c < grid.cell_count(); ++c) vox.occ[c] = get<std::uint8_t>(in) ? 1.0 : 0.0;
  for (int c = 0; c < grid.cell_count(); ++c)
    for (int k = 0; k < 3; ++k) vox.rgb(c, k) = get<float>(in);
  return vox;
}

}  // namespace uniview
