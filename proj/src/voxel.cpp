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

#include "uniview/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "uniview/errors.hpp"

namespace uniview {

std::vector<ColoredPoint> rgbd_to_points(std::span<const RgbdImage> views, const Rig& rig) {
  if (views.size() != rig.size()) throw ShapeError("rgbd_to_points: view count differs from rig size");
  std::vector<ColoredPoint> points;
  for (std::size_t n = 0; n < views.size(); ++n) {
    const auto& img = views[n];
    const auto& cam = rig.cameras[n];
    if (img.width != cam.intrinsics.width || img.height != cam.intrinsics.height ||
        img.depth.size() != static_cast<std::size_t>(img.width) * img.height ||
        img.rgb.size() != img.depth.size() * 3)
      throw ShapeError("rgbd_to_points: image size disagrees with intrinsics");
    for (int v = 0; v < img.height; ++v) {
      for (int u = 0; u < img.width; ++u) {
        const std::size_t px = static_cast<std::size_t>(v) * img.width + u;
        if (img.depth[px] <= 0.0f) continue;
        ColoredPoint pt;
        pt.position = unproject_pixel(cam.intrinsics, cam.pose, Vec2(u + 0.5, v + 0.5),
                                      static_cast<double>(img.depth[px]));
        pt.rgb = Vec3(img.rgb[px * 3], img.rgb[px * 3 + 1], img.rgb[px * 3 + 2]);
        points.push_back(pt);
      }
    }
  }
  return points;
}

VoxelGrid voxelize(std::span<const ColoredPoint> points, const Grid& grid) {
  grid.validate();
  VoxelGrid out(grid);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(grid.cell_count());
  for (const auto& pt : points) {
    const auto idx = world_to_cell(grid, pt.position);
    if (!idx) continue;
    const int c = grid.flat(*idx);
    count[c] += 1;
    out.rgb.row(c) += pt.rgb.transpose();
  }
  for (int c = 0; c < grid.cell_count(); ++c) {
    if (count[c] > 0) {
      out.occ[c] = 1.0;
      out.rgb.row(c) /= count[c];
    }
  }
  return out;
}

namespace {

void check_same_dims(const VoxelGrid& a, const VoxelGrid& b) {
  if (a.grid.dims != b.grid.dims || a.occ.size() != b.occ.size())
    throw ShapeError("voxel grids have different dims");
}

}  // namespace

double occupancy_iou(const VoxelGrid& pred, const VoxelGrid& gt, double threshold) {
  check_same_dims(pred, gt);
  if (!(threshold > 0 && threshold < 1)) throw std::invalid_argument("iou threshold must be in (0,1)");
  const auto p = (pred.occ.array() >= threshold);
  const auto g = (gt.occ.array() >= threshold);
  const auto inter = (p && g).count();
  const auto uni = (p || g).count();
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double rgb_mae(const VoxelGrid& pred, const VoxelGrid& gt) {
  check_same_dims(pred, gt);
  double sum = 0;
  long n = 0;
  for (Eigen::Index c = 0; c < gt.occ.size(); ++c) {
    if (gt.occ[c] < 0.5) continue;
    sum += (pred.rgb.row(c) - gt.rgb.row(c)).cwiseAbs().sum();
    n += 3;
  }
  return n == 0 ? 0.0 : sum / n;
}

VoxelGrid resample_to(const VoxelGrid& coarse, const Grid& fine) {
  VoxelGrid out(fine);
  for (int c = 0; c < fine.cell_count(); ++c) {
    const auto src = world_to_cell(coarse.grid, cell_center(fine, fine.unflat(c)));
    if (!src) continue;
    const int s = coarse.grid.flat(*src);
    out.occ[c] = coarse.occ[s];
    out.rgb.row(c) = coarse.rgb.row(s);
  }
  return out;
}

void write_ply(const std::filesystem::path& path, const VoxelGrid& voxels, double threshold) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << voxels.occupied_count(threshold)
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (int c = 0; c < voxels.grid.cell_count(); ++c) {
    if (voxels.occ[c] < threshold) continue;
    const Vec3 p = cell_center(voxels.grid, voxels.grid.unflat(c));
    out << p.x() << ' ' << p.y() << ' ' << p.z();
    for (int k = 0; k < 3; ++k)
      out << ' ' << static_cast<int>(std::lround(std::clamp(voxels.rgb(c, k), 0.0, 1.0) * 255));
    out << '\n';
  }
}

}  // namespace uniview
