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
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uniview/geometry.hpp"
#include "uniview/scene.hpp"

namespace uniview {

struct ColoredPoint {
  Vec3 position = Vec3::Zero();
  Vec3 rgb = Vec3::Zero();
};

/// Per-cell occupancy and color over a workspace grid, flattened in (l, b, p) row-major order.
/// Ground truth holds occ in {0, 1}; predictions hold probabilities.
struct VoxelGrid {
  Grid grid;
  Eigen::VectorXd occ;
  Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor> rgb;

  VoxelGrid() = default;
  explicit VoxelGrid(const Grid& g)
      : grid(g), occ(Eigen::VectorXd::Zero(g.cell_count())),
        rgb(decltype(rgb)::Zero(g.cell_count(), 3)) {}

  int occupied_count(double threshold = 0.5) const { return (occ.array() >= threshold).count(); }
};

/// One point per non-sentinel depth pixel, unprojected through the pixel center.
std::vector<ColoredPoint> rgbd_to_points(std::span<const RgbdImage> views, const Rig& rig);

/// occ = 1 where at least one point lands; rgb = mean color of the cell's points.
VoxelGrid voxelize(std::span<const ColoredPoint> points, const Grid& grid);

/// Intersection over union of the binarized occupancy; 1 when both are empty.
double occupancy_iou(const VoxelGrid& pred, const VoxelGrid& gt, double threshold = 0.5);

/// Mean absolute color error over cells occupied in gt; 0 when gt is empty.
double rgb_mae(const VoxelGrid& pred, const VoxelGrid& gt);

/// Nearest-cell resampling of `coarse` onto `fine` cell centers (cells outside get zero).
VoxelGrid resample_to(const VoxelGrid& coarse, const Grid& fine);

/// ASCII PLY with one vertex per occupied cell center, colored by the cell rgb.
void write_ply(const std::filesystem::path& path, const VoxelGrid& voxels, double threshold = 0.5);

}  // namespace uniview
