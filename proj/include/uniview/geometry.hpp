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

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

namespace uniview {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

/// Points in front of the camera closer than this are treated as behind it.
inline constexpr double kDepthMin = 1e-6;

template <typename Scalar>
struct CameraIntrinsics {
  Scalar fx{1}, fy{1}, cx{0}, cy{0};
  int width{1}, height{1};

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("focal lengths must be positive");
    if (width <= 0 || height <= 0) throw std::invalid_argument("image size must be positive");
    if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height))
      throw std::invalid_argument("principal point outside the image");
  }
};

/// World-to-camera rigid transform: p_cam = rotation * p_world + translation.
template <typename Scalar>
struct CameraPose {
  Matrix3<Scalar> rotation = Matrix3<Scalar>::Identity();
  Vector3<Scalar> translation = Vector3<Scalar>::Zero();

  void validate(Scalar tol = Scalar(1e-9)) const {
    const Matrix3<Scalar> rrt = rotation * rotation.transpose();
    if ((rrt - Matrix3<Scalar>::Identity()).cwiseAbs().maxCoeff() > tol)
      throw std::invalid_argument("rotation is not orthonormal");
    if (std::abs(rotation.determinant() - Scalar(1)) > tol)
      throw std::invalid_argument("rotation determinant is not +1");
  }

  Vector3<Scalar> to_camera(const Vector3<Scalar>& p_world) const {
    return rotation * p_world + translation;
  }
  Vector3<Scalar> to_world(const Vector3<Scalar>& p_cam) const {
    return rotation.transpose() * (p_cam - translation);
  }
  Vector3<Scalar> center() const { return -(rotation.transpose() * translation); }
};

template <typename Scalar>
struct Camera {
  CameraIntrinsics<Scalar> intrinsics;
  CameraPose<Scalar> pose;
};

template <typename Scalar>
struct CameraRig {
  std::vector<Camera<Scalar>> cameras;

  std::size_t size() const { return cameras.size(); }
  void validate() const {
    if (cameras.empty()) throw std::invalid_argument("camera rig is empty");
    for (const auto& cam : cameras) {
      cam.intrinsics.validate();
      cam.pose.validate();
    }
  }
};

template <typename Scalar>
struct Projection {
  Vector2<Scalar> pixel = Vector2<Scalar>::Zero();
  Scalar depth{0};
  bool valid{false};
};

template <typename Scalar>
Projection<Scalar> project_point(const CameraIntrinsics<Scalar>& k, const CameraPose<Scalar>& pose,
                                 const Vector3<Scalar>& p_world) {
  Projection<Scalar> out;
  const Vector3<Scalar> pc = pose.to_camera(p_world);
  out.depth = pc.z();
  if (!(pc.z() > Scalar(kDepthMin))) return out;
  out.pixel = {k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy};
  out.valid = out.pixel.x() >= 0 && out.pixel.x() < k.width && out.pixel.y() >= 0 &&
              out.pixel.y() < k.height;
  return out;
}

template <typename Scalar>
Vector3<Scalar> unproject_pixel(const CameraIntrinsics<Scalar>& k, const CameraPose<Scalar>& pose,
                                const Vector2<Scalar>& pixel, Scalar depth) {
  if (!(depth > 0)) throw std::invalid_argument("unproject_pixel: depth must be positive");
  const Vector3<Scalar> pc{(pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth,
                           depth};
  return pose.to_world(pc);
}

/// Camera pose looking from `eye` towards `target`; image y points along -up.
template <typename Scalar>
CameraPose<Scalar> look_at(const Vector3<Scalar>& eye, const Vector3<Scalar>& target,
                           const Vector3<Scalar>& up = Vector3<Scalar>::UnitZ()) {
  const Vector3<Scalar> z = (target - eye).normalized();
  Vector3<Scalar> x = z.cross(up);
  if (x.norm() < Scalar(1e-9)) x = z.cross(Vector3<Scalar>::UnitY());
  x.normalize();
  const Vector3<Scalar> y = z.cross(x);
  CameraPose<Scalar> pose;
  pose.rotation.row(0) = x.transpose();
  pose.rotation.row(1) = y.transpose();
  pose.rotation.row(2) = z.transpose();
  pose.translation = -(pose.rotation * eye);
  return pose;
}

using CellIndex = std::array<int, 3>;

/// Axis-aligned workspace partitioned into dims[0] x dims[1] x dims[2] cells.
template <typename Scalar>
struct WorkspaceGrid {
  Vector3<Scalar> origin = Vector3<Scalar>::Zero();
  Vector3<Scalar> cell_size{Scalar(0.05), Scalar(0.05), Scalar(0.10)};
  CellIndex dims{20, 20, 5};

  int cell_count() const { return dims[0] * dims[1] * dims[2]; }
  int pillar_count() const { return dims[0] * dims[1]; }
  Vector3<Scalar> extent() const {
    return {cell_size.x() * dims[0], cell_size.y() * dims[1], cell_size.z() * dims[2]};
  }
  bool contains(const CellIndex& idx) const {
    for (int a = 0; a < 3; ++a)
      if (idx[a] < 0 || idx[a] >= dims[a]) return false;
    return true;
  }
  /// Row-major flat index (l, b, p).
  int flat(const CellIndex& idx) const { return (idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]; }
  CellIndex unflat(int i) const {
    return {i / (dims[1] * dims[2]), (i / dims[2]) % dims[1], i % dims[2]};
  }

  void validate() const {
    if (!(cell_size.array() > 0).all()) throw std::invalid_argument("cell sizes must be positive");
    for (int d : dims)
      if (d <= 0) throw std::invalid_argument("grid dims must be positive");
  }
};

template <typename Scalar>
Vector3<Scalar> cell_center(const WorkspaceGrid<Scalar>& grid, const CellIndex& idx) {
  if (!grid.contains(idx)) throw std::out_of_range("cell index outside the workspace grid");
  return grid.origin + Vector3<Scalar>((idx[0] + Scalar(0.5)) * grid.cell_size.x(),
                                       (idx[1] + Scalar(0.5)) * grid.cell_size.y(),
                                       (idx[2] + Scalar(0.5)) * grid.cell_size.z());
}

/// Lower-inclusive, upper-exclusive binning; nullopt outside the grid.
template <typename Scalar>
std::optional<CellIndex> world_to_cell(const WorkspaceGrid<Scalar>& grid,
                                       const Vector3<Scalar>& p_world) {
  CellIndex idx{};
  for (int a = 0; a < 3; ++a) {
    const Scalar t = (p_world[a] - grid.origin[a]) / grid.cell_size[a];
    if (!(t >= 0) || !(t < grid.dims[a])) return std::nullopt;
    idx[a] = static_cast<int>(std::floor(t));
    if (idx[a] >= grid.dims[a]) return std::nullopt;
  }
  return idx;
}

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;
using Mat3 = Matrix3<double>;
using Intrinsics = CameraIntrinsics<double>;
using Pose = CameraPose<double>;
using Cam = Camera<double>;
using Rig = CameraRig<double>;
using Grid = WorkspaceGrid<double>;

}  // namespace uniview
