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

#include "uniview/scene.hpp"

#include <cmath>
#include <limits>

namespace uniview {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double hit_box(const Primitive& box, const Vec3& o, const Vec3& d) {
  const Vec3 lo = box.center - 0.5 * box.size;
  const Vec3 hi = box.center + 0.5 * box.size;
  double t_near = -kInf, t_far = kInf;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return kInf;
      continue;
    }
    double t0 = (lo[a] - o[a]) / d[a];
    double t1 = (hi[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
  }
  if (t_near > t_far || t_near <= kDepthMin) return kInf;
  return t_near;
}

double hit_sphere(const Primitive& sphere, const Vec3& o, const Vec3& d) {
  const Vec3 oc = o - sphere.center;
  const double a = d.squaredNorm();
  const double b = 2.0 * d.dot(oc);
  const double c = oc.squaredNorm() - sphere.radius * sphere.radius;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return kInf;
  const double s = (-b - std::sqrt(disc)) / (2 * a);
  return s > kDepthMin ? s : kInf;
}

double hit_table(const SceneSpec& scene, const Vec3& o, const Vec3& d) {
  if (!scene.table_visible || d.z() == 0.0) return kInf;
  const double s = (scene.table_height - o.z()) / d.z();
  if (!(s > kDepthMin)) return kInf;
  const Vec3 p = o + s * d;
  if (p.x() < scene.table_min.x() || p.x() > scene.table_max.x() ||
      p.y() < scene.table_min.y() || p.y() > scene.table_max.y())
    return kInf;
  return s;
}

}  // namespace

RayHit intersect(const SceneSpec& scene, const Vec3& origin, const Vec3& dir) {
  RayHit best{kInf, -2};
  if (const double s = hit_table(scene, origin, dir); s < best.s) best = {s, -1};
  for (int i = 0; i < static_cast<int>(scene.primitives.size()); ++i) {
    const auto& prim = scene.primitives[i];
    const double s = prim.shape == ShapeKind::kBox ? hit_box(prim, origin, dir)
                                                   : hit_sphere(prim, origin, dir);
    if (s < best.s) best = {s, i};
  }
  return best;
}

RgbdImage render(const SceneSpec& scene, const Intrinsics& k, const Pose& pose) {
  RgbdImage img;
  img.width = k.width;
  img.height = k.height;
  img.rgb.assign(static_cast<std::size_t>(k.width) * k.height * 3, 0.0f);
  img.depth.assign(static_cast<std::size_t>(k.width) * k.height, 0.0f);
  const Vec3 origin = pose.center();
  const Mat3 rt = pose.rotation.transpose();
  // Hot loop: one ray per pixel against every primitive; scenes hold a handful of objects.
  for (int v = 0; v < k.height; ++v) {
    for (int u = 0; u < k.width; ++u) {
      const Vec3 dir_cam((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
      const RayHit hit = intersect(scene, origin, rt * dir_cam);
      const std::size_t px = static_cast<std::size_t>(v) * k.width + u;
      const Vec3 rgb = hit.primitive == -2   ? kBackgroundRgb
                       : hit.primitive == -1 ? scene.table_rgb
                                             : scene.primitives[hit.primitive].rgb;
      for (int c = 0; c < 3; ++c) img.rgb[px * 3 + c] = static_cast<float>(rgb[c]);
      img.depth[px] = hit.primitive == -2 ? 0.0f : static_cast<float>(hit.s);
    }
  }
  return img;
}

std::vector<RgbdImage> render_rig(const SceneSpec& scene, const Rig& rig) {
  std::vector<RgbdImage> views;
  views.reserve(rig.size());
  for (const auto& cam : rig.cameras) views.push_back(render(scene, cam.intrinsics, cam.pose));
  return views;
}

double distance_to_surfaces(const SceneSpec& scene, const Vec3& p) {
  double best = kInf;
  if (scene.table_visible) {
    const double dx = std::max({scene.table_min.x() - p.x(), 0.0, p.x() - scene.table_max.x()});
    const double dy = std::max({scene.table_min.y() - p.y(), 0.0, p.y() - scene.table_max.y()});
    best = std::sqrt(dx * dx + dy * dy + std::pow(p.z() - scene.table_height, 2));
  }
  for (const auto& prim : scene.primitives) {
    double d;
    if (prim.shape == ShapeKind::kSphere) {
      d = std::abs((p - prim.center).norm() - prim.radius);
    } else {
      const Vec3 q = (p - prim.center).cwiseAbs() - 0.5 * prim.size;
      d = std::abs(q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0));
    }
    best = std::min(best, d);
  }
  return best;
}

}  // namespace uniview
