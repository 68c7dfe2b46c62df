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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "uniview/geometry.hpp"

namespace uniview {

enum class ShapeKind : std::uint8_t { kBox = 0, kSphere = 1 };

inline constexpr int kGripperObjectId = -1;

struct Primitive {
  ShapeKind shape{ShapeKind::kBox};
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Zero();  // full extents; boxes only
  double radius{0};          // spheres only
  Vec3 rgb = Vec3::Zero();
  int object_id{0};
  int color_id{-1};  // palette index, -1 when not from the palette

  /// Radius of the vertical cylinder enclosing the primitive's footprint.
  double footprint_radius() const {
    return shape == ShapeKind::kSphere ? radius : 0.5 * std::hypot(size.x(), size.y());
  }
  /// Distance from the center down to the resting surface.
  double half_height() const { return shape == ShapeKind::kSphere ? radius : 0.5 * size.z(); }
};

/// Tabletop scene. The table is a horizontal rectangle at `table_height`.
struct SceneSpec {
  double table_height{0.02};
  bool table_visible{true};
  Vec2 table_min{0.0, 0.0};
  Vec2 table_max{1.0, 1.0};
  Vec3 table_rgb{0.55, 0.45, 0.35};
  std::vector<Primitive> primitives;

  const Primitive* find(int object_id) const;
  Primitive* find(int object_id);
};

struct Palette {
  std::vector<std::string> names{"red", "green", "blue", "yellow"};
  std::vector<Vec3> colors{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}};
};

struct SceneConfig {
  int min_objects{1};
  int max_objects{4};
  double box_min_side{0.06}, box_max_side{0.12};
  double box_min_height{0.06}, box_max_height{0.16};
  double sphere_min_radius{0.03}, sphere_max_radius{0.06};
  double table_height{0.02};
  Vec2 table_min{0.0, 0.0};
  Vec2 table_max{1.0, 1.0};
  double margin{0.1};      // keep objects this far from the table edge
  double clearance{0.02};  // minimum gap between footprints
  int max_attempts{2000};
  Palette palette;
};

/// Deterministic for a given seed; throws std::runtime_error when placement keeps failing.
SceneSpec sample_scene(std::uint64_t seed, const SceneConfig& config);

/// Single-channel-per-pixel RGB-D view: rgb is H*W*3 row-major, depth is H*W with 0 = no hit.
struct RgbdImage {
  int width{0}, height{0};
  std::vector<float> rgb;
  std::vector<float> depth;
};

inline const Vec3 kBackgroundRgb{0.0, 0.0, 0.0};

/// One primary ray per pixel through the pixel center; flat shading; depth is the camera-frame z.
RgbdImage render(const SceneSpec& scene, const Intrinsics& k, const Pose& pose);

std::vector<RgbdImage> render_rig(const SceneSpec& scene, const Rig& rig);

/// Ray parameterized as origin + s * dir with dir's camera-z component equal to 1.
struct RayHit {
  double s{0};
  int primitive{-2};  // index into primitives, -1 for the table, -2 for none
};
RayHit intersect(const SceneSpec& scene, const Vec3& origin, const Vec3& dir);

/// Distance from p to the nearest rendered surface (table or primitive).
double distance_to_surfaces(const SceneSpec& scene, const Vec3& p);

/// Camera placement distribution for one rig family.
struct RigFamily {
  int cameras{3};
  double azimuth_min_deg{0}, azimuth_max_deg{120};
  double elevation_min_deg{40}, elevation_max_deg{65};
  double radius_min{1.3}, radius_max{1.6};
  double focal_min{95}, focal_max{120};
  double look_at_jitter{0.05};
  Vec3 look_at{0.5, 0.5, 0.05};
  int width{128}, height{128};

  static RigFamily seen();
  static RigFamily unseen();
};

/// Camera i gets an azimuth stratified in the i-th slice of the family's range.
Rig sample_rig(const RigFamily& family, std::uint64_t seed);

/// Order-dependent 64-bit mix used to derive per-item seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace uniview
