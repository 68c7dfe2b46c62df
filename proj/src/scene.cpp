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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace uniview {

const Primitive* SceneSpec::find(int object_id) const {
  for (const auto& p : primitives)
    if (p.object_id == object_id) return &p;
  return nullptr;
}

Primitive* SceneSpec::find(int object_id) {
  for (auto& p : primitives)
    if (p.object_id == object_id) return &p;
  return nullptr;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over an order-dependent combination.
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

SceneSpec sample_scene(std::uint64_t seed, const SceneConfig& config) {
  const int palette_size = static_cast<int>(config.palette.colors.size());
  if (config.min_objects < 0 || config.max_objects < config.min_objects)
    throw std::invalid_argument("sample_scene: bad object count range");
  if (config.max_objects > palette_size)
    throw std::invalid_argument("sample_scene: more objects than palette colors");

  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };

  SceneSpec scene;
  scene.table_height = config.table_height;
  scene.table_min = config.table_min;
  scene.table_max = config.table_max;

  const int count = std::uniform_int_distribution<int>(config.min_objects, config.max_objects)(rng);
  std::vector<int> colors(palette_size);
  for (int i = 0; i < palette_size; ++i) colors[i] = i;
  std::shuffle(colors.begin(), colors.end(), rng);

  for (int i = 0; i < count; ++i) {
    Primitive prim;
    prim.object_id = i;
    prim.color_id = colors[i];
    prim.rgb = config.palette.colors[colors[i]];
    if (uniform(0, 1) < 0.5) {
      prim.shape = ShapeKind::kBox;
      prim.size = {uniform(config.box_min_side, config.box_max_side),
                   uniform(config.box_min_side, config.box_max_side),
                   uniform(config.box_min_height, config.box_max_height)};
    } else {
      prim.shape = ShapeKind::kSphere;
      prim.radius = uniform(config.sphere_min_radius, config.sphere_max_radius);
    }
    const double r = prim.footprint_radius();
    const double x_lo = config.table_min.x() + config.margin + r;
    const double x_hi = config.table_max.x() - config.margin - r;
    const double y_lo = config.table_min.y() + config.margin + r;
    const double y_hi = config.table_max.y() - config.margin - r;
    if (x_lo >= x_hi || y_lo >= y_hi) throw std::runtime_error("sample_scene: table too small");

    bool placed = false;
    for (int attempt = 0; attempt < config.max_attempts && !placed; ++attempt) {
      prim.center = {uniform(x_lo, x_hi), uniform(y_lo, y_hi),
                     config.table_height + prim.half_height()};
      placed = std::all_of(scene.primitives.begin(), scene.primitives.end(), [&](const Primitive& o) {
        const double d = (prim.center.head<2>() - o.center.head<2>()).norm();
        return d >= r + o.footprint_radius() + config.clearance;
      });
    }
    if (!placed) throw std::runtime_error("sample_scene: could not place all objects");
    scene.primitives.push_back(prim);
  }
  return scene;
}

RigFamily RigFamily::seen() { return RigFamily{}; }

RigFamily RigFamily::unseen() {
  RigFamily f;
  f.azimuth_min_deg = 180;
  f.azimuth_max_deg = 300;
  f.elevation_min_deg = 35;
  f.elevation_max_deg = 60;
  f.radius_min = 1.6;
  f.radius_max = 1.9;
  f.focal_min = 125;
  f.focal_max = 150;
  return f;
}

Rig sample_rig(const RigFamily& family, std::uint64_t seed) {
  if (family.cameras < 1) throw std::invalid_argument("rig family needs at least one camera");
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  constexpr double kDeg = std::numbers::pi / 180.0;
  Rig rig;
  const double slice = (family.azimuth_max_deg - family.azimuth_min_deg) / family.cameras;
  for (int i = 0; i < family.cameras; ++i) {
    const double az = (family.azimuth_min_deg + slice * (i + uniform(0, 1))) * kDeg;
    const double el = uniform(family.elevation_min_deg, family.elevation_max_deg) * kDeg;
    const double radius = uniform(family.radius_min, family.radius_max);
    const double focal = uniform(family.focal_min, family.focal_max);
    const Vec3 target = family.look_at + Vec3(uniform(-1, 1), uniform(-1, 1), 0) * family.look_at_jitter;
    const Vec3 eye = target + radius * Vec3(std::cos(el) * std::cos(az),
                                            std::cos(el) * std::sin(az), std::sin(el));
    Cam cam;
    cam.intrinsics = {focal, focal, family.width / 2.0, family.height / 2.0, family.width,
                      family.height};
    cam.pose = look_at<double>(eye, target);
    rig.cameras.push_back(cam);
  }
  return rig;
}

}  // namespace uniview
