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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "uniview/env.hpp"
#include "uniview/errors.hpp"
#include "uniview/scene.hpp"
#include "uniview/uvds.hpp"
#include "uniview/voxel.hpp"

using namespace uniview;

namespace {

/// Exact overlap test between two primitives, independent of the footprint-radius rule.
bool interpenetrate(const Primitive& a, const Primitive& b) {
  auto box_point_dist = [](const Primitive& box, const Vec3& p) {
    const Vec3 lo = box.center - 0.5 * box.size, hi = box.center + 0.5 * box.size;
    return (p.cwiseMax(lo).cwiseMin(hi) - p).norm();
  };
  if (a.shape == ShapeKind::kSphere && b.shape == ShapeKind::kSphere)
    return (a.center - b.center).norm() < a.radius + b.radius;
  if (a.shape == ShapeKind::kBox && b.shape == ShapeKind::kBox) {
    for (int k = 0; k < 3; ++k)
      if (std::abs(a.center[k] - b.center[k]) >= 0.5 * (a.size[k] + b.size[k])) return false;
    return true;
  }
  const Primitive& box = a.shape == ShapeKind::kBox ? a : b;
  const Primitive& sph = a.shape == ShapeKind::kBox ? b : a;
  return box_point_dist(box, sph.center) < sph.radius;
}

Rig overhead_rig() {
  Rig rig;
  rig.cameras.push_back({{100, 100, 64, 64, 128, 128}, look_at<double>(Vec3(0.5, 0.5, 1.0), Vec3(0.5, 0.5, 0))});
  return rig;
}

}  // namespace

TEST_CASE("sample_scene is deterministic and respects invariants") {
  SceneConfig cfg;
  cfg.min_objects = cfg.max_objects = 1;
  const SceneSpec a = sample_scene(0, cfg);
  REQUIRE(a.primitives.size() == 1);
  const auto& p = a.primitives[0];
  CHECK(p.center.x() - p.footprint_radius() >= 0.0);
  CHECK(p.center.x() + p.footprint_radius() <= 1.0);
  CHECK(p.center.z() - p.half_height() == doctest::Approx(cfg.table_height));
  const SceneSpec b = sample_scene(0, cfg);
  CHECK(b.primitives[0].center == a.primitives[0].center);
  CHECK(b.primitives[0].rgb == a.primitives[0].rgb);
}

TEST_CASE("1000 sampled scenes have no interpenetrating primitives") {
  SceneConfig cfg;
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SceneSpec s = sample_scene(seed, cfg);
    for (std::size_t i = 0; i < s.primitives.size(); ++i)
      for (std::size_t j = i + 1; j < s.primitives.size(); ++j)
        violations += interpenetrate(s.primitives[i], s.primitives[j]);
  }
  CHECK(violations == 0);
}

TEST_CASE("sample_scene rejects impossible placements") {
  SceneConfig cfg;
  cfg.min_objects = cfg.max_objects = 4;
  cfg.table_max = Vec2(0.3, 0.3);
  cfg.max_attempts = 50;
  CHECK_THROWS_AS(sample_scene(1, cfg), std::runtime_error);
}

TEST_CASE("render: straight-down camera over a red box") {
  SceneSpec scene;
  Primitive box;
  box.shape = ShapeKind::kBox;
  box.size = Vec3(0.1, 0.1, 0.1);
  box.center = Vec3(0.5, 0.5, scene.table_height + 0.05);
  box.rgb = Vec3(1, 0, 0);
  scene.primitives.push_back(box);
  const Rig rig = overhead_rig();
  const RgbdImage img = render(scene, rig.cameras[0].intrinsics, rig.cameras[0].pose);
  // Pixel 64 has its center at 64.5, which still hits the box top.
  const std::size_t center = 64 * 128 + 64;
  CHECK(img.rgb[center * 3] == 1.0f);
  CHECK(img.rgb[center * 3 + 1] == 0.0f);
  CHECK(img.depth[center] == doctest::Approx(1.0 - (scene.table_height + 0.1)).epsilon(1e-6));
  // Off the box, the table.
  CHECK(img.depth[32 * 128 + 32] == doctest::Approx(1.0 - scene.table_height).epsilon(1e-6));
}

TEST_CASE("render: empty scene is all background") {
  SceneSpec scene;
  scene.table_visible = false;
  const Rig rig = overhead_rig();
  const RgbdImage img = render(scene, rig.cameras[0].intrinsics, rig.cameras[0].pose);
  for (float d : img.depth) REQUIRE(d == 0.0f);
  for (float c : img.rgb) REQUIRE(c == static_cast<float>(kBackgroundRgb[0]));
}

TEST_CASE("render is deterministic and depth pixels lie on surfaces") {
  const SceneSpec scene = sample_scene(5, SceneConfig{});
  const Rig rig = sample_rig(RigFamily::seen(), 5);
  const auto a = render_rig(scene, rig), b = render_rig(scene, rig);
  for (std::size_t n = 0; n < a.size(); ++n) {
    CHECK(a[n].rgb == b[n].rgb);
    CHECK(a[n].depth == b[n].depth);
  }
  double worst = 0;
  for (const auto& pt : rgbd_to_points(a, rig)) worst = std::max(worst, distance_to_surfaces(scene, pt.position));
  CHECK(worst <= 1e-6);
}

TEST_CASE("rig families are valid and cover the table") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    for (const auto& fam : {RigFamily::seen(), RigFamily::unseen()}) {
      const Rig rig = sample_rig(fam, seed);
      CHECK_NOTHROW(rig.validate());
      CHECK(rig.size() == 3);
      for (const auto& cam : rig.cameras)
        for (Vec3 corner : {Vec3(0.1, 0.1, 0.02), Vec3(0.9, 0.9, 0.02), Vec3(0.1, 0.9, 0.02), Vec3(0.9, 0.1, 0.02)})
          CHECK(project_point(cam.intrinsics, cam.pose, corner).valid);
    }
  }
}

TEST_CASE("step: idle action only advances the step counter") {
  const SceneSpec scene = sample_scene(2, SceneConfig{});
  const EnvConfig cfg;
  const EnvState s0 = initial_state(scene, cfg);
  const EnvState s1 = step(s0, Action{}, cfg);
  CHECK(s1.gripper_pos == s0.gripper_pos);
  CHECK(s1.gripper_open == s0.gripper_open);
  CHECK_FALSE(s1.held_object.has_value());
  CHECK(s1.step_count == s0.step_count + 1);
}

TEST_CASE("step: grasping depends on grasp_radius and clamps oversized moves") {
  SceneConfig sc;
  sc.min_objects = sc.max_objects = 1;
  const SceneSpec scene = sample_scene(4, sc);
  EnvConfig cfg;
  EnvState s = initial_state(scene, cfg);
  const Vec3 center = scene.primitives[0].center;

  s.gripper_pos = center + Vec3(0, 0, cfg.grasp_radius + 0.02);
  Action close;
  close.close = true;
  EnvState far = step(s, close, cfg);
  CHECK_FALSE(far.gripper_open);
  CHECK_FALSE(far.held_object.has_value());

  s.gripper_pos = center + Vec3(0, 0, cfg.grasp_radius - 0.01);
  EnvState near = step(s, close, cfg);
  REQUIRE(near.held_object.has_value());
  CHECK(*near.held_object == scene.primitives[0].object_id);

  Action up;
  up.close = true;
  up.dpos = Vec3(0, 0, 0.02);
  EnvState lifted = step(near, up, cfg);
  CHECK(lifted.scene.primitives[0].center.z() == doctest::Approx(center.z() + 0.02));
  EnvState dropped = step(lifted, Action{}, cfg);
  CHECK(dropped.gripper_open);
  CHECK_FALSE(dropped.held_object.has_value());
  CHECK(dropped.scene.primitives[0].center.z() == doctest::Approx(center.z()));

  Action big;
  big.dpos = Vec3(1, 0, 0);
  EnvState moved = step(initial_state(scene, cfg), big, cfg);
  CHECK((moved.gripper_pos - cfg.start_pos).norm() == doctest::Approx(cfg.max_step));
}

TEST_CASE("expert_action heads straight for the target") {
  SceneConfig sc;
  sc.min_objects = sc.max_objects = 1;
  SceneSpec scene = sample_scene(9, sc);
  scene.primitives[0].center = Vec3(0.5, 0.5, 0.05);
  EnvConfig cfg;
  cfg.max_step = 0.02;
  EnvState s = initial_state(scene, cfg);
  s.gripper_pos = Vec3(0.2, 0.2, 0.3);
  const int reach = Instruction{TaskKind::kReach, scene.primitives[0].color_id}.id();
  const Action a = expert_action(s, reach, cfg);
  const Vec3 expect = 0.02 * (Vec3(0.5, 0.5, 0.05) - Vec3(0.2, 0.2, 0.3)).normalized();
  CHECK((a.dpos - expect).norm() < 1e-15);
  CHECK_FALSE(a.close);
  CHECK(a.drot == Vec3::Zero());

  s.gripper_pos = Vec3(0.5, 0.5, 0.05 + 0.03);
  const Action near = expert_action(s, reach, cfg);
  CHECK(near.close);
  CHECK(near.dpos.z() < 0);

  CHECK_THROWS_AS(expert_action(s, 99, cfg), std::invalid_argument);
  CHECK_THROWS_AS(expert_action(s, -1, cfg), std::invalid_argument);
}

TEST_CASE("success predicate") {
  SceneConfig sc;
  sc.min_objects = sc.max_objects = 2;
  const SceneSpec scene = sample_scene(12, sc);
  const EnvConfig cfg;
  EnvState s = initial_state(scene, cfg);
  const int lift_first = Instruction{TaskKind::kLift, scene.primitives[0].color_id}.id();
  const int reach_first = Instruction{TaskKind::kReach, scene.primitives[0].color_id}.id();
  CHECK_FALSE(success(s, lift_first, cfg));
  CHECK_FALSE(success(s, reach_first, cfg));

  // Holding the other object high up does not satisfy lifting the first.
  s.held_object = scene.primitives[1].object_id;
  s.gripper_open = false;
  s.scene.primitives[1].center.z() = 0.4;
  CHECK_FALSE(success(s, lift_first, cfg));
}

TEST_CASE("expert rollouts succeed on random scenes for every task") {
  SceneConfig sc;
  sc.min_objects = 2;
  const EnvConfig cfg;
  int failures = 0, failures_first_100 = 0, rollouts = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    if (seed == 100) failures_first_100 = failures;
    const SceneSpec scene = sample_scene(seed, sc);
    for (const auto& prim : scene.primitives) {
      for (TaskKind task : {TaskKind::kReach, TaskKind::kLift}) {
        const int id = Instruction{task, prim.color_id}.id();
        EnvState s = initial_state(scene, cfg);
        int steps = 0;
        while (!success(s, id, cfg) && steps < 200) {
          s = step(s, expert_action(s, id, cfg), cfg);
          ++steps;
        }
        failures += !success(s, id, cfg);
        ++rollouts;
      }
    }
  }
  CHECK(failures_first_100 == 0);
  CHECK(failures <= rollouts / 100);
}

TEST_CASE("UVDS episode round trip") {
  SceneConfig sc;
  sc.min_objects = 2;
  const SceneSpec scene = sample_scene(21, sc);
  RigFamily fam = RigFamily::seen();
  fam.width = fam.height = 32;
  const Rig rig = sample_rig(fam, 21);
  const int id = Instruction{TaskKind::kReach, scene.primitives[0].color_id}.id();
  const Episode ep = generate_episode(scene, rig, id, EnvConfig{});
  REQUIRE(ep.success);
  REQUIRE(ep.actions.size() + 1 == ep.frames.size());
  const auto path = std::filesystem::temp_directory_path() / "uniview_test_episode.uvds";
  write_uvds(path, ep);
  const Episode back = read_uvds(path);
  CHECK(back.instruction_id == id);
  CHECK(back.success);
  REQUIRE(back.frames.size() == ep.frames.size());
  for (std::size_t t = 0; t < ep.frames.size(); ++t)
    for (std::size_t n = 0; n < rig.size(); ++n) {
      CHECK(back.frames[t].views[n].rgb == ep.frames[t].views[n].rgb);
      CHECK(back.frames[t].views[n].depth == ep.frames[t].views[n].depth);
    }
  for (std::size_t t = 0; t < ep.actions.size(); ++t) {
    CHECK((back.actions[t].dpos - ep.actions[t].dpos).norm() < 1e-7);
    CHECK(back.actions[t].close == ep.actions[t].close);
  }
  CHECK(back.rig.cameras[1].pose.rotation == rig.cameras[1].pose.rotation);

  std::ofstream(path, std::ios::binary) << "NOTUVDS!";
  CHECK_THROWS_AS(read_uvds(path), IoError);
  std::filesystem::remove(path);
}
