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

#include "uniview/env.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace uniview {

Instruction Instruction::from_id(int id) {
  if (id < 0 || id >= kCount) throw std::invalid_argument("unknown instruction id " + std::to_string(id));
  return {static_cast<TaskKind>(id / kPaletteSize), id % kPaletteSize};
}

std::string Instruction::name(const Palette& palette) const {
  return std::string(task == TaskKind::kReach ? "reach " : "lift ") + palette.names.at(color);
}

EnvState initial_state(const SceneSpec& scene, const EnvConfig& config, std::uint64_t seed) {
  EnvState state;
  state.scene = scene;
  state.gripper_pos = config.start_pos;
  if (config.start_jitter > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-config.start_jitter, config.start_jitter);
    for (int a = 0; a < 3; ++a) state.gripper_pos[a] += u(rng);
  }
  return state;
}

namespace {

Vec3 clamp_position(const Vec3& p, const EnvState& state, const EnvConfig& config) {
  Vec3 lo = config.workspace_min;
  lo.z() = std::max(lo.z(), state.scene.table_height + config.gripper_radius);
  return p.cwiseMax(lo).cwiseMin(config.workspace_max);
}

}  // namespace

EnvState step(const EnvState& state, const Action& action, const EnvConfig& config) {
  EnvState next = state;
  Vec3 dpos = action.dpos;
  if (const double n = dpos.norm(); n > config.max_step) dpos *= config.max_step / n;
  const Vec3 drot = action.drot.cwiseMax(-config.max_rot_step).cwiseMin(config.max_rot_step);

  next.gripper_pos = clamp_position(state.gripper_pos + dpos, state, config);
  next.gripper_rot += drot;

  if (action.close && state.gripper_open) {
    next.gripper_open = false;
    double best = config.grasp_radius;
    for (const auto& prim : next.scene.primitives) {
      const double d = (prim.center - next.gripper_pos).norm();
      if (d < best) {
        best = d;
        next.held_object = prim.object_id;
        next.held_offset = prim.center - next.gripper_pos;
      }
    }
  } else if (!action.close && !state.gripper_open) {
    next.gripper_open = true;
    if (next.held_object) {
      Primitive* obj = next.scene.find(*next.held_object);
      obj->center = next.gripper_pos + next.held_offset;
      obj->center.z() = next.scene.table_height + obj->half_height();
      next.held_object.reset();
    }
  }
  if (next.held_object) next.scene.find(*next.held_object)->center = next.gripper_pos + next.held_offset;
  ++next.step_count;
  return next;
}

int target_object(const SceneSpec& scene, int instruction_id) {
  const Instruction ins = Instruction::from_id(instruction_id);
  for (const auto& prim : scene.primitives)
    if (prim.color_id == ins.color) return prim.object_id;
  throw std::invalid_argument("instruction target color not present in the scene");
}

namespace {

Vec3 move_towards(const Vec3& from, const Vec3& to, double max_step) {
  const Vec3 d = to - from;
  const double n = d.norm();
  if (n <= max_step) return d;
  return d * (max_step / n);
}

}  // namespace

Action expert_action(const EnvState& state, int instruction_id, const EnvConfig& config) {
  const Instruction ins = Instruction::from_id(instruction_id);
  const int target = target_object(state.scene, instruction_id);
  const Vec3 center = state.scene.find(target)->center;
  const Vec3 pos = state.gripper_pos;
  const bool near = (center - pos).norm() <= config.grasp_radius;
  Action a;

  if (ins.task == TaskKind::kReach) {
    a.dpos = move_towards(pos, center, config.max_step);
    a.close = near;
    return a;
  }
  if (state.held_object && *state.held_object != target) {
    a.close = false;  // wrong object: release it first
    return a;
  }
  if (state.held_object) {
    const Primitive* obj = state.scene.find(target);
    const double goal_z = state.scene.table_height + config.lift_height + obj->half_height() + 0.02;
    Vec3 goal = pos;
    goal.z() = std::min(goal_z - state.held_offset.z(), config.workspace_max.z());
    a.dpos = move_towards(pos, goal, config.max_step);
    a.close = true;
    return a;
  }
  a.dpos = move_towards(pos, center, config.max_step);
  a.close = near;
  return a;
}

bool success(const EnvState& state, int instruction_id, const EnvConfig& config) {
  const Instruction ins = Instruction::from_id(instruction_id);
  const int target = target_object(state.scene, instruction_id);
  const Primitive* obj = state.scene.find(target);
  if (ins.task == TaskKind::kReach)
    return (obj->center - state.gripper_pos).norm() <= config.grasp_radius;
  return state.held_object == target &&
         obj->center.z() - obj->half_height() >= state.scene.table_height + config.lift_height;
}

SceneSpec scene_with_gripper(const EnvState& state, const EnvConfig& config) {
  SceneSpec scene = state.scene;
  Primitive g;
  g.shape = ShapeKind::kSphere;
  g.center = state.gripper_pos;
  g.radius = config.gripper_radius;
  g.rgb = config.gripper_rgb;
  g.object_id = kGripperObjectId;
  scene.primitives.push_back(g);
  return scene;
}

SceneSpec with_random_gripper(const SceneSpec& scene, std::uint64_t seed, const EnvConfig& config) {
  std::mt19937_64 rng(seed);
  const double r = config.gripper_radius;
  std::uniform_real_distribution<double> ux(config.workspace_min.x() + 0.1, config.workspace_max.x() - 0.1);
  std::uniform_real_distribution<double> uy(config.workspace_min.y() + 0.1, config.workspace_max.y() - 0.1);
  std::uniform_real_distribution<double> uz(scene.table_height + r, config.workspace_max.z() - r);
  for (int attempt = 0; attempt < 100; ++attempt) {
    const Vec3 c(ux(rng), uy(rng), uz(rng));
    bool clear = true;
    for (const auto& p : scene.primitives) {
      double d;
      if (p.shape == ShapeKind::kSphere) {
        d = (c - p.center).norm() - p.radius;
      } else {
        const Vec3 lo = p.center - 0.5 * p.size, hi = p.center + 0.5 * p.size;
        d = (c.cwiseMax(lo).cwiseMin(hi) - c).norm();
      }
      if (d < r + 0.01) clear = false;
    }
    if (!clear) continue;
    EnvState state;
    state.scene = scene;
    state.gripper_pos = c;
    return scene_with_gripper(state, config);
  }
  return scene;
}

Episode generate_episode(const SceneSpec& scene, const Rig& rig, int instruction_id,
                         const EnvConfig& config, int max_steps, std::uint64_t start_seed) {
  Episode ep;
  ep.instruction_id = instruction_id;
  ep.rig = rig;
  EnvState state = initial_state(scene, config, start_seed);
  for (int t = 0;; ++t) {
    ep.frames.push_back({render_rig(scene_with_gripper(state, config), rig), t});
    if (success(state, instruction_id, config)) {
      ep.success = true;
      break;
    }
    if (t >= max_steps) break;
    const Action a = expert_action(state, instruction_id, config);
    ep.actions.push_back(a);
    state = step(state, a, config);
  }
  return ep;
}

}  // namespace uniview
