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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uniview/geometry.hpp"
#include "uniview/scene.hpp"

namespace uniview {

struct EnvConfig {
  Vec3 workspace_min{0.0, 0.0, 0.0};
  Vec3 workspace_max{1.0, 1.0, 0.5};
  double max_step{0.04};
  double max_rot_step{0.1};
  double grasp_radius{0.05};
  double lift_height{0.15};  // above the table, for lift success
  double gripper_radius{0.035};
  Vec3 gripper_rgb{0.95, 0.95, 0.95};
  Vec3 start_pos{0.5, 0.5, 0.35};
  double start_jitter{0.0};
};

/// 6-DoF end-effector delta plus a binary gripper command (true = close).
struct Action {
  Vec3 dpos = Vec3::Zero();
  Vec3 drot = Vec3::Zero();
  bool close{false};

  static constexpr int kPoseDims = 6;
  std::array<double, 6> pose() const {
    return {dpos.x(), dpos.y(), dpos.z(), drot.x(), drot.y(), drot.z()};
  }
};

struct EnvState {
  SceneSpec scene;
  Vec3 gripper_pos = Vec3::Zero();
  Vec3 gripper_rot = Vec3::Zero();
  bool gripper_open{true};
  std::optional<int> held_object;
  Vec3 held_offset = Vec3::Zero();  // object center minus gripper position at grasp time
  int step_count{0};
};

enum class TaskKind : std::uint8_t { kReach = 0, kLift = 1 };

/// Closed instruction set: id = task * palette_size + color.
struct Instruction {
  TaskKind task{TaskKind::kReach};
  int color{0};

  static constexpr int kPaletteSize = 4;
  static constexpr int kCount = 2 * kPaletteSize;
  static Instruction from_id(int id);
  int id() const { return static_cast<int>(task) * kPaletteSize + color; }
  std::string name(const Palette& palette = {}) const;
};

EnvState initial_state(const SceneSpec& scene, const EnvConfig& config, std::uint64_t seed = 0);

/// Clamps the action at the environment boundary, then moves, rotates and actuates.
EnvState step(const EnvState& state, const Action& action, const EnvConfig& config);

/// Object id of the instruction's target; throws if the id is unknown or the color is absent.
int target_object(const SceneSpec& scene, int instruction_id);

Action expert_action(const EnvState& state, int instruction_id, const EnvConfig& config);

bool success(const EnvState& state, int instruction_id, const EnvConfig& config);

/// Scene to render for a state: held objects moved, gripper drawn as a sphere.
SceneSpec scene_with_gripper(const EnvState& state, const EnvConfig& config);

/// Adds the gripper sphere at a seeded free position above the table, clear of every object.
/// Returns the scene unchanged if no free position turns up.
SceneSpec with_random_gripper(const SceneSpec& scene, std::uint64_t seed, const EnvConfig& config);

struct Frame {
  std::vector<RgbdImage> views;  // one per rig camera
  int t{0};
};

struct Episode {
  int instruction_id{0};
  Rig rig;
  std::vector<Frame> frames;
  std::vector<Action> actions;  // frames.size() - 1 entries
  bool success{false};
};

/// Expert rollout with rendering; stops on success or after max_steps actions.
Episode generate_episode(const SceneSpec& scene, const Rig& rig, int instruction_id,
                         const EnvConfig& config, int max_steps = 200, std::uint64_t start_seed = 0);

}  // namespace uniview
