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
#include <string>
#include <vector>

#include "uniview/env.hpp"
#include "uniview/occupancy.hpp"
#include "uniview/policy.hpp"

namespace uniview {

struct DataConfig {
  std::uint64_t seed{0};
  int scenes{500};         // pre-training scenes
  int rigs_per_scene{4};
  int heldout_scenes{50};  // held-out pre-training scenes, first_scene = heldout_offset
  std::uint64_t heldout_offset{1000000};
  bool gripper{true};      // random gripper sphere in pre-training scenes
  int episodes{500};       // expert demonstrations
  int episode_max_steps{200};
  std::vector<TaskKind> tasks{TaskKind::kReach};
  RigMode rigs{RigMode::kSeen};
};

struct EvalConfig {
  std::uint64_t seed{0};
  std::uint64_t first_scene{1000000};
  int episodes{100};
  int max_steps{40};
  int chain{1};
  RigMode rigs{RigMode::kSeen};
};

/// Everything a command needs, parsed from `key = value` lines. Each key has a default; unknown
/// keys and unparsable values throw ConfigError.
struct RunConfig {
  Grid grid;
  RigFamily seen = RigFamily::seen();
  RigFamily unseen = RigFamily::unseen();
  SceneConfig scene;
  EnvConfig env;
  OccModelConfig occ;  // occ.uv is the shared encoder; policy uses the same copy
  PolicyConfig policy;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  DataConfig data;
  EvalConfig eval;
  std::uint64_t init_seed{0};

  OccModelConfig occ_model() const;
  PolicyModelConfig policy_model() const;
  const RigFamily& family(bool unseen_family) const { return unseen_family ? unseen : seen; }
  void validate() const;

  /// Pre-training scenes, or the held-out split when `heldout`.
  SyntheticOccSpec pretrain_data(bool heldout) const;
  SyntheticEpisodeSpec demo_data() const;
  PolicyEvalSpec policy_eval() const;
};

struct ConfigKey {
  std::string key;
  std::string doc;
};

/// Every accepted key with its one-line description, in file order.
std::vector<ConfigKey> config_keys();

/// Applies `key = value` lines on top of `base`. Blank lines and `#` comments are ignored.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Full effective config, one `key = value` per line with doc comments; parse_config reads it back exactly.
std::string config_to_string(const RunConfig& config);
void save_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace uniview
