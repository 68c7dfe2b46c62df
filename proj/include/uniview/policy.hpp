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
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "uniview/env.hpp"
#include "uniview/nn/adam.hpp"
#include "uniview/occupancy.hpp"
#include "uniview/uvformer.hpp"

namespace uniview {

struct PolicyConfig {
  int tokens{8};  // I, learned tokens per instruction
  int decoder_layers{2};
  int lstm_hidden{128};
  int mlp_hidden{128};
  bool wrist{false};
  int wrist_camera{0};
};

struct PolicyModelConfig {
  UvFormerConfig uv;
  PolicyConfig policy;
};

/// Vocabulary, fusion decoder and policy head ("policy.*", "fusion.*").
void init_policy(ParamStore& store, const PolicyModelConfig& config, std::mt19937_64& rng);
/// Backbone and UVFormer plus the policy parts.
void init_policy_model(ParamStore& store, const PolicyModelConfig& config, std::uint64_t seed);

/// Prefixes of the parameters frozen by the frozen fine-tuning mode.
const std::vector<std::string>& encoder_prefixes();

/// The I x C token block of one instruction.
Var instruction_tokens(Tape& tape, ParamStore& store, int instruction_id, int tokens);

/// Pillar ground-plane centers scaled to [0,1]^2, (L*B x 2).
Matrix pillar_coordinates(const Grid& grid);

/// D pre-norm layers of softmax cross-attention (tokens -> UF and optional wrist features),
/// softmax self-attention over tokens, and an FFN. Returns I x C.
Var fusion_decode(Tape& tape, ParamStore& store, Var uf, const std::optional<Var>& wrist, Var tokens,
                  const PolicyModelConfig& config);

struct PolicyOutput {
  Var pose;           // 1 x 6
  Var gripper_logit;  // 1 x 1, > 0 means close
  nn::LstmState state;
};

nn::LstmState zero_lstm_state(Tape& tape, int hidden);

/// Max-pool over tokens, one LSTM step, then a two-layer MLP split 6 + 1.
PolicyOutput policy_step(Tape& tape, ParamStore& store, Var vl, const nn::LstmState& prev);

struct ImitationLoss {
  Var total, pose, gripper;
};

/// Sum over steps of MSE on the 6 pose deltas plus lambda_gripper * BCE on the gripper logit.
ImitationLoss imitation_loss(std::span<const PolicyOutput> outputs, std::span<const Action> demo,
                             double lambda_gripper);

/// Demonstrations, produced on demand.
class EpisodeSource {
 public:
  virtual ~EpisodeSource() = default;
  virtual std::size_t size() const = 0;
  virtual Episode get(std::size_t index) const = 0;
};

/// How episode rigs are drawn.
///  seen, unseen: one family.
///  multi: every scene rendered under both families, seen first.
///  joint: the instruction set split in half by color, low half under seen, high half under unseen.
enum class RigMode { kSeen, kUnseen, kMulti, kJoint };

/// Expert episodes on seeded scenes and rigs. Instructions cycle through the chosen tasks and
/// name the color of a randomly picked object.
struct SyntheticEpisodeSpec {
  int episodes{500};  // scenes; multi mode yields two episodes per scene
  std::uint64_t seed{0};
  std::uint64_t first_scene{0};
  RigFamily family = RigFamily::seen();
  RigFamily unseen_family = RigFamily::unseen();
  RigMode rigs{RigMode::kSeen};
  SceneConfig scene;
  EnvConfig env;
  std::vector<TaskKind> tasks{TaskKind::kReach};
  int max_steps{200};
};

class SyntheticEpisodeSource : public EpisodeSource {
 public:
  explicit SyntheticEpisodeSource(SyntheticEpisodeSpec spec);
  std::size_t size() const override;
  Episode get(std::size_t index) const override;
  SceneSpec scene(std::size_t index) const;
  Rig rig(std::size_t index) const;
  int instruction(std::size_t index) const;
  const SyntheticEpisodeSpec& spec() const { return spec_; }

 private:
  SyntheticEpisodeSpec spec_;
};

/// Directory of *.uvds episodes in sorted file-name order.
class DiskEpisodeSource : public EpisodeSource {
 public:
  explicit DiskEpisodeSource(std::filesystem::path dir);
  std::size_t size() const override { return files_.size(); }
  Episode get(std::size_t index) const override;

 private:
  std::vector<std::filesystem::path> files_;
};

struct FinetuneConfig {
  int epochs{10};
  nn::AdamConfig adam{1e-4};
  double lambda_gripper{0.01};
  int window{8};  // truncated backpropagation length in frames
  bool freeze_encoder{false};
  std::uint64_t seed{0};
  int max_steps{0};  // stop after this many optimizer steps when > 0
};

struct FinetuneEpoch {
  int epoch{0};
  int steps{0};
  double loss{0}, pose{0}, gripper{0};
  double wall_s{0};
};

std::string finetune_json(const FinetuneEpoch& m);

/// Imitation training with the LSTM state threaded through each episode and gradients cut
/// every `window` frames. In frozen mode the encoder output is computed once per frame and
/// cached. Throws std::invalid_argument on an empty demo set.
std::vector<FinetuneEpoch> finetune_run(ParamStore& store, const PolicyModelConfig& model, const EpisodeSource& demos,
                                        const FinetuneConfig& config, std::ostream* log = nullptr);

/// Stateful closed-loop controller around a parameter store.
class PolicyRunner {
 public:
  PolicyRunner(ParamStore& store, const PolicyModelConfig& model);
  void reset();
  /// Action for the current observation; advances the recurrent state.
  Action act(std::span<const RgbdImage> views, const Rig& rig, int instruction_id);

 private:
  ParamStore& store_;
  PolicyModelConfig model_;
  Matrix h_, c_;
};

struct RolloutResult {
  bool success{false};
  int steps{0};
  std::vector<Vec3> trajectory;  // gripper positions, starting state included
};

/// Render -> act -> step until success or max_steps actions.
RolloutResult rollout(PolicyRunner& runner, EnvState& state, const Rig& rig, int instruction_id,
                      const EnvConfig& env, int max_steps);

struct ChainResult {
  std::vector<int> completed;  // completed[k] = 1 when the k-th instruction succeeded
  int steps{0};
};

/// Sequential instructions in one scene; the chain stops at the first failure.
ChainResult rollout_chain(PolicyRunner& runner, const SceneSpec& scene, const Rig& rig,
                          std::span<const int> instructions, const EnvConfig& env, int max_steps);

struct PolicyEvalSpec {
  int episodes{100};
  std::uint64_t seed{0};
  std::uint64_t first_scene{1000000};
  RigFamily family = RigFamily::seen();
  std::optional<Rig> rig;  // fixed rig instead of family draws
  SceneConfig scene;
  EnvConfig env;
  std::vector<TaskKind> tasks{TaskKind::kReach};
  int max_steps{40};
  int chain{1};  // instructions per episode
};

struct PolicyEvalSummary {
  int episodes{0};
  double success_rate{0};
  double mean_steps{0};
  std::vector<int> chain_success;  // episodes completing at least k+1 instructions
};

/// One JSON line per episode {instruction_id, env_seed, rig_id, success, steps}, then a summary.
PolicyEvalSummary eval_policy(ParamStore& store, const PolicyModelConfig& model, const PolicyEvalSpec& spec,
                              std::ostream* report = nullptr);

}  // namespace uniview
