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

#include "uniview/policy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "uniview/errors.hpp"
#include "uniview/uvds.hpp"

namespace uniview {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string fusion_prefix(int d) { return "fusion.l" + std::to_string(d) + "."; }

void add_attention(ParamStore& store, const std::string& prefix, int C, std::mt19937_64& rng) {
  for (const char* f : {"q.", "k.", "v."}) add_dense(store, prefix + f, C, C, rng, false);
  add_dense(store, prefix + "o.", C, C, rng);
}

/// softmax(q K^T / sqrt(C)) V through the output projection.
Var attend(Tape& tape, ParamStore& store, const std::string& prefix, Var queries, Var keys_values) {
  const Var q = apply_dense(tape, store, prefix + "q.", queries);
  const Var k = apply_dense(tape, store, prefix + "k.", keys_values);
  const Var v = apply_dense(tape, store, prefix + "v.", keys_values);
  const double scale = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
  const Var w = nn::softmax_rows(nn::scale(nn::matmul(q, nn::transpose(k)), scale));
  return apply_dense(tape, store, prefix + "o.", nn::matmul(w, v));
}

std::pair<int, int> view_size(std::span<const RgbdImage> views) {
  require(!views.empty(), "no camera views");
  for (const auto& v : views)
    require(v.height == views[0].height && v.width == views[0].width, "all cameras must share one image size");
  return {views[0].height, views[0].width};
}

struct Observation {
  Var uf;
  std::optional<Var> wrist;
};

Observation observe(Tape& tape, ParamStore& store, std::span<const RgbdImage> views, const Rig& rig,
                    const PolicyModelConfig& model) {
  const auto [h, w] = view_size(views);
  const std::vector<Matrix> imgs = images_from_views(views);
  const FeatureMaps f = vision_backbone(tape, store, imgs, h, w);
  const ProjectionTable table = build_projection_table(query_positions(model.uv.grid), rig, f.height, f.width);
  Observation o{uvformer_forward(tape, store, f, table, model.uv), std::nullopt};
  if (model.policy.wrist) {
    require(model.policy.wrist_camera >= 0 && model.policy.wrist_camera < static_cast<int>(rig.size()),
            "wrist camera index outside the rig");
    o.wrist = f.maps[static_cast<std::size_t>(model.policy.wrist_camera)];
  }
  return o;
}

Action to_action(const PolicyOutput& out) {
  Action a;
  const Matrix& p = out.pose.value();
  a.dpos = Vec3(p(0, 0), p(0, 1), p(0, 2));
  a.drot = Vec3(p(0, 3), p(0, 4), p(0, 5));
  a.close = out.gripper_logit.scalar() > 0;
  return a;
}

/// Cached encoder outputs of one episode frame, kept in single precision.
struct CachedFrame {
  Eigen::MatrixXf uf;
  Eigen::MatrixXf wrist;
};

}  // namespace

const std::vector<std::string>& encoder_prefixes() {
  static const std::vector<std::string> p{"backbone.", "queries.", "uvformer."};
  return p;
}

void init_policy(ParamStore& store, const PolicyModelConfig& config, std::mt19937_64& rng) {
  const PolicyConfig& pc = config.policy;
  const int C = config.uv.channels, H = pc.lstm_hidden;
  if (pc.tokens < 1 || pc.decoder_layers < 1 || H < 1 || pc.mlp_hidden < 1)
    throw ConfigError("policy: non-positive size");
  store.add_normal("policy.vocab", {Instruction::kCount * pc.tokens, C}, 1.0, rng);
  add_dense(store, "fusion.pos.", 2, C, rng);
  for (int d = 0; d < pc.decoder_layers; ++d) {
    const std::string p = fusion_prefix(d);
    add_layer_norm(store, p + "ln_q.", C);
    add_layer_norm(store, p + "ln_kv.", C);
    add_attention(store, p + "cross.", C, rng);
    add_layer_norm(store, p + "ln_sa.", C);
    add_attention(store, p + "sa.", C, rng);
    add_layer_norm(store, p + "ln_ffn.", C);
    add_dense(store, p + "ffn.in.", C, 2 * C, rng);
    add_dense(store, p + "ffn.out.", 2 * C, C, rng);
  }
  store.add_normal("policy.lstm.wx", {C, 4 * H}, 1.0 / std::sqrt(static_cast<double>(C)), rng);
  store.add_normal("policy.lstm.wh", {H, 4 * H}, 1.0 / std::sqrt(static_cast<double>(H)), rng);
  Matrix& b = store.add_constant("policy.lstm.b", {4 * H}, 0.0).value;
  b.block(0, H, 1, H).setOnes();  // forget gate starts open
  add_dense(store, "policy.mlp1.", H, pc.mlp_hidden, rng);
  add_dense(store, "policy.mlp2.", pc.mlp_hidden, 7, rng);
  store.at("policy.mlp2.w").value *= 0.1;
}

void init_policy_model(ParamStore& store, const PolicyModelConfig& config, std::uint64_t seed) {
  config.uv.validate();
  std::mt19937_64 rng(seed);
  init_backbone(store, config.uv.channels, rng);
  init_uvformer(store, config.uv, rng, mix_seed(seed, 1));
  init_policy(store, config, rng);
}

Var instruction_tokens(Tape& tape, ParamStore& store, int instruction_id, int tokens) {
  (void)Instruction::from_id(instruction_id);  // range check
  return nn::slice_rows(tape.param(store, "policy.vocab"), static_cast<Index>(instruction_id) * tokens, tokens);
}

Matrix pillar_coordinates(const Grid& grid) {
  const int L = grid.dims[0], B = grid.dims[1];
  Matrix xy(static_cast<Index>(L) * B, 2);
  for (int l = 0; l < L; ++l)
    for (int b = 0; b < B; ++b) {
      xy(l * B + b, 0) = (l + 0.5) / L;
      xy(l * B + b, 1) = (b + 0.5) / B;
    }
  return xy;
}

Var fusion_decode(Tape& tape, ParamStore& store, Var uf, const std::optional<Var>& wrist, Var tokens,
                  const PolicyModelConfig& config) {
  require(uf.rows() == config.uv.pillars() && uf.cols() == config.uv.channels, "fusion_decode: UF shape");
  require(tokens.cols() == config.uv.channels, "fusion_decode: token width differs from C");
  const Var pos = apply_dense(tape, store, "fusion.pos.", tape.constant(pillar_coordinates(config.uv.grid)));
  Var x = tokens;
  for (int d = 0; d < config.policy.decoder_layers; ++d) {
    const std::string p = fusion_prefix(d);
    Var kv = nn::add(apply_layer_norm(tape, store, p + "ln_kv.", uf), pos);
    if (wrist) {
      const std::vector<Var> parts{kv, apply_layer_norm(tape, store, p + "ln_kv.", *wrist)};
      kv = nn::concat_rows(parts);
    }
    x = nn::add(x, attend(tape, store, p + "cross.", apply_layer_norm(tape, store, p + "ln_q.", x), kv));
    const Var xs = apply_layer_norm(tape, store, p + "ln_sa.", x);
    x = nn::add(x, attend(tape, store, p + "sa.", xs, xs));
    x = nn::add(x, feed_forward(tape, store, p + "ffn.", apply_layer_norm(tape, store, p + "ln_ffn.", x)));
  }
  return x;
}

nn::LstmState zero_lstm_state(Tape& tape, int hidden) {
  return {tape.constant(Matrix::Zero(1, hidden)), tape.constant(Matrix::Zero(1, hidden))};
}

PolicyOutput policy_step(Tape& tape, ParamStore& store, Var vl, const nn::LstmState& prev) {
  const Var pooled = nn::max_pool_rows(vl);
  const nn::LstmState s = nn::lstm_cell(pooled, prev, tape.param(store, "policy.lstm.wx"),
                                        tape.param(store, "policy.lstm.wh"), tape.param(store, "policy.lstm.b"));
  const Var hidden = nn::relu(apply_dense(tape, store, "policy.mlp1.", s.h));
  const Var out = apply_dense(tape, store, "policy.mlp2.", hidden);
  return {nn::slice_cols(out, 0, 6), nn::slice_cols(out, 6, 1), s};
}

ImitationLoss imitation_loss(std::span<const PolicyOutput> outputs, std::span<const Action> demo,
                             double lambda_gripper) {
  if (outputs.size() != demo.size()) throw ShapeError("imitation_loss: sequence lengths differ");
  if (outputs.empty()) throw ShapeError("imitation_loss: empty sequence");
  if (lambda_gripper < 0) throw ConfigError("lambda_gripper must be non-negative");
  std::vector<Var> pose_terms, grip_terms;
  for (std::size_t t = 0; t < outputs.size(); ++t) {
    const auto a = demo[t].pose();
    Matrix target(1, 6);
    for (int k = 0; k < 6; ++k) target(0, k) = a[static_cast<std::size_t>(k)];
    pose_terms.push_back(nn::mse(outputs[t].pose, target));
    grip_terms.push_back(nn::bce_logits(outputs[t].gripper_logit, Matrix::Constant(1, 1, demo[t].close ? 1.0 : 0.0)));
  }
  const Var pose = nn::sum_all(nn::concat_rows(pose_terms));
  const Var grip = nn::sum_all(nn::concat_rows(grip_terms));
  return {nn::add(pose, nn::scale(grip, lambda_gripper)), pose, grip};
}

SyntheticEpisodeSource::SyntheticEpisodeSource(SyntheticEpisodeSpec spec) : spec_(std::move(spec)) {
  if (spec_.episodes < 0) throw ConfigError("episode source: negative size");
  if (spec_.tasks.empty()) throw ConfigError("episode source: no tasks");
}

std::size_t SyntheticEpisodeSource::size() const {
  return static_cast<std::size_t>(spec_.episodes) * (spec_.rigs == RigMode::kMulti ? 2 : 1);
}

// In multi mode indices 2s and 2s+1 share scene s; otherwise index = scene.
SceneSpec SyntheticEpisodeSource::scene(std::size_t index) const {
  if (spec_.rigs == RigMode::kMulti) index /= 2;
  return sample_scene(mix_seed(spec_.seed, spec_.first_scene + index), spec_.scene);
}

Rig SyntheticEpisodeSource::rig(std::size_t index) const {
  bool unseen = spec_.rigs == RigMode::kUnseen;
  if (spec_.rigs == RigMode::kMulti) unseen = index % 2 == 1;
  if (spec_.rigs == RigMode::kJoint) unseen = Instruction::from_id(instruction(index)).color >= Instruction::kPaletteSize / 2;
  return sample_rig(unseen ? spec_.unseen_family : spec_.family,
                    mix_seed(spec_.seed ^ 0x5bd1e995ULL, spec_.first_scene + index));
}

int SyntheticEpisodeSource::instruction(std::size_t index) const {
  const SceneSpec s = scene(index);
  if (spec_.rigs == RigMode::kMulti) index /= 2;
  std::mt19937_64 rng(mix_seed(spec_.seed ^ 0x27d4eb2fULL, spec_.first_scene + index));
  const auto& prim = s.primitives[std::uniform_int_distribution<std::size_t>(0, s.primitives.size() - 1)(rng)];
  return Instruction{spec_.tasks[index % spec_.tasks.size()], prim.color_id}.id();
}

Episode SyntheticEpisodeSource::get(std::size_t index) const {
  if (index >= size()) throw std::out_of_range("episode source index");
  return generate_episode(scene(index), rig(index), instruction(index), spec_.env, spec_.max_steps);
}

DiskEpisodeSource::DiskEpisodeSource(std::filesystem::path dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".uvds") files_.push_back(e.path());
  std::sort(files_.begin(), files_.end());
}

Episode DiskEpisodeSource::get(std::size_t index) const { return read_uvds(files_.at(index)); }

std::string finetune_json(const FinetuneEpoch& m) {
  nlohmann::json j;
  j["epoch"] = m.epoch;
  j["steps"] = m.steps;
  j["loss"] = m.loss;
  j["pose"] = m.pose;
  j["gripper"] = m.gripper;
  j["wall_s"] = m.wall_s;
  return j.dump();
}

std::vector<FinetuneEpoch> finetune_run(ParamStore& store, const PolicyModelConfig& model, const EpisodeSource& demos,
                                        const FinetuneConfig& config, std::ostream* log) {
  if (demos.size() == 0) throw std::invalid_argument("finetune_run: empty demonstration set");
  if (config.window < 1 || config.epochs < 0) throw ConfigError("finetune_run: bad window or epochs");
  if (config.freeze_encoder)
    for (const auto& p : encoder_prefixes()) store.freeze(p);
  const auto start = std::chrono::steady_clock::now();
  const int H = model.policy.lstm_hidden;
  std::mt19937_64 rng(mix_seed(config.seed, 0x51ed));
  nn::AdamState adam(config.adam);

  // Frozen mode: per-episode encoder outputs plus demo labels, filled on first use.
  struct CachedEpisode {
    bool ready{false};
    int instruction_id{0};
    std::vector<CachedFrame> frames;
    std::vector<Action> actions;
  };
  std::vector<CachedEpisode> cache(config.freeze_encoder ? demos.size() : 0);

  std::vector<std::size_t> order(demos.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<FinetuneEpoch> history;
  int steps = 0;
  bool done = false;
  for (int epoch = 1; epoch <= config.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    FinetuneEpoch em;
    em.epoch = epoch;
    int windows = 0;
    for (std::size_t idx : order) {
      if (done) break;
      Episode ep;
      CachedEpisode* cached = nullptr;
      if (config.freeze_encoder) {
        cached = &cache[idx];
        if (!cached->ready) {
          ep = demos.get(idx);
          cached->instruction_id = ep.instruction_id;
          cached->actions = ep.actions;
          for (std::size_t t = 0; t < ep.actions.size(); ++t) {
            Tape tape;
            const Observation o = observe(tape, store, ep.frames[t].views, ep.rig, model);
            CachedFrame f;
            f.uf = o.uf.value().cast<float>();
            if (o.wrist) f.wrist = o.wrist->value().cast<float>();
            cached->frames.push_back(std::move(f));
          }
          cached->ready = true;
        }
      } else {
        ep = demos.get(idx);
      }
      const std::vector<Action>& actions = cached ? cached->actions : ep.actions;
      const int instruction_id = cached ? cached->instruction_id : ep.instruction_id;
      const std::size_t T = actions.size();
      Matrix h = Matrix::Zero(1, H), c = Matrix::Zero(1, H);
      for (std::size_t w0 = 0; w0 < T; w0 += static_cast<std::size_t>(config.window)) {
        if (config.max_steps > 0 && steps >= config.max_steps) {
          done = true;
          break;
        }
        const std::size_t w1 = std::min(T, w0 + static_cast<std::size_t>(config.window));
        Tape tape;
        nn::LstmState state{tape.constant(h), tape.constant(c)};
        const Var tokens = instruction_tokens(tape, store, instruction_id, model.policy.tokens);
        std::vector<PolicyOutput> outs;
        for (std::size_t t = w0; t < w1; ++t) {
          Observation o;
          if (cached) {
            o.uf = tape.constant(cached->frames[t].uf.cast<double>());
            if (model.policy.wrist) o.wrist = tape.constant(cached->frames[t].wrist.cast<double>());
          } else {
            o = observe(tape, store, ep.frames[t].views, ep.rig, model);
          }
          outs.push_back(policy_step(tape, store, fusion_decode(tape, store, o.uf, o.wrist, tokens, model), state));
          state = outs.back().state;
        }
        const ImitationLoss loss =
            imitation_loss(outs, std::span<const Action>(actions).subspan(w0, w1 - w0), config.lambda_gripper);
        tape.backward(loss.total);
        nn::adam_step(store, adam);
        ++steps;
        ++windows;
        em.loss += loss.total.scalar();
        em.pose += loss.pose.scalar();
        em.gripper += loss.gripper.scalar();
        h = state.h.value();
        c = state.c.value();
      }
    }
    if (windows > 0) {
      em.loss /= windows;
      em.pose /= windows;
      em.gripper /= windows;
    }
    em.steps = steps;
    em.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log) *log << finetune_json(em) << '\n' << std::flush;
    history.push_back(em);
  }
  return history;
}

PolicyRunner::PolicyRunner(ParamStore& store, const PolicyModelConfig& model) : store_(store), model_(model) {
  reset();
}

void PolicyRunner::reset() {
  h_ = Matrix::Zero(1, model_.policy.lstm_hidden);
  c_ = Matrix::Zero(1, model_.policy.lstm_hidden);
}

Action PolicyRunner::act(std::span<const RgbdImage> views, const Rig& rig, int instruction_id) {
  Tape tape;
  const Observation o = observe(tape, store_, views, rig, model_);
  const Var tokens = instruction_tokens(tape, store_, instruction_id, model_.policy.tokens);
  const PolicyOutput out = policy_step(tape, store_, fusion_decode(tape, store_, o.uf, o.wrist, tokens, model_),
                                       {tape.constant(h_), tape.constant(c_)});
  h_ = out.state.h.value();
  c_ = out.state.c.value();
  return to_action(out);
}

RolloutResult rollout(PolicyRunner& runner, EnvState& state, const Rig& rig, int instruction_id,
                      const EnvConfig& env, int max_steps) {
  RolloutResult r;
  r.trajectory.push_back(state.gripper_pos);
  for (int t = 0; t < max_steps; ++t) {
    const auto views = render_rig(scene_with_gripper(state, env), rig);
    state = step(state, runner.act(views, rig, instruction_id), env);
    r.trajectory.push_back(state.gripper_pos);
    r.steps = t + 1;
    if (success(state, instruction_id, env)) {
      r.success = true;
      break;
    }
  }
  return r;
}

ChainResult rollout_chain(PolicyRunner& runner, const SceneSpec& scene, const Rig& rig,
                          std::span<const int> instructions, const EnvConfig& env, int max_steps) {
  ChainResult c;
  c.completed.assign(instructions.size(), 0);
  EnvState state = initial_state(scene, env);
  for (std::size_t k = 0; k < instructions.size(); ++k) {
    runner.reset();
    const RolloutResult r = rollout(runner, state, rig, instructions[k], env, max_steps);
    c.steps += r.steps;
    if (!r.success) break;
    c.completed[k] = 1;
  }
  return c;
}

PolicyEvalSummary eval_policy(ParamStore& store, const PolicyModelConfig& model, const PolicyEvalSpec& spec,
                              std::ostream* report) {
  if (spec.chain < 1 || spec.tasks.empty()) throw ConfigError("eval_policy: chain must be >= 1 with tasks");
  PolicyEvalSummary sum;
  sum.chain_success.assign(static_cast<std::size_t>(spec.chain), 0);
  PolicyRunner runner(store, model);
  SceneConfig sc = spec.scene;
  sc.min_objects = std::max(sc.min_objects, std::min(spec.chain, sc.max_objects));
  long total_steps = 0;
  int successes = 0;
  for (int e = 0; e < spec.episodes; ++e) {
    const std::uint64_t env_seed = mix_seed(spec.seed, spec.first_scene + static_cast<std::uint64_t>(e));
    const SceneSpec scene = sample_scene(env_seed, sc);
    const Rig rig = spec.rig ? *spec.rig : sample_rig(spec.family, mix_seed(env_seed, 0x7269));
    std::mt19937_64 rng(mix_seed(env_seed, 0x696e));
    std::vector<std::size_t> objs(scene.primitives.size());
    std::iota(objs.begin(), objs.end(), std::size_t{0});
    std::shuffle(objs.begin(), objs.end(), rng);
    std::vector<int> chain;
    for (int k = 0; k < spec.chain && k < static_cast<int>(objs.size()); ++k)
      chain.push_back(Instruction{spec.tasks[static_cast<std::size_t>(e + k) % spec.tasks.size()],
                                  scene.primitives[objs[static_cast<std::size_t>(k)]].color_id}
                          .id());
    const ChainResult r = rollout_chain(runner, scene, rig, chain, spec.env, spec.max_steps);
    int done = 0;
    while (done < static_cast<int>(r.completed.size()) && r.completed[static_cast<std::size_t>(done)]) ++done;
    for (int k = 0; k < done; ++k) ++sum.chain_success[static_cast<std::size_t>(k)];
    const bool ok = done == spec.chain;
    successes += ok;
    total_steps += r.steps;
    if (report) {
      nlohmann::json j;
      j["instruction_id"] = chain.front();
      j["env_seed"] = env_seed;
      j["rig_id"] = spec.rig ? 0 : e;
      j["success"] = ok;
      j["steps"] = r.steps;
      if (spec.chain > 1) j["chain"] = chain;
      *report << j.dump() << '\n';
    }
  }
  sum.episodes = spec.episodes;
  if (spec.episodes > 0) {
    sum.success_rate = static_cast<double>(successes) / spec.episodes;
    sum.mean_steps = static_cast<double>(total_steps) / spec.episodes;
  }
  if (report) {
    nlohmann::json j;
    j["summary"] = true;
    j["episodes"] = sum.episodes;
    j["success_rate"] = sum.success_rate;
    j["mean_steps"] = sum.mean_steps;
    j["chain_success"] = sum.chain_success;
    *report << j.dump() << '\n' << std::flush;
  }
  return sum;
}

}  // namespace uniview
