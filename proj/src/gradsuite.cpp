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

#include "uniview/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "uniview/errors.hpp"
#include "uniview/nn/gradcheck.hpp"
#include "uniview/nn/ops.hpp"
#include "uniview/occupancy.hpp"
#include "uniview/policy.hpp"

namespace uniview {
namespace {

using nn::GradCheckResult;
using nn::InputLossFn;

constexpr double kSmooth = 1e-6;
constexpr double kComposite = 1e-4;

Matrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// Random linear read-out so every output coordinate reaches the loss with its own weight.
Var project(Tape& t, Var y, std::uint64_t seed = 99) {
  return nn::sum_all(nn::mul(y, t.constant(random_matrix(y.rows(), y.cols(), seed))));
}

Grid micro_grid() {
  Grid g;
  g.dims = {2, 2, 2};
  g.cell_size = Vec3(0.5, 0.5, 0.25);
  return g;
}

Rig micro_rig() {
  Cam c;
  c.intrinsics = {30, 30, 16, 16, 32, 32};
  c.pose = look_at<double>(Vec3(0.5, -0.9, 1.1), Vec3(0.5, 0.5, 0.1));
  Rig rig;
  rig.cameras = {c};
  return rig;
}

std::vector<Matrix> micro_images(std::uint64_t seed) {
  return {(random_matrix(32 * 32, 3, seed, 0.2).array() + 0.5).matrix()};
}

/// Seeded noise on every parameter; offset and weight predictors stay small so samples stay
/// near their reference points.
void randomize(ParamStore& store, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& [name, t] : store.params()) {
    const bool predictor = name.find("offset") != std::string::npos || name.find("weight.") != std::string::npos;
    std::normal_distribution<double> n(0.0, predictor ? 0.02 : 0.2);
    for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += n(rng);
  }
}

class Suite {
 public:
  Suite(std::string module, std::ostream* log) : module_(std::move(module)), log_(log) {}

  void add(const std::string& name, const GradCheckResult& r, double tol) {
    GradSuiteResult out{module_, name, r.max_rel_error, tol, r.checked};
    if (log_)
      *log_ << (out.pass() ? "ok   " : "FAIL ") << module_ << '/' << name << "  max_rel_err " << r.max_rel_error
            << "  checked " << r.checked << (out.pass() ? "" : "  worst " + r.worst) << '\n';
    results_.push_back(out);
  }
  void inputs(const std::string& name, const InputLossFn& f, std::vector<Matrix> in, double tol) {
    add(name, nn::grad_check(f, std::move(in)), tol);
  }
  std::vector<GradSuiteResult> take() { return std::move(results_); }

 private:
  std::string module_;
  std::ostream* log_;
  std::vector<GradSuiteResult> results_;
};

void numerics(Suite& s) {
  using Span = std::span<const Var>;
  const Matrix a = random_matrix(3, 4, 10), b = random_matrix(3, 4, 11), w = random_matrix(4, 5, 12);
  const Matrix labels = (random_matrix(3, 4, 16).array() > 0).cast<double>();
  s.inputs("matmul", [](Tape& t, Span v) { return project(t, nn::matmul(v[0], v[1])); }, {a, w}, kSmooth);
  s.inputs("transpose", [](Tape& t, Span v) { return project(t, nn::transpose(v[0])); }, {a}, kSmooth);
  s.inputs("add", [](Tape& t, Span v) { return project(t, nn::add(v[0], v[1])); }, {a, b}, kSmooth);
  s.inputs("sub", [](Tape& t, Span v) { return project(t, nn::sub(v[0], v[1])); }, {a, b}, kSmooth);
  s.inputs("mul", [](Tape& t, Span v) { return project(t, nn::mul(v[0], v[1])); }, {a, b}, kSmooth);
  s.inputs("scale", [](Tape& t, Span v) { return project(t, nn::scale(v[0], -2.5)); }, {a}, kSmooth);
  s.inputs("add_row", [](Tape& t, Span v) { return project(t, nn::add_row(v[0], v[1])); },
           {a, random_matrix(1, 4, 13)}, kSmooth);
  s.inputs("affine", [](Tape& t, Span v) { return project(t, nn::affine(v[0], v[1], v[2])); },
           {a, w, random_matrix(1, 5, 17)}, kSmooth);
  s.inputs("linear", [](Tape& t, Span v) { return project(t, nn::linear(v[0], v[1])); }, {a, w}, kSmooth);
  s.inputs("sigmoid", [](Tape& t, Span v) { return project(t, nn::sigmoid(v[0])); }, {a}, kSmooth);
  s.inputs("tanh", [](Tape& t, Span v) { return project(t, nn::tanh(v[0])); }, {a}, kSmooth);
  s.inputs("layer_norm", [](Tape& t, Span v) { return project(t, nn::layer_norm(v[0], v[1], v[2])); },
           {a, random_matrix(1, 4, 14), random_matrix(1, 4, 15)}, kSmooth);
  s.inputs("softmax_rows", [](Tape& t, Span v) { return project(t, nn::softmax_rows(v[0])); }, {a}, kSmooth);
  s.inputs("sum_all", [](Tape&, Span v) { return nn::sum_all(v[0]); }, {a}, kSmooth);
  s.inputs("mean_all", [](Tape&, Span v) { return nn::mean_all(v[0]); }, {a}, kSmooth);
  s.inputs("reshape", [](Tape& t, Span v) { return project(t, nn::reshape(v[0], 2, 6)); }, {a}, kSmooth);
  s.inputs("slice_cols", [](Tape& t, Span v) { return project(t, nn::slice_cols(v[0], 1, 2)); }, {a}, kSmooth);
  s.inputs("slice_rows", [](Tape& t, Span v) { return project(t, nn::slice_rows(v[0], 1, 2)); }, {a}, kSmooth);
  s.inputs("concat",
           [](Tape& t, Span v) {
             const std::vector<Var> r{v[0], v[1]};
             return nn::add(project(t, nn::concat_rows(r), 1), project(t, nn::concat_cols(r), 2));
           },
           {a, b}, kSmooth);
  s.inputs("mask_rows", [](Tape& t, Span v) { return project(t, nn::mask_rows(v[0], {1, 0, 1})); }, {a}, kSmooth);
  s.inputs("select_rows", [](Tape& t, Span v) { return project(t, nn::select_rows({1, 0, 0}, v[0], v[1])); },
           {a, b}, kSmooth);
  s.inputs("mse", [&](Tape&, Span v) { return nn::mse(v[0], b); }, {a}, kSmooth);
  s.inputs("bce_logits", [&](Tape&, Span v) { return nn::bce_logits(v[0], labels); }, {a}, kSmooth);
  s.inputs("cross_entropy", [](Tape&, Span v) { return nn::cross_entropy_logits(v[0], {0, 3, 1}); }, {a}, kSmooth);
  s.inputs("conv3x3", [](Tape& t, Span v) { return project(t, nn::conv3x3(v[0], 4, 5, v[1], v[2], 1)); },
           {random_matrix(20, 2, 18), random_matrix(18, 3, 19), random_matrix(1, 3, 20)}, kSmooth);
  s.inputs("conv3x3_stride2", [](Tape& t, Span v) { return project(t, nn::conv3x3(v[0], 5, 4, v[1], v[2], 2)); },
           {random_matrix(20, 2, 21), random_matrix(18, 3, 22), random_matrix(1, 3, 23)}, kSmooth);
  s.inputs("avg_pool_grid", [](Tape& t, Span v) { return project(t, nn::avg_pool_grid(v[0], 4, 4, 2, 2)); },
           {random_matrix(16, 3, 24)}, kSmooth);
  s.inputs("lstm_cell",
           [](Tape& t, Span v) {
             nn::LstmState st{v[1], v[2]};
             for (int k = 0; k < 2; ++k) st = nn::lstm_cell(v[0], st, v[3], v[4], v[5]);
             return nn::add(project(t, st.h, 1), project(t, st.c, 2));
           },
           {random_matrix(1, 3, 25), random_matrix(1, 2, 26), random_matrix(1, 2, 27), random_matrix(3, 8, 28),
            random_matrix(2, 8, 29), random_matrix(1, 8, 30)},
           kSmooth);

  // Piecewise-linear ops, inputs kept off their kinks.
  Matrix p = random_matrix(4, 3, 40);
  for (Index i = 0; i < p.size(); ++i)
    if (std::abs(p.data()[i]) < 0.1) p.data()[i] = p.data()[i] < 0 ? -0.5 : 0.5;
  const Matrix target = p + random_matrix(4, 3, 41, 0.1).cwiseAbs() + Matrix::Constant(4, 3, 0.1);
  s.inputs("relu", [](Tape& t, Span v) { return project(t, nn::relu(v[0])); }, {p}, kSmooth);
  s.inputs("l1", [&](Tape&, Span v) { return nn::l1(v[0], target); }, {p}, kSmooth);
  s.inputs("l1_masked", [&](Tape&, Span v) { return nn::l1_masked(v[0], target, {1, 0, 1, 1}); }, {p}, kSmooth);
  s.inputs("max_pool_rows", [](Tape& t, Span v) { return project(t, nn::max_pool_rows(v[0])); }, {p}, kSmooth);

  // Bilinear sampling at 100 interior points; the worst one is reported.
  GradCheckResult worst;
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0.02, 0.98);
  const Matrix fmap = random_matrix(12, 2, 42);
  for (int k = 0; k < 100; ++k) {
    Matrix uv(1, 2);
    uv << u(rng), u(rng);
    const GradCheckResult r = nn::grad_check(
        [](Tape& t, Span v) { return project(t, nn::bilinear_sample(v[0], 3, 4, v[1])); }, {fmap, uv});
    worst.checked += r.checked;
    if (r.max_rel_error >= worst.max_rel_error) {
      worst.max_rel_error = r.max_rel_error;
      worst.worst = r.worst;
    }
  }
  s.add("bilinear_sample", worst, kSmooth);
}

void uvformer(Suite& s) {
  UvFormerConfig cfg;
  cfg.grid = micro_grid();
  cfg.channels = 8;
  const Rig rig = micro_rig();
  {
    ParamStore store;
    std::mt19937_64 rng(3);
    init_backbone(store, 8, rng);
    randomize(store, 4);
    const std::vector<Matrix> imgs{random_matrix(256, 3, 5, 0.3)};
    s.add("backbone",
          nn::grad_check_params(
              [&](Tape& t, ParamStore& st) { return project(t, vision_backbone(t, st, imgs, 16, 16).maps[0]); }, store),
          kComposite);
  }
  ParamStore store;
  std::mt19937_64 rng(41);
  init_backbone(store, cfg.channels, rng);
  init_uvformer(store, cfg, rng, 42);
  randomize(store, 43);
  const ProjectionTable table = build_projection_table(query_positions(cfg.grid), rig, 4, 4);
  const Matrix fmap = random_matrix(16, 8, 44);
  s.inputs("spatial_cross_attention.inputs",
           [&](Tape& t, std::span<const Var> in) {
             FeatureMaps f;
             f.height = f.width = 4;
             f.maps.push_back(in[0]);
             return project(t, spatial_cross_attention(t, store, "uvformer.l0.sca.", in[1], f, table, cfg));
           },
           {fmap, store.at("queries.emb").value}, kComposite);
  const Matrix x = random_matrix(4, 8, 45);
  s.inputs("self_attention.inputs",
           [&](Tape& t, std::span<const Var> in) {
             return project(t, softmax_free_self_attention(t, store, "uvformer.l0.sa.", in[0]));
           },
           {x}, kSmooth);
  s.inputs("feed_forward.inputs",
           [&](Tape& t, std::span<const Var> in) {
             return project(t, feed_forward(t, store, "uvformer.l0.ffn1.", in[0]));
           },
           {x}, kComposite);
  const std::vector<Matrix> imgs = micro_images(94);
  s.add("encoder.params",
        nn::grad_check_params(
            [&](Tape& t, ParamStore& st) { return project(t, encode_views(t, st, imgs, 32, 32, rig, cfg)); }, store,
            1e-4, 12),
        kComposite);
}

void occupancy(Suite& s) {
  for (const bool baseline : {false, true}) {
    OccModelConfig m;
    m.uv.grid = micro_grid();
    m.uv.channels = 8;
    m.baseline = baseline;
    m.baseline_cameras = 1;
    m.baseline_hidden = 16;
    ParamStore store;
    init_occ_model(store, m, 21);
    randomize(store, 22);
    const Rig rig = micro_rig();
    const std::vector<Matrix> imgs = micro_images(23);
    VoxelGrid gt(m.uv.grid);
    std::mt19937_64 rng(24);
    std::uniform_real_distribution<double> u(0, 1);
    for (Index i = 0; i < gt.occ.size(); ++i) {
      gt.occ[i] = u(rng) < 0.4;
      for (int k = 0; k < 3; ++k) gt.rgb(i, k) = gt.occ[i] > 0 ? u(rng) : 0.0;
    }
    s.add(baseline ? "baseline_objective.params" : "pretrain_objective.params",
          nn::grad_check_params(
              [&](Tape& t, ParamStore& st) {
                return pretrain_loss(occ_forward(t, st, imgs, 32, 32, rig, m), gt, 1.0).total;
              },
              store, 1e-4, 10),
          kComposite);
  }
}

void policy(Suite& s) {
  PolicyModelConfig m;
  m.uv.grid = micro_grid();
  m.uv.channels = 8;
  m.uv.layers = 1;
  m.policy.tokens = 2;
  m.policy.decoder_layers = 1;
  m.policy.lstm_hidden = 4;
  m.policy.mlp_hidden = 6;
  ParamStore store;
  init_policy_model(store, m, 13);
  randomize(store, 14);
  const Rig rig = micro_rig();
  const std::vector<std::vector<Matrix>> frames{micro_images(15), micro_images(16)};
  std::vector<Action> demo(2);
  demo[0].dpos = Vec3(0.02, -0.01, 0.0);
  demo[1].drot = Vec3(0.0, 0.05, -0.02);
  demo[1].close = true;
  for (const bool wrist : {false, true}) {
    m.policy.wrist = wrist;
    s.add(wrist ? "imitation_objective_wrist.params" : "imitation_objective.params",
          nn::grad_check_params(
              [&](Tape& t, ParamStore& st) {
                nn::LstmState state = zero_lstm_state(t, m.policy.lstm_hidden);
                const Var tok = instruction_tokens(t, st, 3, m.policy.tokens);
                std::vector<PolicyOutput> outs;
                for (const auto& imgs : frames) {
                  const FeatureMaps f = vision_backbone(t, st, imgs, 32, 32);
                  const ProjectionTable table =
                      build_projection_table(query_positions(m.uv.grid), rig, f.height, f.width);
                  const Var uf = uvformer_forward(t, st, f, table, m.uv);
                  const std::optional<Var> w = wrist ? std::optional<Var>(f.maps[0]) : std::nullopt;
                  outs.push_back(policy_step(t, st, fusion_decode(t, st, uf, w, tok, m), state));
                  state = outs.back().state;
                }
                return imitation_loss(outs, demo, 0.5).total;
              },
              store, 1e-4, 8),
          kComposite);
  }
}

}  // namespace

std::vector<GradSuiteResult> run_grad_suite(const std::string& module, std::ostream* log) {
  const std::vector<std::pair<std::string, std::function<void(Suite&)>>> parts{
      {"numerics", numerics}, {"uvformer", uvformer}, {"occupancy", occupancy}, {"policy", policy}};
  std::vector<GradSuiteResult> out;
  bool known = module == "all";
  for (const auto& [name, fn] : parts) {
    if (module != "all" && module != name) continue;
    known = true;
    Suite s(name, log);
    fn(s);
    auto r = s.take();
    out.insert(out.end(), r.begin(), r.end());
  }
  if (!known) throw ConfigError("unknown gradcheck module '" + module + "'");
  return out;
}

}  // namespace uniview
