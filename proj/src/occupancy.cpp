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

#include "uniview/occupancy.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "uniview/errors.hpp"
#include "uniview/rig_io.hpp"
#include "uniview/uvds.hpp"

namespace uniview {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

/// Shared image size of a set of views; mixed sizes are rejected.
std::pair<int, int> view_size(std::span<const RgbdImage> views) {
  require(!views.empty(), "no camera views");
  for (const auto& v : views)
    require(v.height == views[0].height && v.width == views[0].width, "all cameras must share one image size");
  return {views[0].height, views[0].width};
}

bool same_grid(const Grid& a, const Grid& b) {
  return a.dims == b.dims && a.origin == b.origin && a.cell_size == b.cell_size;
}

}  // namespace

void init_occ_decoder(ParamStore& store, const UvFormerConfig& config, std::mt19937_64& rng) {
  const int C = config.channels, P = config.points();
  store.add_normal("occ.conv1.w", {9 * C, C}, std::sqrt(2.0 / (9.0 * C)), rng);
  store.add_constant("occ.conv1.b", {C}, 0.0);
  store.add_normal("occ.conv2.w", {9 * C, 4 * P}, std::sqrt(1.0 / (9.0 * C)), rng);
  store.add_constant("occ.conv2.b", {4 * P}, 0.0);
}

void init_occ_model(ParamStore& store, const OccModelConfig& config, std::uint64_t seed) {
  config.uv.validate();
  std::mt19937_64 rng(seed);
  init_backbone(store, config.uv.channels, rng);
  if (config.baseline) {
    const int in = config.baseline_cameras * config.baseline_pool * config.baseline_pool * config.uv.channels;
    add_dense(store, "baseline.fc1.", in, config.baseline_hidden, rng);
    add_dense(store, "baseline.fc2.", config.baseline_hidden, config.uv.pillars() * 4 * config.uv.points(), rng);
  } else {
    init_uvformer(store, config.uv, rng, mix_seed(seed, 1));
    init_occ_decoder(store, config.uv, rng);
  }
}

OccPrediction split_occ_channels(Var raw, int P) {
  require(raw.cols() == 4 * P, "occupancy map must have 4P channels");
  const Index cells = raw.rows() * P;
  return {nn::reshape(nn::slice_cols(raw, 0, P), cells, 1),
          nn::reshape(nn::sigmoid(nn::slice_cols(raw, P, 3 * P)), cells, 3)};
}

OccPrediction occ_decode(Tape& tape, ParamStore& store, Var uf, const Grid& grid) {
  const int L = grid.dims[0], B = grid.dims[1];
  require(uf.rows() == static_cast<Index>(L) * B, "occ_decode: UF rows differ from L*B");
  Var x = nn::relu(nn::conv3x3(uf, L, B, tape.param(store, "occ.conv1.w"), tape.param(store, "occ.conv1.b"), 1));
  x = nn::conv3x3(x, L, B, tape.param(store, "occ.conv2.w"), tape.param(store, "occ.conv2.b"), 1);
  return split_occ_channels(x, grid.dims[2]);
}

OccPrediction occ_forward(Tape& tape, ParamStore& store, std::span<const Matrix> images, int height, int width,
                          const Rig& rig, const OccModelConfig& config) {
  require(images.size() == rig.size(), "occ_forward: one image per camera required");
  if (!config.baseline)
    return occ_decode(tape, store, encode_views(tape, store, images, height, width, rig, config.uv), config.uv.grid);
  require(static_cast<int>(images.size()) == config.baseline_cameras,
          "baseline head needs exactly baseline_cameras cameras");
  const FeatureMaps f = vision_backbone(tape, store, images, height, width);
  std::vector<Var> pooled;
  const int pool = config.baseline_pool;
  for (const Var& m : f.maps)
    pooled.push_back(nn::reshape(nn::avg_pool_grid(m, f.height, f.width, pool, pool), 1,
                                 static_cast<Index>(pool) * pool * m.cols()));
  Var h = nn::relu(apply_dense(tape, store, "baseline.fc1.", nn::concat_cols(pooled)));
  h = apply_dense(tape, store, "baseline.fc2.", h);
  return split_occ_channels(nn::reshape(h, config.uv.pillars(), 4 * config.uv.points()), config.uv.points());
}

PretrainLoss pretrain_loss(const OccPrediction& pred, const VoxelGrid& gt, double lambda_rgb) {
  require(pred.logits.rows() == gt.occ.size() && pred.rgb.rows() == gt.rgb.rows(),
          "pretrain_loss: prediction and ground truth sizes differ");
  if (lambda_rgb < 0) throw ConfigError("lambda_rgb must be non-negative");
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(gt.occ.size()));
  for (Index i = 0; i < gt.occ.size(); ++i) mask[static_cast<std::size_t>(i)] = gt.occ[i] > 0.5;
  const Var ce = nn::bce_logits(pred.logits, Matrix(gt.occ));
  const Var l1 = nn::l1_masked(pred.rgb, Matrix(gt.rgb), mask);
  return {nn::add(ce, nn::scale(l1, lambda_rgb)), ce, l1};
}

VoxelGrid to_voxel_grid(const OccPrediction& pred, const Grid& grid) {
  VoxelGrid v(grid);
  require(pred.logits.rows() == grid.cell_count(), "prediction size differs from the grid");
  for (Index i = 0; i < v.occ.size(); ++i) v.occ[i] = nn::kernel::sigmoid(pred.logits.value()(i, 0));
  v.rgb = pred.rgb.value();
  return v;
}

VoxelGrid ground_truth(std::span<const RgbdImage> views, const Rig& rig, const Grid& grid) {
  const auto points = rgbd_to_points(views, rig);
  return voxelize(points, grid);
}

SyntheticOccSource::SyntheticOccSource(SyntheticOccSpec spec) : spec_(std::move(spec)) {
  if (spec_.scenes < 0 || spec_.rigs_per_scene < 1) throw ConfigError("synthetic source: bad sizes");
}

std::size_t SyntheticOccSource::size() const {
  return static_cast<std::size_t>(spec_.scenes) * static_cast<std::size_t>(spec_.rigs_per_scene);
}

SceneSpec SyntheticOccSource::scene(std::size_t index) const {
  const std::uint64_t s = spec_.first_scene + index / static_cast<std::size_t>(spec_.rigs_per_scene);
  const SceneSpec base = sample_scene(mix_seed(spec_.seed, s), spec_.scene);
  return spec_.gripper ? with_random_gripper(base, mix_seed(spec_.seed ^ 0x2545f491ULL, s), EnvConfig{}) : base;
}

Rig SyntheticOccSource::rig(std::size_t index) const {
  const std::uint64_t s = spec_.first_scene + index / static_cast<std::size_t>(spec_.rigs_per_scene);
  const std::uint64_t r = index % static_cast<std::size_t>(spec_.rigs_per_scene);
  return sample_rig(spec_.family, mix_seed(mix_seed(spec_.seed ^ 0x5bd1e995ULL, s), r));
}

OccSample SyntheticOccSource::get(std::size_t index) const {
  if (index >= size()) throw std::out_of_range("synthetic source index");
  OccSample s;
  s.scene = scene(index);
  s.rig = rig(index);
  s.views = render_rig(*s.scene, s.rig);
  s.gt = ground_truth(s.views, s.rig, spec_.grid);
  return s;
}

DiskOccSource::DiskOccSource(std::filesystem::path dir, Grid grid) : dir_(std::move(dir)), grid_(grid) {
  if (!std::filesystem::is_directory(dir_)) throw IoError("not a directory: " + dir_.string());
  for (const auto& e : std::filesystem::directory_iterator(dir_))
    if (e.path().extension() == ".uvds") stems_.push_back(e.path().stem().string());
  std::sort(stems_.begin(), stems_.end());
}

OccSample DiskOccSource::get(std::size_t index) const {
  const std::string& stem = stems_.at(index);
  Episode ep = read_uvds(dir_ / (stem + ".uvds"));
  if (ep.frames.empty()) throw IoError(stem + ".uvds holds no frames");
  OccSample s;
  s.rig = ep.rig;
  s.views = std::move(ep.frames[0].views);
  const auto vox = dir_ / (stem + ".uvvx");
  bool have_gt = false;
  if (std::filesystem::exists(vox)) {
    VoxelGrid v = read_voxels(vox);
    if (same_grid(v.grid, grid_)) {
      s.gt = std::move(v);
      have_gt = true;
    }
  }
  if (!have_gt) s.gt = ground_truth(s.views, s.rig, grid_);
  const auto scene = dir_ / (stem + ".scene.json");
  if (std::filesystem::exists(scene)) s.scene = load_scene(scene);
  return s;
}

RigOverrideSource::RigOverrideSource(const OccSource& base, Rig rig) : base_(base), rig_(std::move(rig)) {
  rig_->validate();
}

RigOverrideSource::RigOverrideSource(const OccSource& base, RigFamily family, std::uint64_t seed)
    : base_(base), family_(family), seed_(seed) {}

OccSample RigOverrideSource::get(std::size_t index) const {
  OccSample s = base_.get(index);
  if (!s.scene) throw IoError("rig override needs the scene description of every sample");
  s.rig = rig_ ? *rig_ : sample_rig(*family_, mix_seed(seed_, index));
  s.views = render_rig(*s.scene, s.rig);
  return s;
}

std::string metrics_json(const EpochMetrics& m) {
  nlohmann::json j;
  j["epoch"] = m.epoch;
  j["loss"] = m.loss;
  j["ce"] = m.ce;
  j["l1"] = m.l1;
  j["iou"] = m.heldout.iou;
  j["rgb_mae"] = m.heldout.rgb_mae;
  j["wall_s"] = m.wall_s;
  return j.dump();
}

VoxelGrid predict_voxels(ParamStore& store, const OccModelConfig& model, const OccSample& sample) {
  const auto [h, w] = view_size(sample.views);
  const std::vector<Matrix> imgs = images_from_views(sample.views);
  Tape tape;
  return to_voxel_grid(occ_forward(tape, store, imgs, h, w, sample.rig, model), model.uv.grid);
}

OccMetrics eval_occ(ParamStore& store, const OccModelConfig& model, const OccSource& data, double threshold) {
  OccMetrics m;
  if (data.size() == 0) return m;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const OccSample s = data.get(i);
    VoxelGrid pred = predict_voxels(store, model, s);
    VoxelGrid gt = s.gt;
    if (!same_grid(gt.grid, pred.grid)) {
      // Coarser predictions are scored on the ground-truth grid.
      pred = resample_to(pred, gt.grid);
    }
    m.iou += occupancy_iou(pred, gt, threshold);
    m.rgb_mae += rgb_mae(pred, gt);
  }
  m.iou /= static_cast<double>(data.size());
  m.rgb_mae /= static_cast<double>(data.size());
  return m;
}

std::vector<EpochMetrics> pretrain_run(ParamStore& store, const OccModelConfig& model, const OccSource& train,
                                       const OccSource* heldout, const PretrainConfig& config, std::ostream* log) {
  if (train.size() == 0) throw std::invalid_argument("pretrain_run: empty training set");
  if (config.batch_size < 1 || config.epochs < 0) throw ConfigError("pretrain_run: bad batch size or epochs");
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(mix_seed(config.seed, 0x9e37));
  nn::AdamState adam(config.adam);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochMetrics> history;
  int steps = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochMetrics em;
    em.epoch = epoch;
    std::size_t seen = 0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(config.batch_size)) {
      if (config.max_steps > 0 && steps >= config.max_steps) break;
      const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(config.batch_size));
      const double weight = 1.0 / static_cast<double>(b1 - b0);
      for (std::size_t k = b0; k < b1; ++k) {
        const OccSample s = train.get(order[k]);
        require(same_grid(s.gt.grid, model.uv.grid), "training ground truth grid differs from the model grid");
        const auto [h, w] = view_size(s.views);
        const std::vector<Matrix> imgs = images_from_views(s.views);
        Tape tape;
        const OccPrediction pred = occ_forward(tape, store, imgs, h, w, s.rig, model);
        const PretrainLoss loss = pretrain_loss(pred, s.gt, config.lambda_rgb);
        tape.backward(loss.total, weight);
        em.loss += loss.total.scalar();
        em.ce += loss.ce.scalar();
        em.l1 += loss.l1.scalar();
        ++seen;
      }
      nn::adam_step(store, adam);
      ++steps;
    }
    if (seen > 0) {
      em.loss /= static_cast<double>(seen);
      em.ce /= static_cast<double>(seen);
      em.l1 /= static_cast<double>(seen);
    }
    if (heldout) em.heldout = eval_occ(store, model, *heldout, config.threshold);
    em.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log) *log << metrics_json(em) << '\n' << std::flush;
    history.push_back(em);
    if (config.max_steps > 0 && steps >= config.max_steps) break;
  }
  return history;
}

}  // namespace uniview
