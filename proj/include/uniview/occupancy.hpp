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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uniview/env.hpp"
#include "uniview/nn/adam.hpp"
#include "uniview/scene.hpp"
#include "uniview/uvformer.hpp"
#include "uniview/voxel.hpp"

namespace uniview {

/// Occupancy model: backbone + UVFormer + convolutional decoder, or the no-UVFormer baseline
/// that maps pooled backbone features straight to the grid through an MLP.
struct OccModelConfig {
  UvFormerConfig uv;
  bool baseline{false};
  int baseline_cameras{3};
  int baseline_pool{4};     // each camera map is average-pooled to pool x pool
  int baseline_hidden{256};
};

void init_occ_decoder(ParamStore& store, const UvFormerConfig& config, std::mt19937_64& rng);
void init_occ_model(ParamStore& store, const OccModelConfig& config, std::uint64_t seed);

/// Per-cell outputs in flat (l, b, p) order: logits (L*B*P x 1), rgb in [0,1] (L*B*P x 3).
struct OccPrediction {
  Var logits;
  Var rgb;
};

/// Splits an (L*B x 4P) map into P occupancy logits and 3P rgb logits per pillar.
OccPrediction split_occ_channels(Var raw, int points);

/// conv3x3 C -> C (relu) -> 4P over the (L, B) grid.
OccPrediction occ_decode(Tape& tape, ParamStore& store, Var uf, const Grid& grid);

OccPrediction occ_forward(Tape& tape, ParamStore& store, std::span<const Matrix> images, int height, int width,
                          const Rig& rig, const OccModelConfig& config);

struct PretrainLoss {
  Var total, ce, l1;
};

/// Mean BCE over all cells plus lambda_rgb times the L1 color error over gt-occupied cells.
PretrainLoss pretrain_loss(const OccPrediction& pred, const VoxelGrid& gt, double lambda_rgb);

/// Occupancy probabilities and colors as a voxel grid.
VoxelGrid to_voxel_grid(const OccPrediction& pred, const Grid& grid);

/// One pre-training example: multi-view observation plus voxel ground truth.
struct OccSample {
  std::vector<RgbdImage> views;
  Rig rig;
  VoxelGrid gt;
  std::optional<SceneSpec> scene;  // when known, allows re-rendering under another rig
};

class OccSource {
 public:
  virtual ~OccSource() = default;
  virtual std::size_t size() const = 0;
  virtual OccSample get(std::size_t index) const = 0;
};

/// Scenes and rigs drawn from seeds; each sample is rendered and voxelized on demand.
/// Sample i uses scene first_scene + i / rigs_per_scene and rig i % rigs_per_scene.
struct SyntheticOccSpec {
  int scenes{500};
  int rigs_per_scene{4};
  std::uint64_t seed{0};
  std::uint64_t first_scene{0};
  RigFamily family = RigFamily::seen();
  SceneConfig scene;
  Grid grid;
  bool gripper{true};  // draw the gripper sphere at a random free position
};

class SyntheticOccSource : public OccSource {
 public:
  explicit SyntheticOccSource(SyntheticOccSpec spec);
  std::size_t size() const override;
  OccSample get(std::size_t index) const override;
  SceneSpec scene(std::size_t index) const;
  Rig rig(std::size_t index) const;

 private:
  SyntheticOccSpec spec_;
};

/// Directory written by gen-data: sample_NNNNN.{uvds,uvvx,scene.json}. The voxel sidecar
/// is used when its grid matches; otherwise ground truth is re-voxelized from the views.
class DiskOccSource : public OccSource {
 public:
  DiskOccSource(std::filesystem::path dir, Grid grid);
  std::size_t size() const override { return stems_.size(); }
  OccSample get(std::size_t index) const override;

 private:
  std::filesystem::path dir_;
  Grid grid_;
  std::vector<std::string> stems_;
};

/// Same scenes and ground truth as `base`, but inputs re-rendered under other rigs: either a
/// fixed rig or a fresh draw from a rig family per sample.
class RigOverrideSource : public OccSource {
 public:
  RigOverrideSource(const OccSource& base, Rig rig);
  RigOverrideSource(const OccSource& base, RigFamily family, std::uint64_t seed);
  std::size_t size() const override { return base_.size(); }
  OccSample get(std::size_t index) const override;

 private:
  const OccSource& base_;
  std::optional<Rig> rig_;
  std::optional<RigFamily> family_;
  std::uint64_t seed_{0};
};

/// Ground truth for a multi-view observation.
VoxelGrid ground_truth(std::span<const RgbdImage> views, const Rig& rig, const Grid& grid);

struct PretrainConfig {
  int epochs{4};
  int batch_size{4};
  nn::AdamConfig adam{1e-3};
  double lambda_rgb{1.0};
  std::uint64_t seed{0};
  double threshold{0.5};
  int max_steps{0};  // stop after this many optimizer steps when > 0
};

struct OccMetrics {
  double iou{0};
  double rgb_mae{0};
};

struct EpochMetrics {
  int epoch{0};
  double loss{0}, ce{0}, l1{0};
  OccMetrics heldout;
  double wall_s{0};
};

/// JSON-lines record {epoch, loss, ce, l1, iou, rgb_mae, wall_s}.
std::string metrics_json(const EpochMetrics& m);

/// Trains every unfrozen parameter of `store`; one metrics line per epoch goes to `log` when
/// non-null. Throws std::invalid_argument on an empty training set.
std::vector<EpochMetrics> pretrain_run(ParamStore& store, const OccModelConfig& model, const OccSource& train,
                                       const OccSource* heldout, const PretrainConfig& config,
                                       std::ostream* log = nullptr);

/// Mean IoU at `threshold` and mean RGB MAE on gt-occupied cells.
OccMetrics eval_occ(ParamStore& store, const OccModelConfig& model, const OccSource& data, double threshold = 0.5);

/// Prediction for one sample.
VoxelGrid predict_voxels(ParamStore& store, const OccModelConfig& model, const OccSample& sample);

}  // namespace uniview
