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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uniview/geometry.hpp"
#include "uniview/nn/ops.hpp"
#include "uniview/nn/tape.hpp"
#include "uniview/scene.hpp"

namespace uniview {

using nn::Index;
using nn::Matrix;
using nn::ParamStore;
using nn::Tape;
using nn::Var;

struct UvFormerConfig {
  Grid grid;
  int channels{64};
  int heads{2};
  int offsets{2};  // K sampling offsets per reference point and head
  int layers{2};
  int ffn_mult{2};

  int pillars() const { return grid.dims[0] * grid.dims[1]; }
  int points() const { return grid.dims[2]; }
  void validate() const;
};

inline constexpr int kBackboneStride = 8;

/// Camera images as (H*W x 3) matrices in [0,1], one per camera.
std::vector<Matrix> images_from_views(std::span<const RgbdImage> views);

/// Per-camera (H'*W' x C) feature maps from the shared backbone.
struct FeatureMaps {
  std::vector<Var> maps;
  int height{0}, width{0};  // H', W'
  int stride{kBackboneStride};
};

void init_backbone(ParamStore& store, int channels, std::mt19937_64& rng);

/// Three stride-2 3x3 convolutions (3 -> C/4 -> C/2 -> C), relu between blocks.
/// Image sizes must be divisible by 8.
FeatureMaps vision_backbone(Tape& tape, ParamStore& store, std::span<const Matrix> images, int height,
                            int width);

/// Pos holds the P cell centers of each pillar, stacked as (L*B x 3P); Emb is (L*B x C).
struct UniViewQueries {
  Matrix pos;
  Matrix emb;
};

/// Cell centers of every pillar, (L*B x 3P).
Matrix query_positions(const Grid& grid);
UniViewQueries build_queries(const Grid& grid, int channels, std::uint64_t init_seed);

/// Projected reference points for one (grid, rig, feature size) combination.
struct ProjectionTable {
  int pillars{0}, cameras{0}, points{0};
  int feat_height{0}, feat_width{0};
  std::vector<std::uint8_t> valid;  // [pillar][camera][point]
  std::vector<double> uv;           // [pillar][camera][point][2], normalized feature-map coords
  std::vector<int> valid_cameras;   // per pillar, cameras with at least one valid point

  std::size_t at(int m, int n, int p) const { return (static_cast<std::size_t>(m) * cameras + n) * points + p; }
  bool visible(int m) const { return valid_cameras[m] > 0; }
};

/// Projects every reference point through every camera. The feature map pixel j covers image
/// pixels [s*j, s*(j+1)), so image coordinate x maps to u = (x/s - 0.5) / (W'-1).
ProjectionTable build_projection_table(const Matrix& pos, const Rig& rig, int feat_height, int feat_width);

/// Deformable sampling core. values[n] is camera n's (H'*W' x C) value map, offsets is
/// (M x heads*P*K*2) and logits is (M x heads*P*K), both indexed ((h*P + p)*K + k).
/// Row m is the valid-camera average of the per-head softmax-weighted samples, before the
/// output projection; pillars no camera sees get a zero row.
Var deformable_sampling(const ProjectionTable& table, std::span<const Var> values, Var offsets, Var logits,
                        int heads, int offsets_per_point);

void init_uvformer(ParamStore& store, const UvFormerConfig& config, std::mt19937_64& rng,
                   std::uint64_t query_seed);

/// Full spatial cross-attention for the query features q of one layer. Invisible pillars
/// return q unchanged.
Var spatial_cross_attention(Tape& tape, ParamStore& store, const std::string& prefix, Var q,
                            const FeatureMaps& features, const ProjectionTable& table, const UvFormerConfig& config);

/// Attention term alone: zero rows for invisible pillars.
Var spatial_cross_attention_term(Tape& tape, ParamStore& store, const std::string& prefix, Var q,
                                 const FeatureMaps& features, const ProjectionTable& table,
                                 const UvFormerConfig& config);

/// Q (K^T V) / (sqrt(C) * M) through the output projection; no softmax, no residual.
Var softmax_free_self_attention(Tape& tape, ParamStore& store, const std::string& prefix, Var x);

/// Two-layer relu MLP of width ffn_mult * C.
Var feed_forward(Tape& tape, ParamStore& store, const std::string& prefix, Var x);

/// UF = UVFormer(Q, X, Cam) as an (L*B x C) matrix; pillar m = l*B + b.
Var uvformer_forward(Tape& tape, ParamStore& store, const FeatureMaps& features, const ProjectionTable& table,
                     const UvFormerConfig& config);

/// Backbone, projection table and UVFormer for one multi-view observation.
Var encode_views(Tape& tape, ParamStore& store, std::span<const Matrix> images, int height, int width,
                 const Rig& rig, const UvFormerConfig& config);

/// Adds parameters for a pre-norm layer_norm named prefix.{g,b}.
void add_layer_norm(ParamStore& store, const std::string& prefix, int width);
Var apply_layer_norm(Tape& tape, ParamStore& store, const std::string& prefix, Var x);
/// Dense layer prefix.{w,b} with N(0, 1/fan_in) weights and zero bias.
void add_dense(ParamStore& store, const std::string& prefix, int in, int out, std::mt19937_64& rng,
               bool bias = true);
Var apply_dense(Tape& tape, ParamStore& store, const std::string& prefix, Var x);

}  // namespace uniview
