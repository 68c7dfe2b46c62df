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

#include "uniview/uvformer.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "uniview/errors.hpp"

namespace uniview {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

std::string layer_prefix(int i) { return "uvformer.l" + std::to_string(i) + "."; }

}  // namespace

void UvFormerConfig::validate() const {
  grid.validate();
  if (channels <= 0 || heads <= 0 || channels % heads != 0)
    throw ConfigError("uvformer: channels must be a positive multiple of heads");
  if (channels % 4 != 0) throw ConfigError("uvformer: channels must be divisible by 4");
  if (offsets <= 0 || layers <= 0 || ffn_mult <= 0) throw ConfigError("uvformer: non-positive size");
}

std::vector<Matrix> images_from_views(std::span<const RgbdImage> views) {
  std::vector<Matrix> out;
  out.reserve(views.size());
  for (const auto& v : views) {
    Matrix m(static_cast<Index>(v.height) * v.width, 3);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = v.rgb[static_cast<std::size_t>(i)];
    out.push_back(std::move(m));
  }
  return out;
}

void add_layer_norm(ParamStore& store, const std::string& prefix, int width) {
  store.add_constant(prefix + "g", {width}, 1.0);
  store.add_constant(prefix + "b", {width}, 0.0);
}

Var apply_layer_norm(Tape& tape, ParamStore& store, const std::string& prefix, Var x) {
  return nn::layer_norm(x, tape.param(store, prefix + "g"), tape.param(store, prefix + "b"));
}

void add_dense(ParamStore& store, const std::string& prefix, int in, int out, std::mt19937_64& rng, bool bias) {
  store.add_normal(prefix + "w", {in, out}, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  if (bias) store.add_constant(prefix + "b", {out}, 0.0);
}

Var apply_dense(Tape& tape, ParamStore& store, const std::string& prefix, Var x) {
  const Var w = tape.param(store, prefix + "w");
  if (store.contains(prefix + "b")) return nn::affine(x, w, tape.param(store, prefix + "b"));
  return nn::linear(x, w);
}

void init_backbone(ParamStore& store, int channels, std::mt19937_64& rng) {
  const int widths[4] = {3, channels / 4, channels / 2, channels};
  for (int i = 0; i < 3; ++i) {
    const std::string p = "backbone.conv" + std::to_string(i + 1) + ".";
    store.add_normal(p + "w", {9 * widths[i], widths[i + 1]}, std::sqrt(2.0 / (9.0 * widths[i])), rng);
    store.add_constant(p + "b", {widths[i + 1]}, 0.0);
  }
}

FeatureMaps vision_backbone(Tape& tape, ParamStore& store, std::span<const Matrix> images, int height,
                            int width) {
  if (height % kBackboneStride != 0 || width % kBackboneStride != 0)
    throw ShapeError("vision_backbone: image size must be divisible by 8");
  FeatureMaps out;
  out.height = height / kBackboneStride;
  out.width = width / kBackboneStride;
  Var w[3], b[3];
  for (int i = 0; i < 3; ++i) {
    const std::string p = "backbone.conv" + std::to_string(i + 1) + ".";
    w[i] = tape.param(store, p + "w");
    b[i] = tape.param(store, p + "b");
  }
  for (const Matrix& img : images) {
    require(img.rows() == static_cast<Index>(height) * width && img.cols() == 3,
            "vision_backbone: image shape differs from the stated size");
    Var x = tape.constant(img.array() - 0.5);
    int h = height, wd = width;
    for (int i = 0; i < 3; ++i) {
      x = nn::conv3x3(x, h, wd, w[i], b[i], 2);
      h = nn::conv_out_extent(h, 2);
      wd = nn::conv_out_extent(wd, 2);
      if (i < 2) x = nn::relu(x);
    }
    out.maps.push_back(x);
  }
  return out;
}

Matrix query_positions(const Grid& grid) {
  grid.validate();
  const int L = grid.dims[0], B = grid.dims[1], P = grid.dims[2];
  Matrix pos(static_cast<Index>(L) * B, 3 * P);
  for (int l = 0; l < L; ++l)
    for (int b = 0; b < B; ++b)
      for (int p = 0; p < P; ++p) {
        const Vec3 c = cell_center(grid, CellIndex{l, b, p});
        for (int k = 0; k < 3; ++k) pos(l * B + b, 3 * p + k) = c[k];
      }
  return pos;
}

UniViewQueries build_queries(const Grid& grid, int channels, std::uint64_t init_seed) {
  UniViewQueries q;
  q.pos = query_positions(grid);
  const Index L = grid.dims[0], B = grid.dims[1];
  std::mt19937_64 rng(init_seed);
  std::normal_distribution<double> normal(0.0, 0.02);
  q.emb.resize(L * B, channels);
  for (Index i = 0; i < q.emb.size(); ++i) q.emb.data()[i] = normal(rng);
  return q;
}

ProjectionTable build_projection_table(const Matrix& pos, const Rig& rig, int feat_height, int feat_width) {
  require(pos.cols() % 3 == 0, "projection table: Pos must have 3P columns");
  require(feat_height > 0 && feat_width > 0, "projection table: empty feature map");
  ProjectionTable t;
  t.pillars = static_cast<int>(pos.rows());
  t.cameras = static_cast<int>(rig.size());
  t.points = static_cast<int>(pos.cols() / 3);
  t.feat_height = feat_height;
  t.feat_width = feat_width;
  const std::size_t n = static_cast<std::size_t>(t.pillars) * t.cameras * t.points;
  t.valid.assign(n, 0);
  t.uv.assign(2 * n, 0.0);
  t.valid_cameras.assign(static_cast<std::size_t>(t.pillars), 0);
  for (int m = 0; m < t.pillars; ++m) {
    for (int c = 0; c < t.cameras; ++c) {
      const Cam& cam = rig.cameras[static_cast<std::size_t>(c)];
      const double sx = static_cast<double>(cam.intrinsics.width) / feat_width;
      const double sy = static_cast<double>(cam.intrinsics.height) / feat_height;
      bool any = false;
      for (int p = 0; p < t.points; ++p) {
        const Vec3 x(pos(m, 3 * p), pos(m, 3 * p + 1), pos(m, 3 * p + 2));
        const auto pr = project_point(cam.intrinsics, cam.pose, x);
        if (!pr.valid) continue;
        const std::size_t i = t.at(m, c, p);
        t.valid[i] = 1;
        t.uv[2 * i] = feat_width > 1 ? (pr.pixel.x() / sx - 0.5) / (feat_width - 1) : 0.0;
        t.uv[2 * i + 1] = feat_height > 1 ? (pr.pixel.y() / sy - 0.5) / (feat_height - 1) : 0.0;
        any = true;
      }
      t.valid_cameras[static_cast<std::size_t>(m)] += any;
    }
  }
  return t;
}

Var deformable_sampling(const ProjectionTable& table, std::span<const Var> values, Var offsets, Var logits,
                        int heads, int K) {
  const int M = table.pillars, N = table.cameras, P = table.points;
  require(static_cast<int>(values.size()) == N, "deformable_sampling: one value map per camera required");
  require(offsets.rows() == M && offsets.cols() == static_cast<Index>(heads) * P * K * 2,
          "deformable_sampling: offsets must be M x heads*P*K*2");
  require(logits.rows() == M && logits.cols() == static_cast<Index>(heads) * P * K,
          "deformable_sampling: logits must be M x heads*P*K");
  const Index C = values.empty() ? 0 : values[0].cols();
  require(N > 0 && C % heads == 0, "deformable_sampling: channels must split evenly over heads");
  const Index hw = static_cast<Index>(table.feat_height) * table.feat_width;
  for (const Var& v : values) require(v.rows() == hw && v.cols() == C, "deformable_sampling: value map shape");
  const Index ch = C / heads;
  Tape& tape = *offsets.tape();

  // One entry per sampled location; a group is the contiguous run sharing (m, n, h).
  struct Entry {
    nn::kernel::BilinearTap tap;
    double weight;
    int col;  // (h*P + p)*K + k
  };
  struct Group {
    int m, n, h;
    double inv;  // 1 / valid cameras of pillar m
    std::size_t begin, end;
  };
  std::vector<Entry> entries;
  std::vector<Group> groups;
  entries.reserve(static_cast<std::size_t>(M) * N * P * K * heads / 2);

  const Matrix& off = offsets.value();
  const Matrix& lg = logits.value();
  Matrix out = Matrix::Zero(M, C);
  std::vector<double> w;
  for (int m = 0; m < M; ++m) {
    const int nv = table.valid_cameras[static_cast<std::size_t>(m)];
    if (nv == 0) continue;
    const double inv = 1.0 / nv;
    for (int n = 0; n < N; ++n) {
      const Matrix& val = values[static_cast<std::size_t>(n)].value();
      for (int h = 0; h < heads; ++h) {
        const std::size_t begin = entries.size();
        double mx = -std::numeric_limits<double>::infinity();
        for (int p = 0; p < P; ++p) {
          const std::size_t i = table.at(m, n, p);
          if (!table.valid[i]) continue;
          for (int k = 0; k < K; ++k) {
            const int col = (h * P + p) * K + k;
            const double u = table.uv[2 * i] + off(m, 2 * col), v = table.uv[2 * i + 1] + off(m, 2 * col + 1);
            entries.push_back({nn::kernel::bilinear_tap(table.feat_height, table.feat_width, u, v), lg(m, col), col});
            mx = std::max(mx, lg(m, col));
          }
        }
        if (entries.size() == begin) break;  // no valid point for this camera; same for every head
        double z = 0;
        for (std::size_t e = begin; e < entries.size(); ++e) z += (entries[e].weight = std::exp(entries[e].weight - mx));
        for (std::size_t e = begin; e < entries.size(); ++e) {
          Entry& en = entries[e];
          en.weight /= z;
          nn::kernel::bilinear_gather(val, table.feat_width, en.tap, h * ch, ch, en.weight * inv,
                                      out.row(m).data() + h * ch);
          if (tape.track_kinks())
            tape.mix_kink(en.tap.inside ? static_cast<std::uint64_t>(en.tap.y0 * 7919 + en.tap.x0 + 1) : 0);
        }
        groups.push_back({m, n, h, inv, begin, entries.size()});
      }
    }
  }

  std::vector<Var> inputs(values.begin(), values.end());
  inputs.push_back(offsets);
  inputs.push_back(logits);
  std::vector<Var> vals(values.begin(), values.end());
  const int fh = table.feat_height, fw = table.feat_width;
  return tape.record(
      std::move(out), inputs,
      [vals, offsets, logits, entries = std::move(entries), groups = std::move(groups), fh, fw, ch](
          Tape& t, const Matrix& g) {
        const bool need_off = t.needs_grad(offsets), need_lg = t.needs_grad(logits);
        std::vector<double> ds;
        for (const Group& gr : groups) {
          const Var& vn = vals[static_cast<std::size_t>(gr.n)];
          const Matrix& val = t.value(vn);
          const Eigen::Matrix<double, 1, Eigen::Dynamic> gh = g.row(gr.m).segment(gr.h * ch, ch) * gr.inv;
          const Index c0 = gr.h * ch;
          if (t.needs_grad(vn)) {
            Matrix& vg = t.accum(vn);
            for (std::size_t e = gr.begin; e < gr.end; ++e)
              nn::kernel::bilinear_scatter(vg, fw, entries[e].tap, c0, ch, entries[e].weight, gh.data());
          }
          if (need_off) {
            Matrix& og = t.accum(offsets);
            for (std::size_t e = gr.begin; e < gr.end; ++e) {
              const auto [du, dv] = nn::kernel::bilinear_uv_grad(val, fh, fw,
                                                                 entries[e].tap, c0, ch, gh.data());
              og(gr.m, 2 * entries[e].col) += entries[e].weight * du;
              og(gr.m, 2 * entries[e].col + 1) += entries[e].weight * dv;
            }
          }
          if (need_lg) {
            ds.assign(gr.end - gr.begin, 0.0);
            Eigen::Matrix<double, 1, Eigen::Dynamic> s(ch);
            double mean = 0;
            for (std::size_t e = gr.begin; e < gr.end; ++e) {
              s.setZero();
              nn::kernel::bilinear_gather(val, fw, entries[e].tap, c0, ch, 1.0, s.data());
              ds[e - gr.begin] = s.dot(gh);
              mean += entries[e].weight * ds[e - gr.begin];
            }
            Matrix& lgg = t.accum(logits);
            for (std::size_t e = gr.begin; e < gr.end; ++e)
              lgg(gr.m, entries[e].col) += entries[e].weight * (ds[e - gr.begin] - mean);
          }
        }
      });
}

void init_uvformer(ParamStore& store, const UvFormerConfig& config, std::mt19937_64& rng,
                   std::uint64_t query_seed) {
  config.validate();
  const int C = config.channels, P = config.points();
  const int samples = config.heads * P * config.offsets;
  store.add("queries.emb", {config.pillars(), C}).value = build_queries(config.grid, C, query_seed).emb;
  for (int i = 0; i < config.layers; ++i) {
    const std::string p = layer_prefix(i);
    add_layer_norm(store, p + "ln_sca.", C);
    add_dense(store, p + "sca.value.", C, C, rng);
    store.add_constant(p + "sca.offset.w", {C, 2 * samples}, 0.0);
    store.add_constant(p + "sca.offset.b", {2 * samples}, 0.0);
    store.add_constant(p + "sca.weight.w", {C, samples}, 0.0);
    store.add_constant(p + "sca.weight.b", {samples}, 0.0);
    add_dense(store, p + "sca.out.", C, C, rng);
    for (const char* f : {"ffn1.", "ffn2."}) {
      add_layer_norm(store, p + "ln_" + f, C);
      add_dense(store, p + f + "in.", C, config.ffn_mult * C, rng);
      add_dense(store, p + f + "out.", config.ffn_mult * C, C, rng);
    }
    add_layer_norm(store, p + "ln_sa.", C);
    for (const char* f : {"q.", "k.", "v.", "o."}) add_dense(store, p + "sa." + f, C, C, rng, false);
  }
}

Var spatial_cross_attention_term(Tape& tape, ParamStore& store, const std::string& prefix, Var q,
                                 const FeatureMaps& features, const ProjectionTable& table,
                                 const UvFormerConfig& config) {
  require(static_cast<int>(features.maps.size()) == table.cameras, "spatial_cross_attention: camera count");
  require(features.height == table.feat_height && features.width == table.feat_width,
          "spatial_cross_attention: feature size differs from projection table");
  std::vector<Var> values;
  values.reserve(features.maps.size());
  for (const Var& f : features.maps) values.push_back(apply_dense(tape, store, prefix + "value.", f));
  const Var off = apply_dense(tape, store, prefix + "offset.", q);
  const Var lg = apply_dense(tape, store, prefix + "weight.", q);
  const Var sampled = deformable_sampling(table, values, off, lg, config.heads, config.offsets);
  std::vector<std::uint8_t> visible(static_cast<std::size_t>(table.pillars));
  for (int m = 0; m < table.pillars; ++m) visible[static_cast<std::size_t>(m)] = table.visible(m);
  return nn::mask_rows(apply_dense(tape, store, prefix + "out.", sampled), visible);
}

Var spatial_cross_attention(Tape& tape, ParamStore& store, const std::string& prefix, Var q,
                            const FeatureMaps& features, const ProjectionTable& table, const UvFormerConfig& config) {
  const Var term = spatial_cross_attention_term(tape, store, prefix, q, features, table, config);
  std::vector<std::uint8_t> visible(static_cast<std::size_t>(table.pillars));
  for (int m = 0; m < table.pillars; ++m) visible[static_cast<std::size_t>(m)] = table.visible(m);
  return nn::select_rows(visible, term, q);
}

Var softmax_free_self_attention(Tape& tape, ParamStore& store, const std::string& prefix, Var x) {
  const Var q = apply_dense(tape, store, prefix + "q.", x);
  const Var k = apply_dense(tape, store, prefix + "k.", x);
  const Var v = apply_dense(tape, store, prefix + "v.", x);
  const double scale = 1.0 / (std::sqrt(static_cast<double>(x.cols())) * static_cast<double>(x.rows()));
  const Var mixed = nn::scale(nn::matmul(q, nn::matmul(nn::transpose(k), v)), scale);
  return apply_dense(tape, store, prefix + "o.", mixed);
}

Var feed_forward(Tape& tape, ParamStore& store, const std::string& prefix, Var x) {
  return apply_dense(tape, store, prefix + "out.", nn::relu(apply_dense(tape, store, prefix + "in.", x)));
}

Var uvformer_forward(Tape& tape, ParamStore& store, const FeatureMaps& features, const ProjectionTable& table,
                     const UvFormerConfig& config) {
  require(table.pillars == config.pillars() && table.points == config.points(),
          "uvformer_forward: projection table does not match the grid");
  Var x = tape.param(store, "queries.emb");
  for (int i = 0; i < config.layers; ++i) {
    const std::string p = layer_prefix(i);
    x = nn::add(x, spatial_cross_attention_term(tape, store, p + "sca.",
                                                apply_layer_norm(tape, store, p + "ln_sca.", x), features, table,
                                                config));
    x = nn::add(x, feed_forward(tape, store, p + "ffn1.", apply_layer_norm(tape, store, p + "ln_ffn1.", x)));
    x = nn::add(x, softmax_free_self_attention(tape, store, p + "sa.", apply_layer_norm(tape, store, p + "ln_sa.", x)));
    x = nn::add(x, feed_forward(tape, store, p + "ffn2.", apply_layer_norm(tape, store, p + "ln_ffn2.", x)));
  }
  return x;
}

Var encode_views(Tape& tape, ParamStore& store, std::span<const Matrix> images, int height, int width,
                 const Rig& rig, const UvFormerConfig& config) {
  const FeatureMaps f = vision_backbone(tape, store, images, height, width);
  const ProjectionTable table = build_projection_table(query_positions(config.grid), rig, f.height, f.width);
  return uvformer_forward(tape, store, f, table, config);
}

}  // namespace uniview
