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

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "uniview/errors.hpp"
#include "uniview/nn/gradcheck.hpp"
#include "uniview/occupancy.hpp"
#include "uniview/rig_io.hpp"
#include "uniview/uvds.hpp"

using namespace uniview;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

Grid micro_grid() {
  Grid g;
  g.dims = {2, 2, 2};
  g.cell_size = Vec3(0.5, 0.5, 0.25);
  return g;
}

VoxelGrid random_gt(const Grid& g, std::uint64_t seed) {
  VoxelGrid v(g);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  for (Index i = 0; i < v.occ.size(); ++i) {
    v.occ[i] = u(rng) < 0.4;
    for (int k = 0; k < 3; ++k) v.rgb(i, k) = v.occ[i] > 0 ? u(rng) : 0.0;
  }
  return v;
}

SyntheticOccSpec small_spec(int scenes, int rigs, int image) {
  SyntheticOccSpec s;
  s.scenes = scenes;
  s.rigs_per_scene = rigs;
  s.seed = 17;
  s.family.width = s.family.height = image;
  s.family.focal_min *= image / 128.0;
  s.family.focal_max *= image / 128.0;
  return s;
}

}  // namespace

TEST_CASE("occ_decode shapes and the all-zero decoder") {
  UvFormerConfig cfg;
  ParamStore store;
  std::mt19937_64 rng(1);
  init_occ_decoder(store, cfg, rng);
  for (auto& [name, t] : store.params()) t.value.setZero();
  Tape t;
  const OccPrediction p = occ_decode(t, store, t.constant(random_matrix(400, 64, 2)), cfg.grid);
  CHECK(p.logits.rows() == 2000);
  CHECK(p.logits.cols() == 1);
  CHECK(p.rgb.rows() == 2000);
  CHECK(p.rgb.cols() == 3);
  CHECK(p.logits.value().isZero());
  CHECK((p.rgb.value().array() == 0.5).all());
}

TEST_CASE("occ_decode channel layout follows the flat cell order") {
  // A 1x1 grid with P = 2 and identity-like weights: only the centre tap of conv2 is used.
  UvFormerConfig cfg;
  cfg.grid.dims = {1, 1, 2};
  cfg.channels = 8;
  ParamStore store;
  std::mt19937_64 rng(3);
  init_occ_decoder(store, cfg, rng);
  for (auto& [name, t] : store.params()) t.value.setZero();
  store.at("occ.conv2.b").value << 1, 2, 0, 0, 0, 10, 10, 10;
  Tape t;
  const OccPrediction p = occ_decode(t, store, t.constant(Matrix::Zero(1, 8)), cfg.grid);
  CHECK(p.logits.value()(0, 0) == 1.0);
  CHECK(p.logits.value()(1, 0) == 2.0);
  CHECK(p.rgb.value()(0, 0) == 0.5);
  CHECK(p.rgb.value()(1, 2) == doctest::Approx(nn::kernel::sigmoid(10)));
}

TEST_CASE("occ_decode gradcheck") {
  UvFormerConfig cfg;
  cfg.grid = micro_grid();
  cfg.channels = 8;
  ParamStore store;
  std::mt19937_64 rng(5);
  init_occ_decoder(store, cfg, rng);
  const Matrix uf = random_matrix(4, 8, 6);
  const Matrix proj = random_matrix(8, 3, 7);
  const auto r = nn::grad_check_params(
      [&](Tape& t, ParamStore& s) {
        const OccPrediction p = occ_decode(t, s, t.constant(uf), cfg.grid);
        return nn::add(nn::sum_all(nn::mul(p.logits, t.constant(proj.col(0)))),
                       nn::sum_all(nn::mul(p.rgb, t.constant(proj))));
      },
      store);
  INFO(r.worst);
  CHECK(r.checked > 200);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("pretrain_loss identities and scalar oracle") {
  const Grid g = micro_grid();
  const VoxelGrid gt = random_gt(g, 11);
  const Matrix logits = random_matrix(8, 1, 12, 2.0);
  const Matrix rgb = (random_matrix(8, 3, 13, 0.2).array() + 0.5).matrix();
  Tape t;
  const OccPrediction pred{t.constant(logits), t.constant(rgb)};

  // Independent scalar evaluation.
  double ce = 0, l1 = 0;
  int occupied = 0;
  for (int i = 0; i < 8; ++i) {
    const double z = logits(i, 0), y = gt.occ[i];
    const double p = 1.0 / (1.0 + std::exp(-z));
    ce += -(y * std::log(p) + (1 - y) * std::log(1 - p));
    if (y > 0.5) {
      ++occupied;
      for (int k = 0; k < 3; ++k) l1 += std::abs(rgb(i, k) - gt.rgb(i, k));
    }
  }
  ce /= 8;
  l1 /= 3.0 * occupied;
  REQUIRE(occupied > 0);
  const PretrainLoss loss = pretrain_loss(pred, gt, 0.7);
  CHECK(std::abs(loss.ce.scalar() - ce) <= 1e-12);
  CHECK(std::abs(loss.l1.scalar() - l1) <= 1e-12);
  CHECK(std::abs(loss.total.scalar() - (ce + 0.7 * l1)) <= 1e-12);

  CHECK(pretrain_loss(pred, gt, 0.0).total.scalar() == loss.ce.scalar());

  // Linear in lambda_rgb.
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0, 5);
  const double base = pretrain_loss(pred, gt, 0.0).total.scalar();
  const double part = pretrain_loss(pred, gt, 1.0).l1.scalar();
  for (int k = 0; k < 10; ++k) {
    const double lambda = u(rng);
    CHECK(pretrain_loss(pred, gt, lambda).total.scalar() == base + lambda * part);
  }

  // Predicting gt colors on occupied cells leaves only the occupancy term.
  Matrix exact = rgb;
  for (int i = 0; i < 8; ++i)
    if (gt.occ[i] > 0.5) exact.row(i) = gt.rgb.row(i);
  const OccPrediction good{t.constant(logits), t.constant(exact)};
  CHECK(pretrain_loss(good, gt, 3.0).l1.scalar() == 0.0);
  CHECK(pretrain_loss(good, gt, 3.0).total.scalar() == pretrain_loss(good, gt, 0.0).total.scalar());

  CHECK_THROWS_AS(pretrain_loss(pred, VoxelGrid(Grid{}), 1.0), ShapeError);
}

TEST_CASE("empty-vs-empty counts as a perfect prediction") {
  VoxelGrid a{Grid{}}, b{Grid{}};
  CHECK(occupancy_iou(a, b) == 1.0);
}

TEST_CASE("full pre-training objective gradcheck on a micro configuration") {
  OccModelConfig m;
  m.uv.grid = micro_grid();
  m.uv.channels = 8;
  ParamStore store;
  init_occ_model(store, m, 21);
  std::mt19937_64 rng(22);
  for (auto& [name, t] : store.params()) {
    const bool predictor = name.find("offset") != std::string::npos || name.find("weight.") != std::string::npos;
    std::normal_distribution<double> n(0.0, predictor ? 0.02 : 0.2);
    for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] += n(rng);
  }
  Rig rig;
  Cam c;
  c.intrinsics = {30, 30, 16, 16, 32, 32};
  c.pose = look_at<double>(Vec3(0.5, -0.9, 1.1), Vec3(0.5, 0.5, 0.1));
  rig.cameras = {c};
  const std::vector<Matrix> imgs{(random_matrix(32 * 32, 3, 23, 0.2).array() + 0.5).matrix()};
  const VoxelGrid gt = random_gt(m.uv.grid, 24);
  const auto r = nn::grad_check_params(
      [&](Tape& t, ParamStore& s) {
        return pretrain_loss(occ_forward(t, s, imgs, 32, 32, rig, m), gt, 1.0).total;
      },
      store, 1e-4, 10);
  INFO(r.worst);
  CHECK(r.checked > 200);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("baseline head shapes") {
  OccModelConfig m;
  m.baseline = true;
  m.uv.channels = 16;
  ParamStore store;
  init_occ_model(store, m, 31);
  CHECK_FALSE(store.contains("queries.emb"));
  const SyntheticOccSource src(small_spec(1, 1, 64));
  const OccSample s = src.get(0);
  Tape t;
  const auto imgs = images_from_views(s.views);
  const OccPrediction p = occ_forward(t, store, imgs, 64, 64, s.rig, m);
  CHECK(p.logits.rows() == 2000);
  Rig two = s.rig;
  two.cameras.pop_back();
  const std::vector<Matrix> fewer(imgs.begin(), imgs.begin() + 2);
  CHECK_THROWS_AS(occ_forward(t, store, fewer, 64, 64, two, m), ShapeError);
}

TEST_CASE("synthetic source is deterministic and rig override keeps ground truth") {
  const SyntheticOccSource src(small_spec(3, 2, 32));
  CHECK(src.size() == 6);
  const OccSample a = src.get(3), b = src.get(3);
  CHECK(a.views[0].rgb == b.views[0].rgb);
  CHECK(a.gt.occ == b.gt.occ);
  CHECK(a.gt.occupied_count() > 0);
  // Samples 2 and 3 share a scene under different rigs.
  CHECK(src.scene(2).primitives[0].center == src.scene(3).primitives[0].center);
  CHECK(src.rig(2).cameras[0].pose.translation != src.rig(3).cameras[0].pose.translation);

  const RigOverrideSource same(src, src.rig(3));
  const OccSample c = same.get(3);
  CHECK(c.views[1].depth == a.views[1].depth);
  RigFamily unseen = RigFamily::unseen();
  unseen.width = unseen.height = 32;
  const RigOverrideSource other(src, unseen, 5);
  const OccSample d = other.get(3);
  CHECK(d.gt.occ == a.gt.occ);
  CHECK(d.views[0].depth != a.views[0].depth);
}

TEST_CASE("pre-training overfits a single sample") {
  OccModelConfig m;
  m.uv.channels = 16;
  ParamStore store;
  init_occ_model(store, m, 41);
  const SyntheticOccSource src(small_spec(1, 1, 64));
  PretrainConfig pc;
  pc.epochs = 200;
  pc.batch_size = 1;
  const auto hist = pretrain_run(store, m, src, nullptr, pc);
  REQUIRE(hist.size() == 200);
  CHECK(hist.back().loss < 0.5 * hist.front().loss);
}

TEST_CASE("pre-training is deterministic and eval reproduces the log") {
  OccModelConfig m;
  m.uv.channels = 8;
  const SyntheticOccSource train(small_spec(2, 1, 32));
  SyntheticOccSpec hs = small_spec(1, 1, 32);
  hs.first_scene = 99;
  const SyntheticOccSource held(hs);
  PretrainConfig pc;
  pc.epochs = 2;
  pc.batch_size = 2;
  auto run = [&](ParamStore& store) {
    init_occ_model(store, m, 51);
    std::ostringstream log;
    pretrain_run(store, m, train, &held, pc, &log);
    return log.str();
  };
  ParamStore s1, s2;
  const std::string l1 = run(s1), l2 = run(s2);
  auto strip = [](const std::string& text) {
    std::string out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) out += line.substr(0, line.find("\"wall_s\"")) + "\n";
    return out;
  };
  CHECK(strip(l1) == strip(l2));
  CHECK(s1.at("uvformer.l0.sca.out.w").value == s2.at("uvformer.l0.sca.out.w").value);

  const OccMetrics direct = eval_occ(s1, m, held);
  const RigOverrideSource same(held, held.rig(0));
  const OccMetrics overridden = eval_occ(s1, m, same);
  CHECK(direct.iou == overridden.iou);
  CHECK(direct.rgb_mae == overridden.rgb_mae);
  CHECK(l1.find("\"iou\":") != std::string::npos);

  const SyntheticOccSource empty(SyntheticOccSpec{.scenes = 0});
  CHECK_THROWS_AS(pretrain_run(s1, m, empty, nullptr, pc), std::invalid_argument);
}

TEST_CASE("disk source reads what gen-data style files contain") {
  const auto dir = std::filesystem::temp_directory_path() / "uniview_occ_disk";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const SyntheticOccSource src(small_spec(2, 1, 32));
  for (std::size_t i = 0; i < src.size(); ++i) {
    const OccSample s = src.get(i);
    Episode ep;
    ep.instruction_id = -1;
    ep.rig = s.rig;
    ep.frames.push_back({s.views, 0});
    const std::string stem = "sample_0000" + std::to_string(i);
    write_uvds(dir / (stem + ".uvds"), ep);
    write_voxels(dir / (stem + ".uvvx"), s.gt);
    save_scene(dir / (stem + ".scene.json"), *s.scene);
  }
  const DiskOccSource disk(dir, Grid{});
  REQUIRE(disk.size() == 2);
  const OccSample a = disk.get(1), b = src.get(1);
  CHECK(a.gt.occ == b.gt.occ);
  CHECK(a.views[2].rgb == b.views[2].rgb);
  REQUIRE(a.scene.has_value());
  CHECK(a.scene->primitives.size() == b.scene->primitives.size());

  Grid coarse;
  coarse.dims = {5, 5, 2};
  coarse.cell_size = Vec3(0.2, 0.2, 0.25);
  const DiskOccSource disk_coarse(dir, coarse);
  CHECK(disk_coarse.get(0).gt.grid.dims == coarse.dims);
  std::filesystem::remove_all(dir);
}
