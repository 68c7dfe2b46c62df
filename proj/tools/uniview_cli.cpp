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

// Command-line front end: dataset generation, training, evaluation, verification, inspection.

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "uniview/config.hpp"
#include "uniview/errors.hpp"
#include "uniview/gradsuite.hpp"
#include "uniview/nn/checkpoint.hpp"
#include "uniview/rig_io.hpp"
#include "uniview/uvds.hpp"

namespace fs = std::filesystem;
using namespace uniview;

namespace {

enum Exit : int {
  kOk = 0,
  kCheckFailed = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kShape = 5,
  kRuntime = 6,
};

const char* kExitHelp =
    "Exit codes:\n"
    "  0  success\n"
    "  1  a verification command found failures\n"
    "  2  bad command line\n"
    "  3  malformed or unknown config key/value\n"
    "  4  missing or unreadable file\n"
    "  5  shape mismatch (tensors, images, grids, checkpoints)\n"
    "  6  any other runtime error\n";

/// --config wins; otherwise config.txt next to the checkpoint; otherwise defaults.
RunConfig resolve_config(const std::string& config, const std::string& ckpt = {}) {
  if (!config.empty()) return load_config(config);
  if (!ckpt.empty()) {
    const fs::path near = fs::path(ckpt).parent_path() / "config.txt";
    if (fs::exists(near)) return load_config(near);
  }
  return RunConfig{};
}

void make_out_dir(const fs::path& out, const RunConfig& cfg) {
  fs::create_directories(out);
  save_config(out / "config.txt", cfg);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

void require_file(const std::string& path) {
  if (!path.empty() && !fs::exists(path)) throw IoError("no such file or directory: " + path);
}

/// Runs body(i) for i in [0, n) on `jobs` threads; every item writes its own files.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string stem(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%06zu", prefix, i);
  return buf;
}

/// Each sample re-rendered under its own rig from a list (one rig file per sample).
class RigListSource : public OccSource {
 public:
  RigListSource(const OccSource& base, std::vector<Rig> rigs) : base_(base), rigs_(std::move(rigs)) {
    if (rigs_.size() != base_.size())
      throw ShapeError("rig directory holds " + std::to_string(rigs_.size()) + " rigs for " +
                       std::to_string(base_.size()) + " samples");
  }
  std::size_t size() const override { return base_.size(); }
  OccSample get(std::size_t index) const override { return RigOverrideSource(base_, rigs_[index]).get(index); }

 private:
  const OccSource& base_;
  std::vector<Rig> rigs_;
};

std::vector<Rig> load_rig_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 9 && name.ends_with(".rig.json")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Rig> rigs;
  for (const auto& f : files) rigs.push_back(load_rig(f));
  return rigs;
}

// ---------------------------------------------------------------------------------------------

struct GenDataArgs {
  std::string config, out, kind = "pretrain";
  bool heldout{false};
  int jobs{1};
  std::optional<std::uint64_t> seed;
};

int gen_data(const GenDataArgs& a) {
  require_file(a.config);
  RunConfig cfg = resolve_config(a.config);
  if (a.seed) cfg.data.seed = *a.seed;
  make_out_dir(a.out, cfg);
  const fs::path out(a.out);
  if (a.kind == "pretrain") {
    const SyntheticOccSource src(cfg.pretrain_data(a.heldout));
    parallel_for(src.size(), a.jobs, [&](std::size_t i) {
      const OccSample s = src.get(i);
      Episode ep;
      ep.rig = s.rig;
      ep.frames.push_back(Frame{s.views, 0});
      const std::string st = stem("sample_", i);
      write_uvds(out / (st + ".uvds"), ep);
      save_rig(out / (st + ".rig.json"), s.rig);
      write_voxels(out / (st + ".uvvx"), s.gt);
      if (s.scene) save_scene(out / (st + ".scene.json"), *s.scene);
    });
    std::cout << "wrote " << src.size() << " pre-training samples to " << a.out << '\n';
  } else {
    const SyntheticEpisodeSource src(cfg.demo_data());
    std::atomic<int> failed{0};
    parallel_for(src.size(), a.jobs, [&](std::size_t i) {
      const Episode ep = src.get(i);
      failed += !ep.success;
      const std::string st = stem("episode_", i);
      write_uvds(out / (st + ".uvds"), ep);
      save_rig(out / (st + ".rig.json"), ep.rig);
    });
    std::cout << "wrote " << src.size() << " episodes to " << a.out << " (" << failed << " expert failures)\n";
  }
  return kOk;
}

struct PretrainArgs {
  std::string config, data, heldout, out;
  std::optional<std::uint64_t> seed;
};

int pretrain(const PretrainArgs& a) {
  require_file(a.config);
  require_file(a.data);
  require_file(a.heldout);
  RunConfig cfg = resolve_config(a.config);
  if (a.seed) cfg.init_seed = cfg.pretrain.seed = *a.seed;
  make_out_dir(a.out, cfg);
  std::unique_ptr<OccSource> train, held;
  if (a.data.empty())
    train = std::make_unique<SyntheticOccSource>(cfg.pretrain_data(false));
  else
    train = std::make_unique<DiskOccSource>(a.data, cfg.grid);
  if (a.heldout.empty())
    held = std::make_unique<SyntheticOccSource>(cfg.pretrain_data(true));
  else
    held = std::make_unique<DiskOccSource>(a.heldout, cfg.grid);
  ParamStore store;
  const OccModelConfig model = cfg.occ_model();
  init_occ_model(store, model, cfg.init_seed);
  auto log = open_out(fs::path(a.out) / "metrics.jsonl");
  const auto hist = pretrain_run(store, model, *train, held->size() ? held.get() : nullptr, cfg.pretrain, &log);
  nn::save_checkpoint(fs::path(a.out) / "model.uvck", store);
  if (!hist.empty()) std::cout << metrics_json(hist.back()) << '\n';
  return kOk;
}

struct FinetuneArgs {
  std::string config, data, init, out;
  bool freeze{false}, no_pretrain{false};
  std::optional<std::uint64_t> seed;
};

int finetune(const FinetuneArgs& a) {
  require_file(a.config);
  require_file(a.data);
  require_file(a.init);
  RunConfig cfg = resolve_config(a.config, a.init);
  if (a.seed) cfg.init_seed = cfg.finetune.seed = *a.seed;
  if (a.freeze) cfg.finetune.freeze_encoder = true;
  if (!a.no_pretrain && a.init.empty())
    throw ConfigError("finetune needs --init <pretrained checkpoint> unless --no-pretrain is given");
  make_out_dir(a.out, cfg);
  const PolicyModelConfig model = cfg.policy_model();
  ParamStore store;
  init_policy_model(store, model, cfg.init_seed);
  if (!a.no_pretrain) {
    const ParamStore pre = nn::read_checkpoint(a.init);
    int copied = 0;
    for (const auto& p : encoder_prefixes()) copied += store.copy_matching(pre, p);
    std::cerr << "loaded " << copied << " encoder tensors from " << a.init << '\n';
  }
  std::unique_ptr<EpisodeSource> demos;
  if (a.data.empty())
    demos = std::make_unique<SyntheticEpisodeSource>(cfg.demo_data());
  else
    demos = std::make_unique<DiskEpisodeSource>(a.data);
  auto log = open_out(fs::path(a.out) / "finetune.jsonl");
  const auto hist = finetune_run(store, model, *demos, cfg.finetune, &log);
  nn::save_checkpoint(fs::path(a.out) / "policy.uvck", store);
  if (!hist.empty()) std::cout << finetune_json(hist.back()) << '\n';
  return kOk;
}

struct EvalOccArgs {
  std::string ckpt, config, data, rig;
  bool unseen_family{false};
};

int eval_occ_cmd(const EvalOccArgs& a) {
  require_file(a.ckpt);
  require_file(a.config);
  require_file(a.data);
  require_file(a.rig);
  const RunConfig cfg = resolve_config(a.config, a.ckpt);
  const OccModelConfig model = cfg.occ_model();
  ParamStore store;
  init_occ_model(store, model, cfg.init_seed);
  nn::load_checkpoint(a.ckpt, store);
  std::unique_ptr<OccSource> base;
  if (a.data.empty())
    base = std::make_unique<SyntheticOccSource>(cfg.pretrain_data(true));
  else
    base = std::make_unique<DiskOccSource>(a.data, cfg.grid);
  std::unique_ptr<OccSource> view;
  std::string rigs = "data";
  if (!a.rig.empty() && fs::is_directory(a.rig)) {
    view = std::make_unique<RigListSource>(*base, load_rig_dir(a.rig));
    rigs = "per-sample files";
  } else if (!a.rig.empty()) {
    view = std::make_unique<RigOverrideSource>(*base, load_rig(a.rig));
    rigs = "file";
  } else if (a.unseen_family) {
    view = std::make_unique<RigOverrideSource>(*base, cfg.unseen, cfg.eval.seed);
    rigs = "unseen family";
  }
  const OccMetrics m = eval_occ(store, model, view ? *view : *base, cfg.pretrain.threshold);
  nlohmann::json j;
  j["iou"] = m.iou;
  j["rgb_mae"] = m.rgb_mae;
  j["samples"] = base->size();
  j["rigs"] = rigs;
  std::cout << j.dump() << '\n';
  return kOk;
}

struct EvalPolicyArgs {
  std::string ckpt, config, rig, report;
  int chain{0};
  bool unseen{false};
  std::optional<std::uint64_t> seed;
};

int eval_policy_cmd(const EvalPolicyArgs& a) {
  require_file(a.ckpt);
  require_file(a.config);
  require_file(a.rig);
  RunConfig cfg = resolve_config(a.config, a.ckpt);
  if (a.chain > 0) cfg.eval.chain = a.chain;
  if (a.unseen) cfg.eval.rigs = RigMode::kUnseen;
  if (a.seed) cfg.eval.seed = *a.seed;
  const PolicyModelConfig model = cfg.policy_model();
  ParamStore store;
  init_policy_model(store, model, cfg.init_seed);
  nn::load_checkpoint(a.ckpt, store);
  PolicyEvalSpec spec = cfg.policy_eval();
  if (!a.rig.empty()) spec.rig = load_rig(a.rig);
  std::ofstream report;
  if (!a.report.empty()) report = open_out(a.report);
  const PolicyEvalSummary s = eval_policy(store, model, spec, a.report.empty() ? nullptr : &report);
  nlohmann::json j;
  j["episodes"] = s.episodes;
  j["success_rate"] = s.success_rate;
  j["mean_steps"] = s.mean_steps;
  j["chain_success"] = s.chain_success;
  std::cout << j.dump() << '\n';
  return kOk;
}

int gradcheck_cmd(const std::string& module) {
  const auto results = run_grad_suite(module, &std::cout);
  int failed = 0;
  for (const auto& r : results) failed += !r.pass();
  std::cout << results.size() - failed << " passed, " << failed << " failed\n";
  return failed ? kCheckFailed : kOk;
}

struct DumpArgs {
  std::string ckpt, config, data, out;
  std::size_t sample{0};
};

int dump_voxels(const DumpArgs& a) {
  require_file(a.ckpt);
  require_file(a.config);
  require_file(a.data);
  const RunConfig cfg = resolve_config(a.config, a.ckpt);
  const OccModelConfig model = cfg.occ_model();
  ParamStore store;
  init_occ_model(store, model, cfg.init_seed);
  nn::load_checkpoint(a.ckpt, store);
  std::unique_ptr<OccSource> src;
  if (a.data.empty())
    src = std::make_unique<SyntheticOccSource>(cfg.pretrain_data(true));
  else
    src = std::make_unique<DiskOccSource>(a.data, cfg.grid);
  if (a.sample >= src->size()) throw std::out_of_range("sample index beyond the dataset");
  const OccSample s = src->get(a.sample);
  const fs::path out(a.out);
  write_ply(out, predict_voxels(store, model, s), cfg.pretrain.threshold);
  const fs::path gt = out.parent_path() / (out.stem().string() + "_gt" + out.extension().string());
  write_ply(gt, s.gt);
  std::cout << "wrote " << out.string() << " and " << gt.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified-view occupancy pre-training and language-conditioned policy learning"};
  app.footer(kExitHelp);
  app.require_subcommand(1);

  GenDataArgs gd;
  auto* c_gen = app.add_subcommand("gen-data", "Render pre-training samples or expert demonstrations to disk");
  c_gen->add_option("--config", gd.config, "run config (key = value)");
  c_gen->add_option("--out", gd.out, "output directory")->required();
  c_gen->add_option("--kind", gd.kind, "pretrain or demos")->check(CLI::IsMember({"pretrain", "demos"}));
  c_gen->add_flag("--heldout", gd.heldout, "write the held-out pre-training split");
  c_gen->add_option("--jobs", gd.jobs, "worker threads")->check(CLI::PositiveNumber);
  c_gen->add_option("--seed", gd.seed, "overrides data.seed");

  PretrainArgs pt;
  auto* c_pre = app.add_subcommand("pretrain", "Occupancy pre-training; writes model.uvck and metrics.jsonl");
  c_pre->add_option("--config", pt.config, "run config");
  c_pre->add_option("--data", pt.data, "gen-data directory (default: synthesize from config)");
  c_pre->add_option("--heldout", pt.heldout, "held-out gen-data directory (default: synthesize)");
  c_pre->add_option("--out", pt.out, "output directory")->required();
  c_pre->add_option("--seed", pt.seed, "overrides init.seed and pretrain.seed");

  FinetuneArgs ft;
  auto* c_ft = app.add_subcommand("finetune", "Imitation fine-tuning; writes policy.uvck and finetune.jsonl");
  c_ft->add_option("--config", ft.config, "run config (default: config.txt beside --init)");
  c_ft->add_option("--data", ft.data, "demos directory (default: synthesize from config)");
  c_ft->add_option("--init", ft.init, "pre-trained checkpoint supplying backbone, queries and UVFormer");
  c_ft->add_option("--out", ft.out, "output directory")->required();
  c_ft->add_flag("--freeze-uvformer", ft.freeze, "keep the pre-trained encoder fixed");
  c_ft->add_flag("--no-pretrain", ft.no_pretrain, "train the encoder from its random initialization");
  c_ft->add_option("--seed", ft.seed, "overrides init.seed and finetune.seed");

  EvalOccArgs eo;
  auto* c_eo = app.add_subcommand("eval-occ", "Occupancy IoU and color MAE of a pre-trained checkpoint");
  c_eo->add_option("--ckpt", eo.ckpt, "checkpoint")->required();
  c_eo->add_option("--config", eo.config, "run config (default: config.txt beside the checkpoint)");
  c_eo->add_option("--data", eo.data, "gen-data directory (default: synthesized held-out split)");
  c_eo->add_option("--rig", eo.rig, "rig JSON applied to every sample, or a directory of per-sample *.rig.json");
  c_eo->add_flag("--unseen-family", eo.unseen_family, "re-render every sample under an unseen-family rig");

  EvalPolicyArgs ep;
  auto* c_ep = app.add_subcommand("eval-policy", "Closed-loop rollouts on held-out scenes");
  c_ep->add_option("--ckpt", ep.ckpt, "policy checkpoint")->required();
  c_ep->add_option("--config", ep.config, "run config (default: config.txt beside the checkpoint)");
  c_ep->add_option("--rig", ep.rig, "fixed rig JSON instead of family draws");
  c_ep->add_option("--chain", ep.chain, "instructions per episode")->check(CLI::PositiveNumber);
  c_ep->add_flag("--unseen", ep.unseen, "draw rigs from the unseen family");
  c_ep->add_option("--report", ep.report, "per-episode JSON lines");
  c_ep->add_option("--seed", ep.seed, "overrides eval.seed");

  std::string module = "all";
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite; exit 1 on any failure");
  c_gc->add_option("--module", module, "all, numerics, uvformer, occupancy or policy")
      ->check(CLI::IsMember({"all", "numerics", "uvformer", "occupancy", "policy"}));

  DumpArgs dv;
  auto* c_dv = app.add_subcommand("dump-voxels", "Predicted and ground-truth voxels as ASCII PLY");
  c_dv->add_option("--ckpt", dv.ckpt, "checkpoint")->required();
  c_dv->add_option("--config", dv.config, "run config (default: config.txt beside the checkpoint)");
  c_dv->add_option("--data", dv.data, "gen-data directory (default: synthesized held-out split)");
  c_dv->add_option("--sample", dv.sample, "sample index");
  c_dv->add_option("--out", dv.out, "prediction PLY; ground truth goes to <stem>_gt.ply")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*c_gen) return gen_data(gd);
    if (*c_pre) return pretrain(pt);
    if (*c_ft) return finetune(ft);
    if (*c_eo) return eval_occ_cmd(eo);
    if (*c_ep) return eval_policy_cmd(ep);
    if (*c_gc) return gradcheck_cmd(module);
    if (*c_dv) return dump_voxels(dv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return kShape;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
