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

#include "uniview/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "uniview/errors.hpp"

namespace uniview {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::string t = s;
  for (char& ch : t)
    if (ch == ',') ch = ' ';
  std::istringstream in(t);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

template <typename T>
T parse_number(const std::string& s, const std::string& key) {
  T v{};
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size())
    throw ConfigError("config key '" + key + "': cannot parse '" + s + "'");
  return v;
}

std::string format(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
std::string format(int v) { return std::to_string(v); }
std::string format(std::uint64_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }

template <typename T>
T parse(const std::string& s, const std::string& key);

template <>
int parse<int>(const std::string& s, const std::string& key) {
  return parse_number<int>(s, key);
}
template <>
double parse<double>(const std::string& s, const std::string& key) {
  return parse_number<double>(s, key);
}
template <>
std::uint64_t parse<std::uint64_t>(const std::string& s, const std::string& key) {
  return parse_number<std::uint64_t>(s, key);
}
template <>
bool parse<bool>(const std::string& s, const std::string& key) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + s + "'");
}

template <typename V>
V parse_vector(const std::string& s, const std::string& key) {
  const auto parts = split_list(s);
  if (parts.size() != static_cast<std::size_t>(V::RowsAtCompileTime))
    throw ConfigError("config key '" + key + "': expected " + std::to_string(V::RowsAtCompileTime) + " numbers");
  V v;
  for (int i = 0; i < V::RowsAtCompileTime; ++i) v[i] = parse<double>(parts[static_cast<std::size_t>(i)], key);
  return v;
}
template <>
Vec3 parse<Vec3>(const std::string& s, const std::string& key) {
  return parse_vector<Vec3>(s, key);
}
template <>
Vec2 parse<Vec2>(const std::string& s, const std::string& key) {
  return parse_vector<Vec2>(s, key);
}
template <typename V>
std::string format_vector(const V& v) {
  std::string out;
  for (int i = 0; i < v.size(); ++i) out += (i ? " " : "") + format(v[i]);
  return out;
}
std::string format(const Vec3& v) { return format_vector(v); }
std::string format(const Vec2& v) { return format_vector(v); }

template <>
CellIndex parse<CellIndex>(const std::string& s, const std::string& key) {
  const auto parts = split_list(s);
  if (parts.size() != 3) throw ConfigError("config key '" + key + "': expected 3 integers");
  return {parse<int>(parts[0], key), parse<int>(parts[1], key), parse<int>(parts[2], key)};
}
std::string format(const CellIndex& d) {
  return std::to_string(d[0]) + " " + std::to_string(d[1]) + " " + std::to_string(d[2]);
}

template <>
std::vector<TaskKind> parse<std::vector<TaskKind>>(const std::string& s, const std::string& key) {
  std::vector<TaskKind> out;
  for (const auto& w : split_list(s)) {
    if (w == "reach")
      out.push_back(TaskKind::kReach);
    else if (w == "lift")
      out.push_back(TaskKind::kLift);
    else
      throw ConfigError("config key '" + key + "': unknown task '" + w + "'");
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': no tasks");
  return out;
}
std::string format(const std::vector<TaskKind>& tasks) {
  std::string out;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    out += std::string(i ? " " : "") + (tasks[i] == TaskKind::kReach ? "reach" : "lift");
  return out;
}

const std::map<std::string, RigMode> kRigModes{
    {"seen", RigMode::kSeen}, {"unseen", RigMode::kUnseen}, {"multi", RigMode::kMulti}, {"joint", RigMode::kJoint}};

template <>
RigMode parse<RigMode>(const std::string& s, const std::string& key) {
  const auto it = kRigModes.find(s);
  if (it == kRigModes.end()) throw ConfigError("config key '" + key + "': expected seen|unseen|multi|joint");
  return it->second;
}
std::string format(RigMode m) {
  for (const auto& [name, mode] : kRigModes)
    if (mode == m) return name;
  return "seen";
}

struct Binding {
  std::string key, doc;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T, typename Access>
Binding field(std::string key, std::string doc, Access access) {
  Binding b{key, std::move(doc), {}, {}};
  b.set = [access, key](RunConfig& c, const std::string& v) { access(c) = parse<T>(v, key); };
  b.get = [access](const RunConfig& c) { return format(access(const_cast<RunConfig&>(c))); };
  return b;
}

void add_family(std::vector<Binding>& out, const std::string& name, RigFamily RunConfig::*member) {
  const std::string p = "rig." + name + ".";
  auto fam = [member](RunConfig& c) -> RigFamily& { return c.*member; };
  out.push_back(field<int>(p + "cameras", "cameras per rig", [fam](RunConfig& c) -> int& { return fam(c).cameras; }));
  out.push_back(field<double>(p + "azimuth_min", "degrees", [fam](RunConfig& c) -> double& { return fam(c).azimuth_min_deg; }));
  out.push_back(field<double>(p + "azimuth_max", "degrees", [fam](RunConfig& c) -> double& { return fam(c).azimuth_max_deg; }));
  out.push_back(field<double>(p + "elevation_min", "degrees", [fam](RunConfig& c) -> double& { return fam(c).elevation_min_deg; }));
  out.push_back(field<double>(p + "elevation_max", "degrees", [fam](RunConfig& c) -> double& { return fam(c).elevation_max_deg; }));
  out.push_back(field<double>(p + "radius_min", "camera distance from the look-at point, m", [fam](RunConfig& c) -> double& { return fam(c).radius_min; }));
  out.push_back(field<double>(p + "radius_max", "m", [fam](RunConfig& c) -> double& { return fam(c).radius_max; }));
  out.push_back(field<double>(p + "focal_min", "pixels", [fam](RunConfig& c) -> double& { return fam(c).focal_min; }));
  out.push_back(field<double>(p + "focal_max", "pixels", [fam](RunConfig& c) -> double& { return fam(c).focal_max; }));
  out.push_back(field<double>(p + "look_at_jitter", "uniform jitter of the look-at point, m", [fam](RunConfig& c) -> double& { return fam(c).look_at_jitter; }));
  out.push_back(field<Vec3>(p + "look_at", "nominal look-at point", [fam](RunConfig& c) -> Vec3& { return fam(c).look_at; }));
  out.push_back(field<int>(p + "width", "image width, multiple of 8", [fam](RunConfig& c) -> int& { return fam(c).width; }));
  out.push_back(field<int>(p + "height", "image height, multiple of 8", [fam](RunConfig& c) -> int& { return fam(c).height; }));
}

#define UV_FIELD(T, key, doc, expr) field<T>(key, doc, [](RunConfig& c) -> T& { return expr; })

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> table = [] {
    std::vector<Binding> b{
        UV_FIELD(Vec3, "grid.origin", "workspace grid corner, m", c.grid.origin),
        UV_FIELD(Vec3, "grid.cell_size", "cell extents, m", c.grid.cell_size),
        UV_FIELD(CellIndex, "grid.dims", "cells along x y z (L B P)", c.grid.dims),
    };
    add_family(b, "seen", &RunConfig::seen);
    add_family(b, "unseen", &RunConfig::unseen);
    const std::vector<Binding> rest{
        UV_FIELD(int, "scene.min_objects", "", c.scene.min_objects),
        UV_FIELD(int, "scene.max_objects", "", c.scene.max_objects),
        UV_FIELD(double, "scene.box_min_side", "m", c.scene.box_min_side),
        UV_FIELD(double, "scene.box_max_side", "m", c.scene.box_max_side),
        UV_FIELD(double, "scene.box_min_height", "m", c.scene.box_min_height),
        UV_FIELD(double, "scene.box_max_height", "m", c.scene.box_max_height),
        UV_FIELD(double, "scene.sphere_min_radius", "m", c.scene.sphere_min_radius),
        UV_FIELD(double, "scene.sphere_max_radius", "m", c.scene.sphere_max_radius),
        UV_FIELD(double, "scene.table_height", "m", c.scene.table_height),
        UV_FIELD(Vec2, "scene.table_min", "table corner, m", c.scene.table_min),
        UV_FIELD(Vec2, "scene.table_max", "table corner, m", c.scene.table_max),
        UV_FIELD(double, "scene.margin", "object distance from the table edge, m", c.scene.margin),
        UV_FIELD(double, "scene.clearance", "minimum footprint gap, m", c.scene.clearance),
        UV_FIELD(int, "scene.max_attempts", "placement retries before giving up", c.scene.max_attempts),
        UV_FIELD(Vec3, "env.workspace_min", "gripper bounds, m", c.env.workspace_min),
        UV_FIELD(Vec3, "env.workspace_max", "gripper bounds, m", c.env.workspace_max),
        UV_FIELD(double, "env.max_step", "translation clamp per action, m", c.env.max_step),
        UV_FIELD(double, "env.max_rot_step", "rotation clamp per action, rad", c.env.max_rot_step),
        UV_FIELD(double, "env.grasp_radius", "m", c.env.grasp_radius),
        UV_FIELD(double, "env.lift_height", "lift success height above the table, m", c.env.lift_height),
        UV_FIELD(double, "env.gripper_radius", "m", c.env.gripper_radius),
        UV_FIELD(Vec3, "env.start_pos", "gripper start, m", c.env.start_pos),
        UV_FIELD(double, "env.start_jitter", "m", c.env.start_jitter),
        UV_FIELD(int, "model.channels", "feature width C", c.occ.uv.channels),
        UV_FIELD(int, "model.heads", "cross-attention heads", c.occ.uv.heads),
        UV_FIELD(int, "model.offsets", "sampling offsets K per point and head", c.occ.uv.offsets),
        UV_FIELD(int, "model.layers", "UVFormer layers", c.occ.uv.layers),
        UV_FIELD(int, "model.ffn_mult", "FFN width multiplier", c.occ.uv.ffn_mult),
        UV_FIELD(bool, "model.baseline", "pooled-feature occupancy head instead of UVFormer", c.occ.baseline),
        UV_FIELD(int, "model.baseline_pool", "pooled map side of the baseline", c.occ.baseline_pool),
        UV_FIELD(int, "model.baseline_hidden", "", c.occ.baseline_hidden),
        UV_FIELD(int, "model.tokens", "learned tokens I per instruction", c.policy.tokens),
        UV_FIELD(int, "model.decoder_layers", "fusion decoder layers D", c.policy.decoder_layers),
        UV_FIELD(int, "model.lstm_hidden", "", c.policy.lstm_hidden),
        UV_FIELD(int, "model.mlp_hidden", "", c.policy.mlp_hidden),
        UV_FIELD(bool, "model.wrist", "also attend to one camera's raw feature map", c.policy.wrist),
        UV_FIELD(int, "model.wrist_camera", "", c.policy.wrist_camera),
        UV_FIELD(std::uint64_t, "init.seed", "parameter initialization", c.init_seed),
        UV_FIELD(int, "pretrain.epochs", "", c.pretrain.epochs),
        UV_FIELD(int, "pretrain.batch_size", "", c.pretrain.batch_size),
        UV_FIELD(double, "pretrain.lr", "", c.pretrain.adam.lr),
        UV_FIELD(double, "pretrain.clip_norm", "0 disables", c.pretrain.adam.clip_norm),
        UV_FIELD(double, "pretrain.lambda_rgb", "weight of the masked color loss", c.pretrain.lambda_rgb),
        UV_FIELD(double, "pretrain.threshold", "occupancy threshold for metrics", c.pretrain.threshold),
        UV_FIELD(int, "pretrain.max_steps", "0 = no limit", c.pretrain.max_steps),
        UV_FIELD(std::uint64_t, "pretrain.seed", "shuffling", c.pretrain.seed),
        UV_FIELD(int, "finetune.epochs", "", c.finetune.epochs),
        UV_FIELD(double, "finetune.lr", "", c.finetune.adam.lr),
        UV_FIELD(double, "finetune.clip_norm", "0 disables", c.finetune.adam.clip_norm),
        UV_FIELD(double, "finetune.lambda_gripper", "weight of the gripper loss", c.finetune.lambda_gripper),
        UV_FIELD(int, "finetune.window", "truncated backpropagation length, frames", c.finetune.window),
        UV_FIELD(bool, "finetune.freeze_uvformer", "freeze backbone, queries and UVFormer", c.finetune.freeze_encoder),
        UV_FIELD(int, "finetune.max_steps", "0 = no limit", c.finetune.max_steps),
        UV_FIELD(std::uint64_t, "finetune.seed", "shuffling", c.finetune.seed),
        UV_FIELD(std::uint64_t, "data.seed", "scene, rig and instruction draws", c.data.seed),
        UV_FIELD(int, "data.scenes", "pre-training scenes", c.data.scenes),
        UV_FIELD(int, "data.rigs_per_scene", "", c.data.rigs_per_scene),
        UV_FIELD(int, "data.heldout_scenes", "", c.data.heldout_scenes),
        UV_FIELD(std::uint64_t, "data.heldout_offset", "scene index of the first held-out scene", c.data.heldout_offset),
        UV_FIELD(bool, "data.gripper", "random gripper sphere in pre-training scenes", c.data.gripper),
        UV_FIELD(int, "data.episodes", "expert demonstrations", c.data.episodes),
        UV_FIELD(int, "data.episode_max_steps", "", c.data.episode_max_steps),
        UV_FIELD(std::vector<TaskKind>, "data.tasks", "reach and/or lift", c.data.tasks),
        UV_FIELD(RigMode, "data.rigs", "seen|unseen|multi|joint", c.data.rigs),
        UV_FIELD(std::uint64_t, "eval.seed", "", c.eval.seed),
        UV_FIELD(std::uint64_t, "eval.first_scene", "", c.eval.first_scene),
        UV_FIELD(int, "eval.episodes", "", c.eval.episodes),
        UV_FIELD(int, "eval.max_steps", "actions per instruction", c.eval.max_steps),
        UV_FIELD(int, "eval.chain", "instructions per episode", c.eval.chain),
        UV_FIELD(RigMode, "eval.rigs", "seen|unseen", c.eval.rigs),
    };
    b.insert(b.end(), rest.begin(), rest.end());
    return b;
  }();
  return table;
}

#undef UV_FIELD

}  // namespace

OccModelConfig RunConfig::occ_model() const {
  OccModelConfig m = occ;
  m.uv.grid = grid;
  m.baseline_cameras = seen.cameras;
  return m;
}

PolicyModelConfig RunConfig::policy_model() const { return {occ_model().uv, policy}; }

void RunConfig::validate() const {
  try {
    grid.validate();
    occ_model().uv.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  for (const RigFamily* f : {&seen, &unseen})
    if (f->width % kBackboneStride || f->height % kBackboneStride || f->cameras < 1)
      throw ConfigError("rig images must be multiples of 8 with at least one camera");
  if (eval.rigs == RigMode::kMulti || eval.rigs == RigMode::kJoint) throw ConfigError("eval.rigs must be seen or unseen");
  if (data.scenes < 0 || data.episodes < 0 || data.rigs_per_scene < 1) throw ConfigError("data sizes");
}

SyntheticOccSpec RunConfig::pretrain_data(bool heldout) const {
  SyntheticOccSpec s;
  s.scenes = heldout ? data.heldout_scenes : data.scenes;
  s.rigs_per_scene = heldout ? 1 : data.rigs_per_scene;
  s.seed = data.seed;
  s.first_scene = heldout ? data.heldout_offset : 0;
  s.family = seen;
  s.scene = scene;
  s.grid = grid;
  s.gripper = data.gripper;
  return s;
}

SyntheticEpisodeSpec RunConfig::demo_data() const {
  SyntheticEpisodeSpec s;
  s.episodes = data.episodes;
  s.seed = data.seed;
  s.family = seen;
  s.unseen_family = unseen;
  s.rigs = data.rigs;
  s.scene = scene;
  s.env = env;
  s.tasks = data.tasks;
  s.max_steps = data.episode_max_steps;
  return s;
}

PolicyEvalSpec RunConfig::policy_eval() const {
  PolicyEvalSpec s;
  s.episodes = eval.episodes;
  s.seed = eval.seed;
  s.first_scene = eval.first_scene;
  s.family = eval.rigs == RigMode::kUnseen ? unseen : seen;
  s.scene = scene;
  s.env = env;
  s.tasks = data.tasks;
  s.max_steps = eval.max_steps;
  s.chain = eval.chain;
  return s;
}

std::vector<ConfigKey> config_keys() {
  std::vector<ConfigKey> out;
  for (const auto& b : bindings()) out.push_back({b.key, b.doc});
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::map<std::string, const Binding*> index;
  for (const auto& b : bindings()) index[b.key] = &b;
  std::istringstream in(text);
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(body.substr(0, eq));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second->set(base, trim(body.substr(eq + 1)));
  }
  base.validate();
  return base;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_string(const RunConfig& config) {
  std::string out;
  for (const auto& b : bindings()) {
    out += b.key + " = " + b.get(config);
    if (!b.doc.empty()) out += "  # " + b.doc;
    out += '\n';
  }
  return out;
}

void save_config(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << config_to_string(config);
}

}  // namespace uniview
