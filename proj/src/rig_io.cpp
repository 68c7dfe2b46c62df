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

#include "uniview/rig_io.hpp"

#include <fstream>
#include <sstream>

#include "uniview/errors.hpp"

namespace uniview {

nlohmann::json rig_to_json(const Rig& rig) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& cam : rig.cameras) {
    const auto& k = cam.intrinsics;
    nlohmann::json c;
    c["fx"] = k.fx;
    c["fy"] = k.fy;
    c["cx"] = k.cx;
    c["cy"] = k.cy;
    c["width"] = k.width;
    c["height"] = k.height;
    std::vector<double> rot(9), trans(3);
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) rot[r * 3 + col] = cam.pose.rotation(r, col);
      trans[r] = cam.pose.translation[r];
    }
    c["rotation"] = rot;
    c["translation"] = trans;
    doc.push_back(std::move(c));
  }
  return doc;
}

Rig rig_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw IoError("rig document must be a JSON array of cameras");
  Rig rig;
  try {
    for (const auto& c : doc) {
      Cam cam;
      auto& k = cam.intrinsics;
      k.fx = c.at("fx").get<double>();
      k.fy = c.at("fy").get<double>();
      k.cx = c.at("cx").get<double>();
      k.cy = c.at("cy").get<double>();
      k.width = c.at("width").get<int>();
      k.height = c.at("height").get<int>();
      const auto rot = c.at("rotation").get<std::vector<double>>();
      const auto trans = c.at("translation").get<std::vector<double>>();
      if (rot.size() != 9 || trans.size() != 3)
        throw IoError("rotation needs 9 numbers and translation 3");
      for (int r = 0; r < 3; ++r) {
        for (int col = 0; col < 3; ++col) cam.pose.rotation(r, col) = rot[r * 3 + col];
        cam.pose.translation[r] = trans[r];
      }
      rig.cameras.push_back(cam);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed rig JSON: ") + e.what());
  }
  rig.validate();
  return rig;
}

std::string rig_to_string(const Rig& rig) { return rig_to_json(rig).dump(); }

Rig rig_from_string(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed rig JSON: ") + e.what());
  }
  return rig_from_json(doc);
}

void save_rig(const std::filesystem::path& path, const Rig& rig) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << rig_to_json(rig).dump(2) << "\n";
}

Rig load_rig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return rig_from_string(ss.str());
}

namespace {

std::vector<double> vec(const Eigen::Ref<const Eigen::VectorXd>& v) { return {v.data(), v.data() + v.size()}; }

template <int N>
Eigen::Matrix<double, N, 1> fixed(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != N) throw IoError("scene JSON: wrong vector length");
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = v[static_cast<std::size_t>(i)];
  return out;
}

}  // namespace

nlohmann::json scene_to_json(const SceneSpec& scene) {
  nlohmann::json doc;
  doc["table_height"] = scene.table_height;
  doc["table_visible"] = scene.table_visible;
  doc["table_min"] = vec(scene.table_min);
  doc["table_max"] = vec(scene.table_max);
  doc["table_rgb"] = vec(scene.table_rgb);
  doc["primitives"] = nlohmann::json::array();
  for (const auto& p : scene.primitives) {
    nlohmann::json j;
    j["shape"] = p.shape == ShapeKind::kBox ? "box" : "sphere";
    j["center"] = vec(p.center);
    j["size"] = vec(p.size);
    j["radius"] = p.radius;
    j["rgb"] = vec(p.rgb);
    j["object_id"] = p.object_id;
    j["color_id"] = p.color_id;
    doc["primitives"].push_back(std::move(j));
  }
  return doc;
}

SceneSpec scene_from_json(const nlohmann::json& doc) {
  SceneSpec s;
  try {
    s.table_height = doc.at("table_height").get<double>();
    s.table_visible = doc.at("table_visible").get<bool>();
    s.table_min = fixed<2>(doc.at("table_min"));
    s.table_max = fixed<2>(doc.at("table_max"));
    s.table_rgb = fixed<3>(doc.at("table_rgb"));
    for (const auto& j : doc.at("primitives")) {
      Primitive p;
      const auto shape = j.at("shape").get<std::string>();
      if (shape != "box" && shape != "sphere") throw IoError("scene JSON: unknown shape " + shape);
      p.shape = shape == "box" ? ShapeKind::kBox : ShapeKind::kSphere;
      p.center = fixed<3>(j.at("center"));
      p.size = fixed<3>(j.at("size"));
      p.radius = j.at("radius").get<double>();
      p.rgb = fixed<3>(j.at("rgb"));
      p.object_id = j.at("object_id").get<int>();
      p.color_id = j.at("color_id").get<int>();
      s.primitives.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed scene JSON: ") + e.what());
  }
  return s;
}

void save_scene(const std::filesystem::path& path, const SceneSpec& scene) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << scene_to_json(scene).dump(2) << "\n";
}

SceneSpec load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return scene_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed scene JSON: ") + e.what());
  }
}

}  // namespace uniview
