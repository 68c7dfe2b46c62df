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

#include <filesystem>
#include <string>

#include "json.hpp"

#include "uniview/geometry.hpp"
#include "uniview/scene.hpp"

namespace uniview {

/// Rig document: array of {fx, fy, cx, cy, width, height, rotation[9] row-major,
/// translation[3]} with world-to-camera poses in meters.
nlohmann::json rig_to_json(const Rig& rig);
Rig rig_from_json(const nlohmann::json& doc);

std::string rig_to_string(const Rig& rig);
Rig rig_from_string(const std::string& text);

void save_rig(const std::filesystem::path& path, const Rig& rig);
Rig load_rig(const std::filesystem::path& path);

/// Scene document: table fields plus an array of primitives {shape: "box"|"sphere", center,
/// size, radius, rgb, object_id, color_id}.
nlohmann::json scene_to_json(const SceneSpec& scene);
SceneSpec scene_from_json(const nlohmann::json& doc);
void save_scene(const std::filesystem::path& path, const SceneSpec& scene);
SceneSpec load_scene(const std::filesystem::path& path);

}  // namespace uniview
