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

#include <ostream>
#include <string>
#include <vector>

#include "uniview/nn/tensor.hpp"

namespace uniview {

struct GradSuiteResult {
  std::string module;
  std::string name;
  double max_rel_error{0};
  double tolerance{0};
  nn::Index checked{0};
  bool pass() const { return checked > 0 && max_rel_error <= tolerance; }
};

/// Finite-difference checks of every differentiable op and the micro end-to-end pipelines.
/// module is one of all, numerics, uvformer, occupancy, policy; throws ConfigError otherwise.
/// Smooth scalar ops are held to 1e-6, compositions and piecewise paths to 1e-4.
std::vector<GradSuiteResult> run_grad_suite(const std::string& module, std::ostream* log = nullptr);

}  // namespace uniview
