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

#include <map>
#include <string>

#include "uniview/nn/tensor.hpp"

namespace uniview::nn {

struct AdamConfig {
  double lr{1e-3};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};
  double clip_norm{0.0};  // global gradient-norm clip; 0 disables
};

struct AdamState {
  AdamConfig config;
  long step{0};
  std::map<std::string, Matrix> first_moment;
  std::map<std::string, Matrix> second_moment;

  AdamState() = default;
  explicit AdamState(AdamConfig c) : config(c) {}
};

/// Bias-corrected Adam update over every unfrozen parameter, then clears all gradients.
/// Throws std::invalid_argument when an unfrozen parameter has no gradient.
void adam_step(ParamStore& store, AdamState& state);

/// Global L2 norm over the gradients of unfrozen parameters.
double grad_norm(const ParamStore& store);

}  // namespace uniview::nn
