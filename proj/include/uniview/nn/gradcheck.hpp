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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "uniview/nn/tape.hpp"

namespace uniview::nn {

struct GradCheckResult {
  double max_rel_error{0};
  Index checked{0};
  Index skipped{0};  // perturbations that crossed a kink
  std::string worst;  // location of the worst coordinate
};

/// Relative error |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

using InputLossFn = std::function<Var(Tape&, std::span<const Var>)>;
using ParamLossFn = std::function<Var(Tape&, ParamStore&)>;

/// Central differences (five-point stencil) on every coordinate of every input against the tape's gradient.
/// Perturbations whose kink signature differs from the unperturbed one are skipped.
GradCheckResult grad_check(const InputLossFn& loss, std::vector<Matrix> inputs, double eps = 1e-4);

/// Same over the unfrozen parameters of a store. When max_coords_per_tensor > 0, a seeded
/// random subset of that many coordinates is checked per parameter.
GradCheckResult grad_check_params(const ParamLossFn& loss, ParamStore& store, double eps = 1e-4,
                                  Index max_coords_per_tensor = 0, std::uint64_t seed = 0);

}  // namespace uniview::nn
