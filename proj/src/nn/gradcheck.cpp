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

#include "uniview/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace uniview::nn {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

namespace {

struct Probe {
  double value;
  std::uint64_t signature;
};

template <typename Eval>
void check_coordinate(GradCheckResult& result, double& x, double analytic, double eps,
                      std::uint64_t base_signature, const Eval& eval, const std::string& where) {
  // Five-point central stencil: truncation error O(eps^4), so eps can stay large enough
  // that cancellation does not swamp small gradients.
  const double saved = x;
  double f[4];
  const double offsets[4] = {2 * eps, eps, -eps, -2 * eps};
  for (int k = 0; k < 4; ++k) {
    x = saved + offsets[k];
    const Probe p = eval();
    if (p.signature != base_signature) {
      x = saved;
      ++result.skipped;
      return;
    }
    f[k] = p.value;
  }
  x = saved;
  const double numeric = (8 * (f[1] - f[2]) - (f[0] - f[3])) / (12 * eps);
  const double err = relative_error(analytic, numeric);
  ++result.checked;
  if (err > result.max_rel_error) {
    result.max_rel_error = err;
    result.worst = where;
  }
}

}  // namespace

GradCheckResult grad_check(const InputLossFn& loss, std::vector<Matrix> inputs, double eps) {
  std::vector<Matrix> analytic;
  std::uint64_t base_signature;
  {
    Tape tape;
    tape.set_track_kinks(true);
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.input(m));
    const Var out = loss(tape, vars);
    base_signature = tape.kink_signature();
    tape.backward(out);
    for (const Var& v : vars) analytic.push_back(tape.grad(v));
  }
  auto eval = [&]() -> Probe {
    Tape tape;
    tape.set_track_kinks(true);
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.constant(m));
    const Var out = loss(tape, vars);
    return {out.scalar(), tape.kink_signature()};
  };
  GradCheckResult result;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (Index j = 0; j < inputs[i].size(); ++j)
      check_coordinate(result, inputs[i].data()[j], analytic[i].data()[j], eps, base_signature, eval,
                       "input " + std::to_string(i) + "[" + std::to_string(j) + "]");
  return result;
}

GradCheckResult grad_check_params(const ParamLossFn& loss, ParamStore& store, double eps,
                                  Index max_coords_per_tensor, std::uint64_t seed) {
  store.zero_grad();
  std::uint64_t base_signature;
  {
    Tape tape;
    tape.set_track_kinks(true);
    const Var out = loss(tape, store);
    base_signature = tape.kink_signature();
    tape.backward(out);
  }
  auto eval = [&]() -> Probe {
    Tape tape;
    tape.set_track_kinks(true);
    const Var out = loss(tape, store);
    return {out.scalar(), tape.kink_signature()};
  };
  std::mt19937_64 rng(seed);
  GradCheckResult result;
  for (auto& [name, t] : store.params()) {
    if (store.is_frozen(name)) continue;
    const Matrix analytic = t.has_grad() ? t.grad : Matrix::Zero(t.value.rows(), t.value.cols());
    std::vector<Index> coords(static_cast<std::size_t>(t.value.size()));
    std::iota(coords.begin(), coords.end(), Index{0});
    if (max_coords_per_tensor > 0 && static_cast<Index>(coords.size()) > max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(static_cast<std::size_t>(max_coords_per_tensor));
    }
    for (Index j : coords)
      check_coordinate(result, t.value.data()[j], analytic.data()[j], eps, base_signature, eval,
                       name + "[" + std::to_string(j) + "]");
  }
  store.zero_grad();
  return result;
}

}  // namespace uniview::nn
