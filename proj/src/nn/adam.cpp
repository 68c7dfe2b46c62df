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

#include "uniview/nn/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace uniview::nn {

double grad_norm(const ParamStore& store) {
  double sq = 0;
  for (const auto& [name, t] : store.params())
    if (!store.is_frozen(name) && t.has_grad()) sq += t.grad.squaredNorm();
  return std::sqrt(sq);
}

void adam_step(ParamStore& store, AdamState& state) {
  for (const auto& [name, t] : store.params())
    if (!store.is_frozen(name) && !t.has_grad())
      throw std::invalid_argument("adam_step: no gradient for unfrozen parameter " + name);

  const AdamConfig& cfg = state.config;
  double clip = 1.0;
  if (cfg.clip_norm > 0) {
    const double norm = grad_norm(store);
    if (norm > cfg.clip_norm) clip = cfg.clip_norm / norm;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto& [name, t] : store.params()) {
    if (store.is_frozen(name)) continue;
    auto [m_it, m_new] = state.first_moment.try_emplace(name, Matrix::Zero(t.value.rows(), t.value.cols()));
    auto [v_it, v_new] = state.second_moment.try_emplace(name, Matrix::Zero(t.value.rows(), t.value.cols()));
    Matrix& m = m_it->second;
    Matrix& v = v_it->second;
    const Matrix g = t.grad * clip;
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.cwiseAbs2();
    t.value.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg.eps);
  }
  store.zero_grad();
}

}  // namespace uniview::nn
