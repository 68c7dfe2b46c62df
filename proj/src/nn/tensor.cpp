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

#include "uniview/nn/tensor.hpp"

#include <numeric>
#include <stdexcept>

#include "uniview/errors.hpp"

namespace uniview::nn {

Index numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

Index leading(const Shape& shape) { return shape.empty() ? 1 : numel(shape) / shape.back(); }

Tensor::Tensor(Shape s) : shape(std::move(s)) {
  if (shape.empty()) shape = {1};
  value = Matrix::Zero(leading(shape), shape.back());
}

Tensor& ParamStore::add(const std::string& name, Shape shape) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  return params_.emplace(name, Tensor(std::move(shape))).first->second;
}

Tensor& ParamStore::add_normal(const std::string& name, Shape shape, double stddev,
                               std::mt19937_64& rng) {
  Tensor& t = add(name, std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = dist(rng);
  return t;
}

Tensor& ParamStore::add_constant(const std::string& name, Shape shape, double value) {
  Tensor& t = add(name, std::move(shape));
  t.value.setConstant(value);
  return t;
}

Tensor& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

const Tensor& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

bool ParamStore::is_frozen(const std::string& name) const {
  for (const auto& prefix : frozen_prefixes_)
    if (name.compare(0, prefix.size(), prefix) == 0) return true;
  return false;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) t.grad.resize(0, 0);
}

Index ParamStore::total_numel() const {
  Index n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

int ParamStore::copy_matching(const ParamStore& other, const std::string& prefix) {
  int copied = 0;
  for (auto& [name, t] : params_) {
    if (name.compare(0, prefix.size(), prefix) != 0 || !other.contains(name)) continue;
    const Tensor& src = other.at(name);
    if (src.shape != t.shape) throw ShapeError("parameter " + name + " has a different shape");
    t.value = src.value;
    ++copied;
  }
  return copied;
}

}  // namespace uniview::nn
