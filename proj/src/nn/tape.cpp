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

#include "uniview/nn/tape.hpp"

#include <stdexcept>

namespace uniview::nn {

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, false, {}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Matrix value) {
  nodes_.push_back({std::move(value), {}, true, {}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::param(ParamStore& store, const std::string& name) {
  if (auto it = param_nodes_.find(name); it != param_nodes_.end()) return {this, it->second};
  Tensor& t = store.at(name);
  const bool frozen = store.is_frozen(name);
  Var v = frozen ? constant(t.value) : input(t.value);
  param_nodes_.emplace(name, v.id());
  if (!frozen) bindings_.push_back({v.id(), &t});
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  nodes_.push_back({std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(Matrix value, const std::vector<Var>& inputs, Backward backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  nodes_.push_back({std::move(value), {}, needs, needs ? std::move(backward) : Backward{}});
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Matrix& Tape::accum(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var root, double seed) {
  if (value(root).size() != 1) throw std::invalid_argument("backward root must be 1x1");
  accum(root)(0, 0) += seed;
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    // Closures only accumulate into earlier nodes, so n.grad stays put.
    n.backward(*this, n.grad);
  }
  for (const Binding& b : bindings_) {
    Tensor& t = *b.tensor;
    if (!t.has_grad()) t.grad = Matrix::Zero(t.value.rows(), t.value.cols());
    if (nodes_[b.node].grad.size() != 0) t.grad += nodes_[b.node].grad;
  }
}

void Tape::mix_kink(std::uint64_t bits) {
  kink_hash_ ^= bits + 0x9E3779B97F4A7C15ULL + (kink_hash_ << 6) + (kink_hash_ >> 2);
}

}  // namespace uniview::nn
