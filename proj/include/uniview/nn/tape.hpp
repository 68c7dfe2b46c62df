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
#include <initializer_list>
#include <string>
#include <unordered_map>
#include <vector>

#include "uniview/nn/tensor.hpp"

namespace uniview::nn {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

 private:
  Tape* tape_{nullptr};
  int id_{-1};
};

/// Reverse-mode tape. Each op records its output value and a closure that maps the output
/// gradient onto its inputs; backward() replays closures in reverse recording order.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Differentiable leaf; its gradient is read back with grad().
  Var input(Matrix value);
  /// Leaf bound to a stored parameter. Frozen parameters become constants.
  /// backward() adds the gradient into the parameter's grad buffer.
  Var param(ParamStore& store, const std::string& name);

  /// Records an op. The closure is dropped when no input needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward backward);
  Var record(Matrix value, const std::vector<Var>& inputs, Backward backward);

  const Matrix& value(Var v) const { return nodes_[v.id()].value; }
  bool needs_grad(Var v) const { return nodes_[v.id()].needs_grad; }
  /// Gradient accumulated so far (zeros when none reached the node).
  Matrix grad(Var v) const;
  /// Mutable gradient buffer, allocated on first use.
  Matrix& accum(Var v);

  /// Seeds d(root)/d(root) = seed for a 1x1 root and propagates.
  void backward(Var root, double seed = 1.0);

  /// Kink tracking: ops with non-smooth points hash their branch choices so a
  /// finite-difference checker can discard perturbations that cross a kink.
  void set_track_kinks(bool on) { track_kinks_ = on; }
  bool track_kinks() const { return track_kinks_; }
  void mix_kink(std::uint64_t bits);
  std::uint64_t kink_signature() const { return kink_hash_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad{false};
    Backward backward;
  };
  struct Binding {
    int node;
    Tensor* tensor;
  };

  std::vector<Node> nodes_;
  std::vector<Binding> bindings_;
  std::unordered_map<std::string, int> param_nodes_;
  bool track_kinks_{false};
  std::uint64_t kink_hash_{0x84222325CBF29CE4ULL};
};

inline const Matrix& Var::value() const { return tape_->value(*this); }

}  // namespace uniview::nn
