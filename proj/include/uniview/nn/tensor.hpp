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
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace uniview::nn {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Shape = std::vector<Index>;

/// Dense 64-bit tensor. `value` views the data as (prod(shape[:-1]) x shape.back()).
struct Tensor {
  Shape shape;
  Matrix value;
  Matrix grad;  // empty until a gradient is accumulated

  Tensor() = default;
  explicit Tensor(Shape s);

  Index numel() const { return value.size(); }
  bool has_grad() const { return grad.size() == value.size() && grad.size() > 0; }
};

Index numel(const Shape& shape);
/// Rows of the 2-D view of `shape`.
Index leading(const Shape& shape);

/// Named parameters with prefix-based freezing. Iteration order is sorted by name.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Shape shape);
  Tensor& add_normal(const std::string& name, Shape shape, double stddev, std::mt19937_64& rng);
  Tensor& add_constant(const std::string& name, Shape shape, double value);

  bool contains(const std::string& name) const { return params_.count(name) > 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  /// Every parameter whose name starts with `prefix` is frozen.
  void freeze(const std::string& prefix) { frozen_prefixes_.insert(prefix); }
  void unfreeze_all() { frozen_prefixes_.clear(); }
  bool is_frozen(const std::string& name) const;

  void zero_grad();
  std::size_t size() const { return params_.size(); }
  Index total_numel() const;

  std::map<std::string, Tensor>& params() { return params_; }
  const std::map<std::string, Tensor>& params() const { return params_; }

  /// Copies values for every name present in both stores; returns the count copied.
  int copy_matching(const ParamStore& other, const std::string& prefix = "");

 private:
  std::map<std::string, Tensor> params_;
  std::set<std::string> frozen_prefixes_;
};

}  // namespace uniview::nn
