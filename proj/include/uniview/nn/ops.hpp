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

#include <span>
#include <utility>
#include <vector>

#include "uniview/nn/tape.hpp"

namespace uniview::nn {

// Shape errors throw uniview::ShapeError. All ops take and return 2-D row-major values.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var scale(Var a, double s);
/// a (R x C) + bias (1 x C) broadcast over rows.
Var add_row(Var a, Var bias);
/// x W + b with W (in x out) and b (1 x out).
Var affine(Var x, Var weight, Var bias);
/// x W without bias.
Var linear(Var x, Var weight);

Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);
/// Row-wise normalization over columns with learned gain and shift (1 x C each).
Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);
Var softmax_rows(Var x);

Var sum_all(Var x);
Var mean_all(Var x);
/// Row-major reinterpretation.
Var reshape(Var x, Index rows, Index cols);
Var slice_cols(Var x, Index start, Index count);
Var slice_rows(Var x, Index start, Index count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
/// Rows where keep[r] is false become zero.
Var mask_rows(Var x, const std::vector<std::uint8_t>& keep);
/// Row r from a where pick_a[r], else from b.
Var select_rows(const std::vector<std::uint8_t>& pick_a, Var a, Var b);

/// Elementwise max over the rows of an I x C token set, giving 1 x C.
Var max_pool_rows(Var tokens);

/// 3x3 convolution, zero padding 1. x is (H*W x Cin) in row-major pixel order,
/// weight is (9*Cin x Cout) ordered (ky, kx, cin). Output is (Ho*Wo x Cout).
Var conv3x3(Var x, int height, int width, Var weight, Var bias, int stride);
int conv_out_extent(int extent, int stride);

/// Average pooling of an (H*W x C) map onto an out_h x out_w grid of equal blocks.
Var avg_pool_grid(Var x, int height, int width, int out_h, int out_w);

/// Bilinear lookup in an (H'*W' x C) map at normalized uv in [0,1]^2, mapped to
/// [0, W'-1] x [0, H'-1]. Outside the unit square the result and its gradients are zero.
Var bilinear_sample(Var featmap, int height, int width, Var uv);

struct LstmState {
  Var h, c;
};
/// Gates packed (i, f, g, o): z = x Wx + h Wh + b.
LstmState lstm_cell(Var x, const LstmState& prev, Var wx, Var wh, Var b);

// Losses, each mean-reduced to 1x1.
Var mse(Var pred, const Matrix& target);
Var l1(Var pred, const Matrix& target);
/// L1 over rows with row_mask[r] set; zero when the mask is empty.
Var l1_masked(Var pred, const Matrix& target, const std::vector<std::uint8_t>& row_mask);
/// Binary cross-entropy on logits against labels in {0,1}.
Var bce_logits(Var logits, const Matrix& labels);
/// Softmax cross-entropy over each row of logits against a class index per row.
Var cross_entropy_logits(Var logits, const std::vector<int>& labels);

// Forward kernels shared with fused ops.
namespace kernel {

struct BilinearTap {
  bool inside{false};
  int x0{0}, y0{0}, x1{0}, y1{0};
  double wx{0}, wy{0};
};
BilinearTap bilinear_tap(int height, int width, double u, double v);

/// out += weight * sample(featmap[:, col0:col0+count]) at the tap.
void bilinear_gather(const Matrix& featmap, int width, const BilinearTap& tap, Index col0,
                     Index count, double weight, double* out);
/// Adds weight * grad to featmap_grad at the tap's four corners.
void bilinear_scatter(Matrix& featmap_grad, int width, const BilinearTap& tap, Index col0,
                      Index count, double weight, const double* grad);
/// d(sample . grad)/d(u, v) in normalized units.
std::pair<double, double> bilinear_uv_grad(const Matrix& featmap, int height, int width,
                                           const BilinearTap& tap, Index col0, Index count,
                                           const double* grad);

Matrix softmax_rows(const Matrix& x);
double sigmoid(double x);
/// log(1 + exp(x)) without overflow.
double softplus(double x);

}  // namespace kernel

}  // namespace uniview::nn
