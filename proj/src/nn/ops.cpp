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

#include "uniview/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uniview/errors.hpp"

namespace uniview::nn {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

Tape& tape_of(Var v) {
  require(v.valid(), "operation on an unbound Var");
  return *v.tape();
}

void require_same(Var a, Var b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), what);
  require(a.tape() == b.tape(), "operands live on different tapes");
}

/// Packs boolean branch choices 64 at a time into the tape's kink signature.
template <typename Pred>
void mix_bits(Tape& t, Index count, Pred pred) {
  if (!t.track_kinks()) return;
  std::uint64_t word = 0;
  for (Index i = 0; i < count; ++i) {
    word = (word << 1) | (pred(i) ? 1u : 0u);
    if ((i & 63) == 63) {
      t.mix_kink(word);
      word = 0;
    }
  }
  t.mix_kink(word ^ static_cast<std::uint64_t>(count));
}

}  // namespace

namespace kernel {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const double m = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - m).exp();
    y.row(r) /= y.row(r).sum();
  }
  return y;
}

BilinearTap bilinear_tap(int height, int width, double u, double v) {
  BilinearTap tap;
  if (!(u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0)) return tap;
  tap.inside = true;
  const double x = u * (width - 1);
  const double y = v * (height - 1);
  tap.x0 = std::min(static_cast<int>(std::floor(x)), width - 1);
  tap.y0 = std::min(static_cast<int>(std::floor(y)), height - 1);
  tap.x1 = std::min(tap.x0 + 1, width - 1);
  tap.y1 = std::min(tap.y0 + 1, height - 1);
  tap.wx = x - tap.x0;
  tap.wy = y - tap.y0;
  return tap;
}

void bilinear_gather(const Matrix& featmap, int width, const BilinearTap& tap, Index col0,
                     Index count, double weight, double* out) {
  if (!tap.inside) return;
  const double w00 = (1 - tap.wx) * (1 - tap.wy) * weight, w01 = tap.wx * (1 - tap.wy) * weight;
  const double w10 = (1 - tap.wx) * tap.wy * weight, w11 = tap.wx * tap.wy * weight;
  const double* f00 = featmap.row(tap.y0 * width + tap.x0).data() + col0;
  const double* f01 = featmap.row(tap.y0 * width + tap.x1).data() + col0;
  const double* f10 = featmap.row(tap.y1 * width + tap.x0).data() + col0;
  const double* f11 = featmap.row(tap.y1 * width + tap.x1).data() + col0;
  for (Index c = 0; c < count; ++c) out[c] += w00 * f00[c] + w01 * f01[c] + w10 * f10[c] + w11 * f11[c];
}

void bilinear_scatter(Matrix& featmap_grad, int width, const BilinearTap& tap, Index col0,
                      Index count, double weight, const double* grad) {
  if (!tap.inside) return;
  const double w[4] = {(1 - tap.wx) * (1 - tap.wy) * weight, tap.wx * (1 - tap.wy) * weight,
                       (1 - tap.wx) * tap.wy * weight, tap.wx * tap.wy * weight};
  const int rows[4] = {tap.y0 * width + tap.x0, tap.y0 * width + tap.x1, tap.y1 * width + tap.x0,
                       tap.y1 * width + tap.x1};
  for (int k = 0; k < 4; ++k) {
    double* dst = featmap_grad.row(rows[k]).data() + col0;
    for (Index c = 0; c < count; ++c) dst[c] += w[k] * grad[c];
  }
}

std::pair<double, double> bilinear_uv_grad(const Matrix& featmap, int height, int width,
                                           const BilinearTap& tap, Index col0, Index count,
                                           const double* grad) {
  if (!tap.inside) return {0.0, 0.0};
  const double* f00 = featmap.row(tap.y0 * width + tap.x0).data() + col0;
  const double* f01 = featmap.row(tap.y0 * width + tap.x1).data() + col0;
  const double* f10 = featmap.row(tap.y1 * width + tap.x0).data() + col0;
  const double* f11 = featmap.row(tap.y1 * width + tap.x1).data() + col0;
  double dx = 0, dy = 0;
  for (Index c = 0; c < count; ++c) {
    dx += grad[c] * ((1 - tap.wy) * (f01[c] - f00[c]) + tap.wy * (f11[c] - f10[c]));
    dy += grad[c] * ((1 - tap.wx) * (f10[c] - f00[c]) + tap.wx * (f11[c] - f01[c]));
  }
  return {dx * (width - 1), dy * (height - 1)};
}

}  // namespace kernel

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Tape& t = tape_of(a);
  Matrix y = a.value() * b.value();
  return t.record(std::move(y), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accum(a).noalias() += g * t.value(b).transpose();
    if (t.needs_grad(b)) t.accum(b).noalias() += t.value(a).transpose() * g;
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  return t.record(a.value().transpose(), {a}, [a](Tape& t, const Matrix& g) {
    t.accum(a) += g.transpose();
  });
}

Var add(Var a, Var b) {
  require_same(a, b, "add: shapes differ");
  Tape& t = tape_of(a);
  return t.record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accum(a) += g;
    if (t.needs_grad(b)) t.accum(b) += g;
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub: shapes differ");
  Tape& t = tape_of(a);
  return t.record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accum(a) += g;
    if (t.needs_grad(b)) t.accum(b) -= g;
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul: shapes differ");
  Tape& t = tape_of(a);
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accum(a) += g.cwiseProduct(t.value(b));
    if (t.needs_grad(b)) t.accum(b) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  return t.record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.accum(a) += g * s; });
}

Var add_row(Var a, Var bias) {
  require(bias.rows() == 1 && bias.cols() == a.cols(), "add_row: bias must be 1 x cols");
  Tape& t = tape_of(a);
  Matrix y = a.value().rowwise() + bias.value().row(0);
  return t.record(std::move(y), {a, bias}, [a, bias](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accum(a) += g;
    if (t.needs_grad(bias)) t.accum(bias) += g.colwise().sum();
  });
}

Var affine(Var x, Var weight, Var bias) {
  require(x.cols() == weight.rows(), "affine: input width differs from weight rows");
  require(bias.rows() == 1 && bias.cols() == weight.cols(), "affine: bias must be 1 x out");
  Tape& t = tape_of(x);
  Matrix y = x.value() * weight.value();
  y.rowwise() += bias.value().row(0);
  return t.record(std::move(y), {x, weight, bias}, [x, weight, bias](Tape& t, const Matrix& g) {
    if (t.needs_grad(x)) t.accum(x).noalias() += g * t.value(weight).transpose();
    if (t.needs_grad(weight)) t.accum(weight).noalias() += t.value(x).transpose() * g;
    if (t.needs_grad(bias)) t.accum(bias) += g.colwise().sum();
  });
}

Var linear(Var x, Var weight) { return matmul(x, weight); }

Var relu(Var x) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  mix_bits(t, xv.size(), [&](Index i) { return xv.data()[i] > 0; });
  return t.record(xv.cwiseMax(0.0), {x}, [x](Tape& t, const Matrix& g) {
    t.accum(x) += (t.value(x).array() > 0).select(g, 0.0);
  });
}

Var sigmoid(Var x) {
  Tape& t = tape_of(x);
  Matrix y = x.value().unaryExpr([](double v) { return kernel::sigmoid(v); });
  return t.record(y, {x}, [x, y](Tape& t, const Matrix& g) {
    t.accum(x) += g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
  });
}

Var tanh(Var x) {
  Tape& t = tape_of(x);
  Matrix y = x.value().array().tanh().matrix();
  return t.record(y, {x}, [x, y](Tape& t, const Matrix& g) {
    t.accum(x) += g.cwiseProduct((1.0 - y.array().square()).matrix());
  });
}

Var layer_norm(Var x, Var gain, Var shift, double eps) {
  const Index cols = x.cols();
  require(gain.rows() == 1 && gain.cols() == cols && shift.rows() == 1 && shift.cols() == cols,
          "layer_norm: gain and shift must be 1 x cols");
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), cols);
  Eigen::VectorXd inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std[r];
  }
  Matrix y = xhat.array().rowwise() * gain.value().row(0).array();
  y.rowwise() += shift.value().row(0);
  return t.record(std::move(y), {x, gain, shift},
                  [x, gain, shift, xhat = std::move(xhat), inv_std](Tape& t, const Matrix& g) {
                    if (t.needs_grad(shift)) t.accum(shift) += g.colwise().sum();
                    if (t.needs_grad(gain)) t.accum(gain) += g.cwiseProduct(xhat).colwise().sum();
                    if (!t.needs_grad(x)) return;
                    const Matrix dxhat = g.array().rowwise() * t.value(gain).row(0).array();
                    Matrix& gx = t.accum(x);
                    for (Index r = 0; r < g.rows(); ++r) {
                      const double m1 = dxhat.row(r).mean();
                      const double m2 = dxhat.row(r).dot(xhat.row(r)) / xhat.cols();
                      gx.row(r).array() +=
                          inv_std[r] * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
                    }
                  });
}

Var softmax_rows(Var x) {
  Tape& t = tape_of(x);
  Matrix y = kernel::softmax_rows(x.value());
  return t.record(y, {x}, [x, y](Tape& t, const Matrix& g) {
    const Eigen::VectorXd dots = g.cwiseProduct(y).rowwise().sum();
    t.accum(x) += y.cwiseProduct((g.colwise() - dots));
  });
}

Var sum_all(Var x) {
  Tape& t = tape_of(x);
  Matrix y(1, 1);
  y(0, 0) = x.value().sum();
  return t.record(std::move(y), {x}, [x](Tape& t, const Matrix& g) {
    t.accum(x).array() += g(0, 0);
  });
}

Var mean_all(Var x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.value().size())); }

Var reshape(Var x, Index rows, Index cols) {
  require(rows * cols == x.value().size(), "reshape: element count differs");
  Tape& t = tape_of(x);
  Matrix y = Eigen::Map<const Matrix>(x.value().data(), rows, cols);
  return t.record(std::move(y), {x}, [x](Tape& t, const Matrix& g) {
    Matrix& gx = t.accum(x);
    Eigen::Map<Matrix>(gx.data(), g.rows(), g.cols()) += g;
  });
}

Var slice_cols(Var x, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= x.cols(), "slice_cols: range out of bounds");
  Tape& t = tape_of(x);
  return t.record(x.value().middleCols(start, count), {x}, [x, start, count](Tape& t, const Matrix& g) {
    t.accum(x).middleCols(start, count) += g;
  });
}

Var slice_rows(Var x, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= x.rows(), "slice_rows: range out of bounds");
  Tape& t = tape_of(x);
  return t.record(x.value().middleRows(start, count), {x}, [x, start, count](Tape& t, const Matrix& g) {
    t.accum(x).middleRows(start, count) += g;
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no parts");
  Tape& t = tape_of(parts[0]);
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const Var& p : parts) {
    require(p.cols() == cols, "concat_rows: widths differ");
    rows += p.rows();
  }
  Matrix y(rows, cols);
  Index r = 0;
  for (const Var& p : parts) {
    y.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(y), inputs, [inputs](Tape& t, const Matrix& g) {
    Index r = 0;
    for (const Var& p : inputs) {
      if (t.needs_grad(p)) t.accum(p) += g.middleRows(r, p.rows());
      r += p.rows();
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no parts");
  Tape& t = tape_of(parts[0]);
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols: heights differ");
    cols += p.cols();
  }
  Matrix y(rows, cols);
  Index c = 0;
  for (const Var& p : parts) {
    y.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.record(std::move(y), inputs, [inputs](Tape& t, const Matrix& g) {
    Index c = 0;
    for (const Var& p : inputs) {
      if (t.needs_grad(p)) t.accum(p) += g.middleCols(c, p.cols());
      c += p.cols();
    }
  });
}

Var mask_rows(Var x, const std::vector<std::uint8_t>& keep) {
  require(static_cast<Index>(keep.size()) == x.rows(), "mask_rows: mask length differs from rows");
  Tape& t = tape_of(x);
  Matrix y = x.value();
  for (Index r = 0; r < y.rows(); ++r)
    if (!keep[r]) y.row(r).setZero();
  return t.record(std::move(y), {x}, [x, keep](Tape& t, const Matrix& g) {
    Matrix& gx = t.accum(x);
    for (Index r = 0; r < g.rows(); ++r)
      if (keep[r]) gx.row(r) += g.row(r);
  });
}

Var select_rows(const std::vector<std::uint8_t>& pick_a, Var a, Var b) {
  require_same(a, b, "select_rows: shapes differ");
  require(static_cast<Index>(pick_a.size()) == a.rows(), "select_rows: mask length differs from rows");
  Tape& t = tape_of(a);
  Matrix y = b.value();
  for (Index r = 0; r < y.rows(); ++r)
    if (pick_a[r]) y.row(r) = a.value().row(r);
  return t.record(std::move(y), {a, b}, [a, b, pick_a](Tape& t, const Matrix& g) {
    for (Index r = 0; r < g.rows(); ++r) {
      const Var dst = pick_a[r] ? a : b;
      if (t.needs_grad(dst)) t.accum(dst).row(r) += g.row(r);
    }
  });
}

Var max_pool_rows(Var tokens) {
  require(tokens.rows() >= 1, "max_pool_rows: empty token set");
  Tape& t = tape_of(tokens);
  const Matrix& x = tokens.value();
  std::vector<Index> arg(x.cols());
  Matrix y(1, x.cols());
  for (Index c = 0; c < x.cols(); ++c) y(0, c) = x.col(c).maxCoeff(&arg[c]);
  if (t.track_kinks())
    for (Index c = 0; c < x.cols(); ++c) t.mix_kink(static_cast<std::uint64_t>(arg[c] * 131 + c));
  return t.record(std::move(y), {tokens}, [tokens, arg](Tape& t, const Matrix& g) {
    Matrix& gx = t.accum(tokens);
    for (Index c = 0; c < g.cols(); ++c) gx(arg[c], c) += g(0, c);
  });
}

int conv_out_extent(int extent, int stride) { return (extent + 2 - 3) / stride + 1; }

Var conv3x3(Var x, int height, int width, Var weight, Var bias, int stride) {
  const Index cin = x.cols();
  require(x.rows() == static_cast<Index>(height) * width, "conv3x3: rows differ from height*width");
  require(weight.rows() == 9 * cin, "conv3x3: weight rows must be 9*Cin");
  require(bias.rows() == 1 && bias.cols() == weight.cols(), "conv3x3: bias must be 1 x Cout");
  require(stride >= 1, "conv3x3: stride must be positive");
  Tape& t = tape_of(x);
  const int ho = conv_out_extent(height, stride), wo = conv_out_extent(width, stride);
  Matrix cols = Matrix::Zero(static_cast<Index>(ho) * wo, 9 * cin);
  const Matrix& xv = x.value();
  for (int oy = 0; oy < ho; ++oy) {
    for (int ox = 0; ox < wo; ++ox) {
      const Index o = static_cast<Index>(oy) * wo + ox;
      for (int ky = 0; ky < 3; ++ky) {
        const int iy = oy * stride - 1 + ky;
        if (iy < 0 || iy >= height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int ix = ox * stride - 1 + kx;
          if (ix < 0 || ix >= width) continue;
          cols.row(o).segment((ky * 3 + kx) * cin, cin) = xv.row(static_cast<Index>(iy) * width + ix);
        }
      }
    }
  }
  Matrix y = cols * weight.value();
  y.rowwise() += bias.value().row(0);
  return t.record(
      std::move(y), {x, weight, bias},
      [x, weight, bias, cols = std::move(cols), height, width, ho, wo, stride, cin](Tape& t, const Matrix& g) {
        if (t.needs_grad(weight)) t.accum(weight).noalias() += cols.transpose() * g;
        if (t.needs_grad(bias)) t.accum(bias) += g.colwise().sum();
        if (!t.needs_grad(x)) return;
        const Matrix gcols = g * t.value(weight).transpose();
        Matrix& gx = t.accum(x);
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox) {
            const Index o = static_cast<Index>(oy) * wo + ox;
            for (int ky = 0; ky < 3; ++ky) {
              const int iy = oy * stride - 1 + ky;
              if (iy < 0 || iy >= height) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int ix = ox * stride - 1 + kx;
                if (ix < 0 || ix >= width) continue;
                gx.row(static_cast<Index>(iy) * width + ix) += gcols.row(o).segment((ky * 3 + kx) * cin, cin);
              }
            }
          }
        }
      });
}

Var avg_pool_grid(Var x, int height, int width, int out_h, int out_w) {
  require(x.rows() == static_cast<Index>(height) * width, "avg_pool_grid: rows differ from height*width");
  require(out_h >= 1 && out_w >= 1 && out_h <= height && out_w <= width, "avg_pool_grid: bad output grid");
  Tape& t = tape_of(x);
  // Pooling is linear: y = P x with a fixed sparse averaging operator.
  std::vector<std::vector<Index>> blocks(static_cast<std::size_t>(out_h) * out_w);
  for (int i = 0; i < out_h; ++i)
    for (int j = 0; j < out_w; ++j)
      for (int r = i * height / out_h; r < (i + 1) * height / out_h; ++r)
        for (int c = j * width / out_w; c < (j + 1) * width / out_w; ++c)
          blocks[i * out_w + j].push_back(static_cast<Index>(r) * width + c);
  Matrix y = Matrix::Zero(static_cast<Index>(blocks.size()), x.cols());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (Index r : blocks[b]) y.row(b) += x.value().row(r);
    y.row(b) /= static_cast<double>(blocks[b].size());
  }
  return t.record(std::move(y), {x}, [x, blocks](Tape& t, const Matrix& g) {
    Matrix& gx = t.accum(x);
    for (std::size_t b = 0; b < blocks.size(); ++b)
      for (Index r : blocks[b]) gx.row(r) += g.row(b) / static_cast<double>(blocks[b].size());
  });
}

Var bilinear_sample(Var featmap, int height, int width, Var uv) {
  require(featmap.rows() == static_cast<Index>(height) * width && featmap.rows() > 0,
          "bilinear_sample: feature map rows differ from height*width");
  require(uv.rows() == 1 && uv.cols() == 2, "bilinear_sample: uv must be 1 x 2");
  Tape& t = tape_of(featmap);
  const auto tap = kernel::bilinear_tap(height, width, uv.value()(0, 0), uv.value()(0, 1));
  if (t.track_kinks())
    t.mix_kink(tap.inside ? static_cast<std::uint64_t>(tap.y0 * 7919 + tap.x0 + 1) : 0);
  const Index c = featmap.cols();
  Matrix y = Matrix::Zero(1, c);
  kernel::bilinear_gather(featmap.value(), width, tap, 0, c, 1.0, y.data());
  return t.record(std::move(y), {featmap, uv}, [featmap, uv, tap, height, width, c](Tape& t, const Matrix& g) {
    if (t.needs_grad(featmap)) kernel::bilinear_scatter(t.accum(featmap), width, tap, 0, c, 1.0, g.data());
    if (t.needs_grad(uv)) {
      const auto [du, dv] = kernel::bilinear_uv_grad(t.value(featmap), height, width, tap, 0, c, g.data());
      t.accum(uv)(0, 0) += du;
      t.accum(uv)(0, 1) += dv;
    }
  });
}

LstmState lstm_cell(Var x, const LstmState& prev, Var wx, Var wh, Var b) {
  const Index hidden = prev.h.cols();
  require(wx.cols() == 4 * hidden && wh.cols() == 4 * hidden && wh.rows() == hidden,
          "lstm_cell: gate weights must be (in x 4H) and (H x 4H)");
  require(prev.c.cols() == hidden && prev.c.rows() == prev.h.rows() && x.rows() == prev.h.rows(),
          "lstm_cell: state shapes differ");
  const Var z = add_row(add(matmul(x, wx), matmul(prev.h, wh)), b);
  const Var i = sigmoid(slice_cols(z, 0, hidden));
  const Var f = sigmoid(slice_cols(z, hidden, hidden));
  const Var g = tanh(slice_cols(z, 2 * hidden, hidden));
  const Var o = sigmoid(slice_cols(z, 3 * hidden, hidden));
  const Var c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

Var mse(Var pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse: shapes differ");
  Tape& t = tape_of(pred);
  const Matrix diff = pred.value() - target;
  const double n = static_cast<double>(diff.size());
  Matrix y(1, 1);
  y(0, 0) = diff.squaredNorm() / n;
  return t.record(std::move(y), {pred}, [pred, diff, n](Tape& t, const Matrix& g) {
    t.accum(pred) += diff * (2.0 * g(0, 0) / n);
  });
}

Var l1(Var pred, const Matrix& target) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "l1: shapes differ");
  return l1_masked(pred, target, std::vector<std::uint8_t>(pred.rows(), 1));
}

Var l1_masked(Var pred, const Matrix& target, const std::vector<std::uint8_t>& row_mask) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), "l1: shapes differ");
  require(static_cast<Index>(row_mask.size()) == pred.rows(), "l1: mask length differs from rows");
  Tape& t = tape_of(pred);
  Matrix sign = Matrix::Zero(pred.rows(), pred.cols());
  double sum = 0;
  Index count = 0;
  for (Index r = 0; r < pred.rows(); ++r) {
    if (!row_mask[r]) continue;
    const auto d = (pred.value().row(r) - target.row(r)).eval();
    sum += d.cwiseAbs().sum();
    sign.row(r) = d.unaryExpr([](double v) { return static_cast<double>((v > 0) - (v < 0)); });
    count += pred.cols();
  }
  mix_bits(t, sign.size(), [&](Index i) { return sign.data()[i] > 0; });
  const double n = count == 0 ? 1.0 : static_cast<double>(count);
  Matrix y(1, 1);
  y(0, 0) = sum / n;
  return t.record(std::move(y), {pred}, [pred, sign = std::move(sign), n](Tape& t, const Matrix& g) {
    t.accum(pred) += sign * (g(0, 0) / n);
  });
}

Var bce_logits(Var logits, const Matrix& labels) {
  require(logits.rows() == labels.rows() && logits.cols() == labels.cols(), "bce_logits: shapes differ");
  Tape& t = tape_of(logits);
  const Matrix& z = logits.value();
  double sum = 0;
  Matrix dz(z.rows(), z.cols());
  for (Index i = 0; i < z.size(); ++i) {
    const double zi = z.data()[i], yi = labels.data()[i];
    sum += kernel::softplus(zi) - zi * yi;
    dz.data()[i] = kernel::sigmoid(zi) - yi;
  }
  const double n = static_cast<double>(z.size());
  Matrix y(1, 1);
  y(0, 0) = sum / n;
  return t.record(std::move(y), {logits}, [logits, dz = std::move(dz), n](Tape& t, const Matrix& g) {
    t.accum(logits) += dz * (g(0, 0) / n);
  });
}

Var cross_entropy_logits(Var logits, const std::vector<int>& labels) {
  require(static_cast<Index>(labels.size()) == logits.rows(), "cross_entropy: one label per row");
  Tape& t = tape_of(logits);
  Matrix p = kernel::softmax_rows(logits.value());
  double sum = 0;
  for (Index r = 0; r < p.rows(); ++r) {
    require(labels[r] >= 0 && labels[r] < p.cols(), "cross_entropy: label out of range");
    const double m = logits.value().row(r).maxCoeff();
    const double lse = m + std::log((logits.value().row(r).array() - m).exp().sum());
    sum += lse - logits.value()(r, labels[r]);
    p(r, labels[r]) -= 1.0;
  }
  const double n = static_cast<double>(p.rows());
  Matrix y(1, 1);
  y(0, 0) = sum / n;
  return t.record(std::move(y), {logits}, [logits, p = std::move(p), n](Tape& t, const Matrix& g) {
    t.accum(logits) += p * (g(0, 0) / n);
  });
}

}  // namespace uniview::nn
