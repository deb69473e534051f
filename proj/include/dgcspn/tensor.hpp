// Copyright 2026 The dgcspn Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DGCSPN_TENSOR_HPP_
#define DGCSPN_TENSOR_HPP_

// Dense log-space kernels. A LogTensor stores an H x W x C activation as a
// row-major (H*W) x C matrix: one row per cell, one column per channel. That
// layout turns weight-tied spatial sums into one matrix product per layer.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "dgcspn/errors.hpp"
#include "dgcspn/structure.hpp"

namespace dgcspn {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixd = RowMatrix<double>;

template <typename Scalar>
constexpr Scalar neg_inf() {
  return -std::numeric_limits<Scalar>::infinity();
}

/// log(exp(a) + exp(b)) with -inf as the additive identity.
inline double log_add_exp(double a, double b) {
  if (a == neg_inf<double>()) return b;
  if (b == neg_inf<double>()) return a;
  if (a < b) std::swap(a, b);
  return a + std::log1p(std::exp(b - a));
}

template <typename Scalar>
class LogTensor {
 public:
  using Matrix = RowMatrix<Scalar>;

  LogTensor() = default;
  LogTensor(int height, int width, int channels, Scalar fill = Scalar(0))
      : height_(height), width_(width), data_(Matrix::Constant(height * width, channels, fill)) {}
  LogTensor(SpatialShape shape, Scalar fill = Scalar(0))
      : LogTensor(shape.height, shape.width, shape.channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return static_cast<int>(data_.cols()); }
  int cells() const { return height_ * width_; }
  SpatialShape shape() const { return {height_, width_, channels()}; }

  Scalar& operator()(int i, int j, int c) { return data_(i * width_ + j, c); }
  Scalar operator()(int i, int j, int c) const { return data_(i * width_ + j, c); }

  Matrix& matrix() { return data_; }
  const Matrix& matrix() const { return data_; }

  bool has_nan() const { return data_.array().isNaN().any(); }

 private:
  int height_ = 0;
  int width_ = 0;
  Matrix data_;
};

using LogTensord = LogTensor<double>;

/// log sum_i exp(log_w_i + c_i), stabilized by the largest term. Terms with
/// log_w_i = -inf or c_i = -inf contribute nothing.
template <typename DerivedC, typename DerivedW>
double weighted_logsumexp(const Eigen::DenseBase<DerivedC>& children,
                          const Eigen::DenseBase<DerivedW>& log_weights) {
  if (children.size() == 0) throw DomainError("weighted_logsumexp: empty child set");
  if (children.size() != log_weights.size())
    throw DomainError("weighted_logsumexp: child and weight counts differ");
  double best = neg_inf<double>();
  for (Eigen::Index i = 0; i < children.size(); ++i) {
    const double c = static_cast<double>(children.derived().coeff(i));
    const double w = static_cast<double>(log_weights.derived().coeff(i));
    if (c == neg_inf<double>() || w == neg_inf<double>()) continue;
    best = std::max(best, c + w);
  }
  if (best == neg_inf<double>()) return best;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < children.size(); ++i) {
    const double c = static_cast<double>(children.derived().coeff(i));
    const double w = static_cast<double>(log_weights.derived().coeff(i));
    if (c == neg_inf<double>() || w == neg_inf<double>()) continue;
    acc += std::exp(c + w - best);
  }
  return best + std::log(acc);
}

namespace detail {
// Below this the shifted linear sum has lost too much range to trust.
constexpr double kLinearFloor = 1e-280;
}  // namespace detail

/// out(r, o) = log sum_i exp(x(r, i) + log_w(i, o)).
///
/// Rows are shifted by their maximum, exponentiated once, and multiplied by
/// exp(log_w). Entries whose shifted sum underflows are recomputed exactly,
/// so the result agrees with weighted_logsumexp entry by entry.
template <typename DerivedX, typename DerivedW>
RowMatrixd log_matmul(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedW>& log_w) {
  if (x.cols() != log_w.rows()) throw DomainError("log_matmul: channel mismatch");
  if (x.cols() == 0) throw DomainError("log_matmul: empty child set");
  const Eigen::Index rows = x.rows();
  const Eigen::Index m = log_w.cols();
  const RowMatrixd xd = x.template cast<double>();
  const Eigen::MatrixXd w = log_w.template cast<double>().array().exp().matrix();
  Eigen::VectorXd shift = xd.rowwise().maxCoeff();
  RowMatrixd e(rows, xd.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (shift(r) == neg_inf<double>())
      e.row(r).setZero();
    else
      e.row(r) = (xd.row(r).array() - shift(r)).exp();
  }
  RowMatrixd s = e * w;
  RowMatrixd out(rows, m);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index o = 0; o < m; ++o) {
      if (shift(r) == neg_inf<double>()) {
        out(r, o) = neg_inf<double>();
      } else if (s(r, o) > detail::kLinearFloor) {
        out(r, o) = shift(r) + std::log(s(r, o));
      } else {
        out(r, o) = weighted_logsumexp(xd.row(r), log_w.col(o).template cast<double>());
      }
    }
  }
  return out;
}

/// Geometry of one generalized convolutional log-product: kernel, strides,
/// dilations and the per-side padding along each axis.
struct GclpGeometry {
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;
  int kernel_h = 1, kernel_w = 1;
  int stride_h = 1, stride_w = 1;
  int dilation_h = 1, dilation_w = 1;
  int pad_h = 0, pad_w = 0;

  int patch_size() const { return kernel_h * kernel_w; }

  /// Full padding is (k - 1) * d cells per side on each axis. Throws
  /// DomainError if the kernel does not fit.
  static GclpGeometry make(int in_h, int in_w, Extent kernel, Extent stride, Extent dilation,
                           Padding padding) {
    GclpGeometry g;
    g.in_h = in_h;
    g.in_w = in_w;
    g.kernel_h = kernel.h;
    g.kernel_w = kernel.w;
    g.stride_h = stride.h;
    g.stride_w = stride.w;
    g.dilation_h = dilation.h;
    g.dilation_w = dilation.w;
    if (padding == Padding::kFull) {
      g.pad_h = (kernel.h - 1) * dilation.h;
      g.pad_w = (kernel.w - 1) * dilation.w;
    }
    const int span_h = in_h + 2 * g.pad_h - (kernel.h - 1) * dilation.h;
    const int span_w = in_w + 2 * g.pad_w - (kernel.w - 1) * dilation.w;
    if (span_h < 1 || span_w < 1)
      throw DomainError("gclp: dilated kernel does not fit the input grid");
    g.out_h = (span_h - 1) / stride.h + 1;
    g.out_w = (span_w - 1) / stride.w + 1;
    return g;
  }

  /// Input cell (row-major index) under patch position t of output cell
  /// (oi, oj), or -1 when that position falls on padding.
  int input_cell(int oi, int oj, int t) const {
    const int a = t / kernel_w;
    const int b = t % kernel_w;
    const int ii = oi * stride_h + a * dilation_h - pad_h;
    const int ij = oj * stride_w + b * dilation_w - pad_w;
    if (ii < 0 || ii >= in_h || ij < 0 || ij >= in_w) return -1;
    return ii * in_w + ij;
  }

  friend bool operator==(const GclpGeometry&, const GclpGeometry&) = default;
};

/// Log-space product convolution: out(cell, o) = sum over patch positions t
/// of input(cell_t, table(o, t)); padding contributes 0 (probability one).
template <typename Scalar>
LogTensor<Scalar> gclp_forward(const LogTensor<Scalar>& input, const GclpGeometry& g,
                               const Eigen::MatrixXi& kernel_table) {
  if (input.height() != g.in_h || input.width() != g.in_w)
    throw DomainError("gclp_forward: input grid does not match geometry");
  if (kernel_table.cols() != g.patch_size())
    throw DomainError("gclp_forward: kernel table width differs from patch size");
  if (kernel_table.size() > 0 &&
      (kernel_table.minCoeff() < 0 || kernel_table.maxCoeff() >= input.channels()))
    throw DomainError("gclp_forward: kernel table selects a missing channel");
  const int n_out = static_cast<int>(kernel_table.rows());
  LogTensor<Scalar> out(g.out_h, g.out_w, n_out, Scalar(0));
  Eigen::Matrix<double, 1, Eigen::Dynamic> acc(n_out);
  const auto& in = input.matrix();
  for (int oi = 0; oi < g.out_h; ++oi) {
    for (int oj = 0; oj < g.out_w; ++oj) {
      acc.setZero();
      for (int t = 0; t < g.patch_size(); ++t) {
        const int cell = g.input_cell(oi, oj, t);
        if (cell < 0) continue;
        acc += in.row(cell)(kernel_table.col(t)).template cast<double>();
      }
      out.matrix().row(oi * g.out_w + oj) = acc.template cast<Scalar>();
    }
  }
  return out;
}

/// Weight-tied spatial sum: out(cell, o) = log sum_i w(i, o) exp(in(cell, i)).
/// Cells flagged in `padding` (if non-empty) stay at 0.
template <typename Scalar, typename DerivedW>
LogTensor<Scalar> spatial_sum_forward(const LogTensor<Scalar>& input,
                                      const Eigen::MatrixBase<DerivedW>& log_weights,
                                      const std::vector<char>& padding = {}) {
  if (log_weights.rows() != input.channels())
    throw DomainError("spatial_sum_forward: weight rows differ from input channels");
  LogTensor<Scalar> out(input.height(), input.width(), static_cast<int>(log_weights.cols()));
  out.matrix() = log_matmul(input.matrix(), log_weights).template cast<Scalar>();
  for (std::size_t c = 0; c < padding.size(); ++c)
    if (padding[c]) out.matrix().row(static_cast<Eigen::Index>(c)).setZero();
  return out;
}

}  // namespace dgcspn

#endif  // DGCSPN_TENSOR_HPP_
