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

#include "dgcspn/leaves.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace dgcspn {

LogTensord gaussian_log_prob(const ImageD& image, const GaussianLeafParams& params,
                             const EvidenceMask& mask) {
  const int h = static_cast<int>(image.rows());
  const int w = static_cast<int>(image.cols());
  if (params.cells() != h * w || mask.rows() != h || mask.cols() != w)
    throw DomainError("gaussian_log_prob: image, mask and leaf shapes differ");
  const int k = params.components();
  LogTensord out(h, w, k, 0.0);
  const double log_norm = 0.5 * std::log(2.0 * std::numbers::pi);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      if (!mask(i, j)) continue;
      const double x = image(i, j);
      if (!std::isfinite(x)) throw DomainError("gaussian_log_prob: non-finite pixel value");
      const int cell = i * w + j;
      for (int c = 0; c < k; ++c) {
        const double var = std::max(params.variances(cell, c), kVarianceFloor);
        const double d = x - params.means(cell, c);
        out.matrix()(cell, c) = -log_norm - 0.5 * std::log(var) - 0.5 * d * d / var;
      }
    }
  }
  return out;
}

GaussianLeafParams quantile_init(std::span<const ImageD> images, int k) {
  if (images.empty()) throw DomainError("quantile_init: empty dataset");
  if (k < 1) throw DomainError("quantile_init: k must be >= 1");
  const int n = static_cast<int>(images.size());
  if (n < k) throw DomainError("quantile_init: fewer samples than components");
  const int h = static_cast<int>(images.front().rows());
  const int w = static_cast<int>(images.front().cols());
  GaussianLeafParams p;
  p.means.resize(h * w, k);
  p.variances = RowMatrixd::Ones(h * w, k);
  std::vector<double> values(n);
  for (int cell = 0; cell < h * w; ++cell) {
    for (int s = 0; s < n; ++s) {
      if (images[s].rows() != h || images[s].cols() != w)
        throw DomainError("quantile_init: images differ in shape");
      values[s] = images[s](cell / w, cell % w);
    }
    std::sort(values.begin(), values.end());
    int start = 0;
    for (int q = 0; q < k; ++q) {
      const int size = n / k + (q < n % k ? 1 : 0);
      double sum = 0.0;
      for (int s = start; s < start + size; ++s) sum += values[s];
      p.means(cell, q) = sum / size;
      start += size;
    }
  }
  return p;
}

GaussianLeafParams equidistant_init(double lo, double hi, int k, int height, int width) {
  if (!(lo < hi) || k < 1) throw DomainError("equidistant_init: need lo < hi and k >= 1");
  GaussianLeafParams p;
  p.means.resize(height * width, k);
  for (int c = 0; c < k; ++c) p.means.col(c).setConstant(lo + (c + 0.5) * (hi - lo) / k);
  p.variances = RowMatrixd::Ones(height * width, k);
  return p;
}

LogTensord indicator_log_prob(const IntGrid& assignment, int arity) {
  if (arity < 1) throw DomainError("indicator_log_prob: arity must be >= 1");
  const int h = static_cast<int>(assignment.rows());
  const int w = static_cast<int>(assignment.cols());
  LogTensord out(h, w, arity, 0.0);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      const int v = assignment(i, j);
      if (v == kHidden) continue;
      if (v < 0 || v >= arity) throw DomainError("indicator_log_prob: value out of range");
      for (int c = 0; c < arity; ++c) out(i, j, c) = c == v ? 0.0 : neg_inf<double>();
    }
  }
  return out;
}

}  // namespace dgcspn
