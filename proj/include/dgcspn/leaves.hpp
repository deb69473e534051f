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

#ifndef DGCSPN_LEAVES_HPP_
#define DGCSPN_LEAVES_HPP_

#include <Eigen/Core>

#include <span>

#include "dgcspn/tensor.hpp"

namespace dgcspn {

/// H x W image, row-major so that flat index i * W + j is the variable id.
using ImageD = RowMatrixd;
using IntGrid = Eigen::Array<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// true = observed.
using EvidenceMask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kVarianceFloor = 1e-4;
/// Marks a hidden variable in an IntGrid assignment.
inline constexpr int kHidden = -1;

inline EvidenceMask all_observed(int height, int width) {
  return EvidenceMask::Constant(height, width, true);
}
inline EvidenceMask all_hidden(int height, int width) {
  return EvidenceMask::Constant(height, width, false);
}

/// Per-pixel univariate Gaussian components, stored cells x K.
struct GaussianLeafParams {
  RowMatrixd means;
  RowMatrixd variances;

  int components() const { return static_cast<int>(means.cols()); }
  int cells() const { return static_cast<int>(means.rows()); }
};

/// Observed cells get log N(x; mu_k, var_k) per component, hidden cells 0.
LogTensord gaussian_log_prob(const ImageD& image, const GaussianLeafParams& params,
                             const EvidenceMask& mask);

/// Per pixel: sort the training values, split them into k equal groups
/// (the first N % k groups take one extra value) and use each group's mean.
/// Variances are 1.
GaussianLeafParams quantile_init(std::span<const ImageD> images, int k);

/// Means at the midpoints of k equal intervals of [lo, hi], the same for
/// every pixel; variances 1.
GaussianLeafParams equidistant_init(double lo, double hi, int k, int height, int width);

/// One channel per state: 0 for the observed state, -inf for the others,
/// 0 everywhere for hidden (kHidden) variables.
LogTensord indicator_log_prob(const IntGrid& assignment, int arity);

}  // namespace dgcspn

#endif  // DGCSPN_LEAVES_HPP_
