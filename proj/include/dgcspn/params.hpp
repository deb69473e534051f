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

#ifndef DGCSPN_PARAMS_HPP_
#define DGCSPN_PARAMS_HPP_

#include <optional>
#include <vector>

#include "dgcspn/graph.hpp"
#include "dgcspn/leaves.hpp"
#include "dgcspn/random.hpp"

namespace dgcspn {

/// How sum accumulators map to weights: linear counts normalized with
/// additive smoothing (hard EM), or log-space accumulators normalized by a
/// per-sum softmax (gradient training).
enum class AccumulatorMode { kCounts, kLog };

/// One weight-tied sum layer: fan_in x C_out, one column per sum node.
struct SumParams {
  RowMatrixd accumulators;
  RowMatrixd log_weights;
};

struct ModelParams {
  AccumulatorMode mode = AccumulatorMode::kCounts;
  std::optional<GaussianLeafParams> gaussian;
  // Unconstrained leaf variances for gradient training:
  // variance = exp(raw) + kVarianceFloor.
  RowMatrixd variance_raw;
  std::vector<SumParams> sums;  // indexed by PlanOp::param_slot

  /// Recomputes every log_weights matrix from its accumulators.
  void refresh_weights(double smoothing_base = 1e-2);
  /// Recomputes gaussian variances from variance_raw.
  void refresh_variances();
};

inline constexpr double kSmoothingBase = 1e-2;

/// w_i = (c_i + eps) / sum_j (c_j + eps) with eps = base / |counts|.
Eigen::VectorXd smooth_normalize(const Eigen::Ref<const Eigen::VectorXd>& counts,
                                 double base = kSmoothingBase);

/// log softmax of each column.
RowMatrixd log_softmax_columns(const RowMatrixd& accumulators);

/// All-zero accumulators: uniform weights in either mode.
ModelParams uniform_params(const ExecutionPlan& plan, AccumulatorMode mode);

/// Random accumulators: counts uniform in [0, 1) for kCounts, N(0, 0.5^2)
/// log-accumulators for kLog.
ModelParams random_params(const ExecutionPlan& plan, AccumulatorMode mode, Rng& rng);

/// Installs leaf parameters (and, in kLog mode, the matching variance_raw).
void set_gaussian(ModelParams& params, GaussianLeafParams leaf);

}  // namespace dgcspn

#endif  // DGCSPN_PARAMS_HPP_
