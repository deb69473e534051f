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

#include "dgcspn/params.hpp"

#include <cmath>

namespace dgcspn {

Eigen::VectorXd smooth_normalize(const Eigen::Ref<const Eigen::VectorXd>& counts, double base) {
  if (counts.size() == 0) throw DomainError("smooth_normalize: empty sum");
  if ((counts.array() < 0.0).any()) throw DomainError("smooth_normalize: negative count");
  const double eps = base / static_cast<double>(counts.size());
  Eigen::VectorXd smoothed = counts.array() + eps;
  return smoothed / smoothed.sum();
}

RowMatrixd log_softmax_columns(const RowMatrixd& accumulators) {
  RowMatrixd out(accumulators.rows(), accumulators.cols());
  for (Eigen::Index o = 0; o < accumulators.cols(); ++o) {
    const double m = accumulators.col(o).maxCoeff();
    const double lse = m + std::log((accumulators.col(o).array() - m).exp().sum());
    out.col(o) = accumulators.col(o).array() - lse;
  }
  return out;
}

void ModelParams::refresh_weights(double smoothing_base) {
  for (auto& s : sums) {
    if (mode == AccumulatorMode::kLog) {
      s.log_weights = log_softmax_columns(s.accumulators);
      continue;
    }
    s.log_weights.resize(s.accumulators.rows(), s.accumulators.cols());
    for (Eigen::Index o = 0; o < s.accumulators.cols(); ++o)
      s.log_weights.col(o) = smooth_normalize(s.accumulators.col(o), smoothing_base).array().log();
  }
}

void ModelParams::refresh_variances() {
  if (gaussian) gaussian->variances = variance_raw.array().exp() + kVarianceFloor;
}

namespace {

ModelParams empty_params(const ExecutionPlan& plan, AccumulatorMode mode) {
  ModelParams p;
  p.mode = mode;
  p.sums.resize(plan.num_sum_slots);
  for (const auto& op : plan.ops) {
    if (!op.is_sum()) continue;
    p.sums[op.param_slot].accumulators = RowMatrixd::Zero(op.fan_in, op.output.channels);
  }
  return p;
}

}  // namespace

ModelParams uniform_params(const ExecutionPlan& plan, AccumulatorMode mode) {
  ModelParams p = empty_params(plan, mode);
  p.refresh_weights();
  return p;
}

ModelParams random_params(const ExecutionPlan& plan, AccumulatorMode mode, Rng& rng) {
  ModelParams p = empty_params(plan, mode);
  for (auto& s : p.sums)
    for (Eigen::Index r = 0; r < s.accumulators.rows(); ++r)
      for (Eigen::Index c = 0; c < s.accumulators.cols(); ++c)
        s.accumulators(r, c) =
            mode == AccumulatorMode::kCounts ? uniform01(rng) : 0.5 * standard_normal(rng);
  p.refresh_weights();
  return p;
}

void set_gaussian(ModelParams& params, GaussianLeafParams leaf) {
  leaf.variances = leaf.variances.cwiseMax(kVarianceFloor);
  if (params.mode == AccumulatorMode::kLog) {
    // Variances at the floor map to a very negative (but finite) raw value.
    params.variance_raw =
        (leaf.variances.array() - kVarianceFloor).max(1e-300).log().matrix();
  }
  params.gaussian = std::move(leaf);
}

}  // namespace dgcspn
