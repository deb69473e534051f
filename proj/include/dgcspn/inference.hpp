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

#ifndef DGCSPN_INFERENCE_HPP_
#define DGCSPN_INFERENCE_HPP_

#include <functional>
#include <vector>

#include "dgcspn/graph.hpp"
#include "dgcspn/leaves.hpp"
#include "dgcspn/params.hpp"

namespace dgcspn {

/// Activations of every plan op, index-aligned with ExecutionPlan::ops.
/// activations[0] is the leaf tensor the pass started from.
struct ForwardTrace {
  std::vector<LogTensord> activations;
};

struct ForwardResult {
  double log_value = 0.0;
  ForwardTrace trace;
};

/// Called on every product output during a forward pass (dropout hook).
using ProductHook = std::function<void(LogTensord&)>;

/// Marginal (sum) evaluation: returns log S(e) for the evidence encoded in
/// the leaf tensor (hidden variables have all channels at 0).
ForwardResult forward_marginal(const ExecutionPlan& plan, const ModelParams& params,
                               LogTensord leaf, const ProductHook& on_product = {});

/// log Z: the marginal pass with every variable hidden.
double partition_function(const ExecutionPlan& plan, const ModelParams& params);

using WinnerMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MpeResult {
  double log_value = 0.0;
  ForwardTrace trace;
  // Per sum op: (rows x C_out) index of the winning child, lowest index on
  // ties. Rows are cells for spatial sums and a single row otherwise. Empty
  // for non-sum ops.
  std::vector<WinnerMatrix> winners;
};

/// Max-sum evaluation: each sum computes max_i (log w_i + c_i).
MpeResult forward_mpe(const ExecutionPlan& plan, const ModelParams& params, LogTensord leaf);

/// log dS/d(leaf channel), in the leaf tensor's layout, by a log-space
/// reverse pass over a marginal trace.
LogTensord backward_root_derivatives(const ExecutionPlan& plan, const ModelParams& params,
                                     const ForwardTrace& trace);

/// Reverse pass of ordinary (signed) gradients with respect to log values.
/// `seed` is d objective / d (output of op seed_op), shaped cells x channels.
struct LogValueGradients {
  std::vector<RowMatrixd> log_weights;  // per param slot; empty if unused
  RowMatrixd leaf;                      // cells x leaf channels
};

LogValueGradients backward_gradients(const ExecutionPlan& plan, const ModelParams& params,
                                     const ForwardTrace& trace, int seed_op,
                                     const RowMatrixd& seed);

/// Leaf tensor for an image under the network's Gaussian leaves.
LogTensord make_leaf_tensor(const ExecutionPlan& plan, const ModelParams& params,
                            const ImageD& image, const EvidenceMask& mask);

/// Class-sum log outputs (K) of a discriminative network.
Eigen::VectorXd class_log_outputs(const ExecutionPlan& plan, const ForwardTrace& trace);

struct LeafPosterior {
  RowMatrixd probs;           // cells x K; rows of observed cells are zero
  std::vector<char> observed; // per cell
};

/// Per hidden variable, the component posterior proportional to
/// dS/d(leaf component) (hidden leaves evaluate to 1).
LeafPosterior leaf_posterior(const ExecutionPlan& plan, const ModelParams& params,
                             const ImageD& image, const EvidenceMask& mask);

/// Observed pixels copied; hidden pixels set to sum_k posterior_k * mean_k.
/// Values stay in normalized units. Throws UnsupportedError without
/// Gaussian leaves.
ImageD inpaint(const ExecutionPlan& plan, const ModelParams& params, const ImageD& image,
               const EvidenceMask& mask);

}  // namespace dgcspn

#endif  // DGCSPN_INFERENCE_HPP_
