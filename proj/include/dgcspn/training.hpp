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

#ifndef DGCSPN_TRAINING_HPP_
#define DGCSPN_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dgcspn/inference.hpp"
#include "dgcspn/random.hpp"

namespace dgcspn {

enum class TrainMode { kHardEm, kHardEmUsi, kAdam };

const char* to_string(TrainMode mode);
TrainMode parse_train_mode(const std::string& name);

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct TrainConfig {
  TrainMode mode = TrainMode::kHardEm;
  int batch_size = 128;
  int epochs = 15;
  double smoothing_base = kSmoothingBase;
  AdamHyper adam;
  double product_dropout = 0.2;
  double input_dropout = 0.2;
  std::uint64_t seed = 0;
  int threads = 1;

  /// Throws DomainError on out-of-range values.
  void validate() const;
};

/// Index of the winning child: argmax_i (log_w_i + c_i), or argmax_i c_i
/// when use_usi. Ties go to the lowest index.
int select_winner(const Eigen::Ref<const Eigen::RowVectorXd>& children,
                  const Eigen::Ref<const Eigen::VectorXd>& log_weights, bool use_usi);

/// Top-down hard selection over a marginal trace. Every reached sum adds 1
/// to its winning child's entry in counts[param_slot] (fan_in x C_out).
void accumulate_winners(const ExecutionPlan& plan, const ModelParams& params,
                        const ForwardTrace& trace, bool use_usi, std::vector<RowMatrixd>& counts);

struct EmStepStats {
  double mean_log_likelihood = 0.0;
};

/// One online hard EM update over a batch of leaf tensors: marginal forward
/// passes, winner counting, then weight refresh by smoothed normalization.
EmStepStats hard_em_step(const ExecutionPlan& plan, ModelParams& params,
                         std::span<const LogTensord> batch, bool use_usi, int threads = 1,
                         double smoothing_base = kSmoothingBase);

/// Sets each product output to -inf with probability `rate`.
void product_dropout(LogTensord& products, double rate, Rng& rng);

/// Per variable, with probability `rate`, sets all of its channels to 0
/// (removes it from the evidence). Returns the dropped-cell flags.
std::vector<char> input_dropout(LogTensord& leaf, double rate, Rng& rng);

/// Gradients for the trainable blocks, in trainable_blocks() order.
struct LossGradients {
  double loss = 0.0;      // mean cross-entropy over the batch
  double accuracy = 0.0;  // fraction of argmax hits
  std::vector<RowMatrixd> blocks;
};

/// Trainable parameter blocks in a fixed order: every sum slot's
/// log-accumulators, then leaf means, then variance_raw.
std::vector<RowMatrixd*> trainable_blocks(ModelParams& params);

/// Mean cross-entropy of the class-sum softmax and its gradient. Dropout is
/// applied when the rates are positive, drawing per-sample streams from
/// (seed, "dropout", step_key, sample index).
LossGradients loss_gradients(const ExecutionPlan& plan, const ModelParams& params,
                             std::span<const ImageD> images, std::span<const int> labels,
                             double product_dropout_rate, double input_dropout_rate,
                             std::uint64_t seed, std::uint64_t step_key, int threads = 1);

struct AdamState {
  std::vector<RowMatrixd> m;
  std::vector<RowMatrixd> v;
  long long step = 0;
};

/// In-place bias-corrected Adam update of `blocks` from `grads`.
void adam_update(std::span<RowMatrixd* const> blocks, std::span<const RowMatrixd> grads,
                 AdamState& state, const AdamHyper& hyper);

struct AdamStepStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// One discriminative step: loss gradients, Adam update, weight and
/// variance refresh.
AdamStepStats adam_step(const ExecutionPlan& plan, ModelParams& params, AdamState& state,
                        std::span<const ImageD> images, std::span<const int> labels,
                        const TrainConfig& config, std::uint64_t step_key);

struct ProgressRecord {
  int epoch = 0;
  int batch = 0;
  std::string metric;
  double value = 0.0;
};
using ProgressSink = std::function<void(const ProgressRecord&)>;

/// Full training run over normalized images (labels required for kAdam).
/// Epoch order is shuffled from (seed, "shuffle", epoch); the last partial
/// batch is kept.
void train(const ExecutionPlan& plan, ModelParams& params, std::span<const ImageD> images,
           std::span<const int> labels, const TrainConfig& config,
           const ProgressSink& progress = {});

/// Fresh parameters for a training mode: quantile leaves and random counts
/// for hard EM, equidistant leaves in [-1.5, 1.5] and random log-accumulators
/// for Adam. Draws come from (seed, "init").
ModelParams init_params(const ExecutionPlan& plan, std::span<const ImageD> images,
                        const TrainConfig& config);

}  // namespace dgcspn

#endif  // DGCSPN_TRAINING_HPP_
