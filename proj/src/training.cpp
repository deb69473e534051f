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

#include "dgcspn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dgcspn/parallel.hpp"

namespace dgcspn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<RowMatrixd> zero_counts(const ModelParams& params) {
  std::vector<RowMatrixd> counts;
  counts.reserve(params.sums.size());
  for (const auto& s : params.sums)
    counts.push_back(RowMatrixd::Zero(s.accumulators.rows(), s.accumulators.cols()));
  return counts;
}

}  // namespace

const char* to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kHardEm:
      return "hard_em";
    case TrainMode::kHardEmUsi:
      return "hard_em_usi";
    case TrainMode::kAdam:
      return "adam";
  }
  return "?";
}

TrainMode parse_train_mode(const std::string& name) {
  if (name == "hard_em") return TrainMode::kHardEm;
  if (name == "hard_em_usi") return TrainMode::kHardEmUsi;
  if (name == "adam") return TrainMode::kAdam;
  throw DomainError("unknown training mode '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw DomainError("batch size must be positive");
  if (epochs < 1) throw DomainError("epochs must be positive");
  if (threads < 1) throw DomainError("threads must be positive");
  if (!(product_dropout >= 0.0 && product_dropout <= 1.0) ||
      !(input_dropout >= 0.0 && input_dropout <= 1.0))
    throw DomainError("dropout rates must lie in [0, 1]");
  if (!(smoothing_base > 0.0)) throw DomainError("smoothing base must be positive");
}

int select_winner(const Eigen::Ref<const Eigen::RowVectorXd>& children,
                  const Eigen::Ref<const Eigen::VectorXd>& log_weights, bool use_usi) {
  int best = 0;
  double best_value = kNegInf;
  for (Eigen::Index i = 0; i < children.size(); ++i) {
    const double v = use_usi ? children(i) : children(i) + log_weights(i);
    if (v > best_value) {
      best_value = v;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void accumulate_winners(const ExecutionPlan& plan, const ModelParams& params,
                        const ForwardTrace& trace, bool use_usi, std::vector<RowMatrixd>& counts) {
  const auto& acts = trace.activations;
  // reached(cell, channel) of the current op's output.
  std::vector<char> reached(1, 1);
  for (std::size_t k = plan.ops.size() - 1; k >= 1; --k) {
    const PlanOp& op = plan.ops[k];
    const LogTensord& in = acts[k - 1];
    const int c_out = op.output.channels;
    const int c_in = in.channels();
    std::vector<char> below(static_cast<std::size_t>(in.cells()) * c_in, 0);
    switch (op.kind) {
      case OpKind::kSum: {
        const auto& lw = params.sums[op.param_slot].log_weights;
        auto& cnt = counts[op.param_slot];
        for (int cell = 0; cell < in.cells(); ++cell) {
          if (!op.padding.empty() && op.padding[cell]) continue;
          for (int o = 0; o < c_out; ++o) {
            if (!reached[static_cast<std::size_t>(cell) * c_out + o]) continue;
            const int win = select_winner(in.matrix().row(cell), lw.col(o), use_usi);
            cnt(win, o) += 1.0;
            below[static_cast<std::size_t>(cell) * c_in + win] = 1;
          }
        }
        break;
      }
      case OpKind::kClassSums:
      case OpKind::kRoot: {
        const auto& lw = params.sums[op.param_slot].log_weights;
        auto& cnt = counts[op.param_slot];
        Eigen::RowVectorXd x(op.fan_in);
        for (std::size_t j = 0; j < op.child_cells.size(); ++j)
          x.segment(static_cast<Eigen::Index>(j) * c_in, c_in) =
              in.matrix().row(op.child_cells[j]);
        for (int o = 0; o < c_out; ++o) {
          if (!reached[o]) continue;
          const int win = select_winner(x, lw.col(o), use_usi);
          cnt(win, o) += 1.0;
          const int cell = op.child_cells[win / c_in];
          below[static_cast<std::size_t>(cell) * c_in + win % c_in] = 1;
        }
        break;
      }
      case OpKind::kProduct: {
        const auto& geo = op.geometry;
        for (int oi = 0; oi < geo.out_h; ++oi) {
          for (int oj = 0; oj < geo.out_w; ++oj) {
            const int cell = oi * geo.out_w + oj;
            for (int r = 0; r < c_out; ++r) {
              if (!reached[static_cast<std::size_t>(cell) * c_out + r]) continue;
              for (int t = 0; t < geo.patch_size(); ++t) {
                const int c = geo.input_cell(oi, oj, t);
                if (c >= 0) below[static_cast<std::size_t>(c) * c_in + op.kernel_table(r, t)] = 1;
              }
            }
          }
        }
        break;
      }
      default:
        break;
    }
    reached = std::move(below);
  }
}

EmStepStats hard_em_step(const ExecutionPlan& plan, ModelParams& params,
                         std::span<const LogTensord> batch, bool use_usi, int threads,
                         double smoothing_base) {
  if (plan.discriminative())
    throw UnsupportedError("hard EM is for generative networks (no class sums)");
  if (params.mode != AccumulatorMode::kCounts)
    throw UnsupportedError("hard EM needs count accumulators");
  const int n = static_cast<int>(batch.size());
  threads = std::max(1, std::min(threads, std::max(n, 1)));
  std::vector<std::vector<RowMatrixd>> partial(threads);
  std::vector<double> ll(threads, 0.0);
  parallel_chunks(n, threads, [&](int w, int begin, int end) {
    partial[w] = zero_counts(params);
    for (int s = begin; s < end; ++s) {
      auto fwd = forward_marginal(plan, params, batch[s]);
      ll[w] += fwd.log_value;
      accumulate_winners(plan, params, fwd.trace, use_usi, partial[w]);
    }
  });
  // Deltas are whole counts, so merging them before touching the
  // accumulators keeps the result independent of the thread count.
  EmStepStats stats;
  std::vector<RowMatrixd> delta = zero_counts(params);
  for (int w = 0; w < threads; ++w) {
    stats.mean_log_likelihood += ll[w];
    if (partial[w].empty()) continue;
    for (std::size_t s = 0; s < delta.size(); ++s) delta[s] += partial[w][s];
  }
  for (std::size_t s = 0; s < delta.size(); ++s) params.sums[s].accumulators += delta[s];
  if (n > 0) stats.mean_log_likelihood /= n;
  params.refresh_weights(smoothing_base);
  return stats;
}

void product_dropout(LogTensord& products, double rate, Rng& rng) {
  if (rate <= 0.0) return;
  auto& m = products.matrix();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      if (uniform01(rng) < rate) m(r, c) = kNegInf;
}

std::vector<char> input_dropout(LogTensord& leaf, double rate, Rng& rng) {
  std::vector<char> dropped(leaf.cells(), 0);
  if (rate <= 0.0) return dropped;
  for (int c = 0; c < leaf.cells(); ++c) {
    if (uniform01(rng) < rate) {
      dropped[c] = 1;
      leaf.matrix().row(c).setZero();
    }
  }
  return dropped;
}

std::vector<RowMatrixd*> trainable_blocks(ModelParams& params) {
  std::vector<RowMatrixd*> blocks;
  for (auto& s : params.sums) blocks.push_back(&s.accumulators);
  if (params.gaussian) {
    blocks.push_back(&params.gaussian->means);
    blocks.push_back(&params.variance_raw);
  }
  return blocks;
}

namespace {

struct SampleGradient {
  double loss = 0.0;
  int correct = 0;
  std::vector<RowMatrixd> log_weights;  // per slot
  RowMatrixd means;
  RowMatrixd variance_raw;
};

}  // namespace

LossGradients loss_gradients(const ExecutionPlan& plan, const ModelParams& params,
                             std::span<const ImageD> images, std::span<const int> labels,
                             double product_dropout_rate, double input_dropout_rate,
                             std::uint64_t seed, std::uint64_t step_key, int threads) {
  const int class_op = plan.class_op();
  if (class_op < 0) throw UnsupportedError("gradient training needs class sums");
  if (!params.gaussian) throw UnsupportedError("gradient training needs Gaussian leaves");
  if (labels.size() != images.size()) throw DomainError("missing labels for the batch");
  const int n = static_cast<int>(images.size());
  const int classes = plan.ops[class_op].output.channels;
  const auto& leaf = *params.gaussian;
  threads = std::max(1, std::min(threads, std::max(n, 1)));

  std::vector<SampleGradient> partial(threads);
  parallel_chunks(n, threads, [&](int w, int begin, int end) {
    SampleGradient& acc = partial[w];
    acc.log_weights.resize(params.sums.size());
    for (std::size_t s = 0; s < params.sums.size(); ++s)
      acc.log_weights[s] = RowMatrixd::Zero(params.sums[s].accumulators.rows(),
                                            params.sums[s].accumulators.cols());
    acc.means = RowMatrixd::Zero(leaf.cells(), leaf.components());
    acc.variance_raw = RowMatrixd::Zero(leaf.cells(), leaf.components());

    for (int s = begin; s < end; ++s) {
      const int label = labels[s];
      if (label < 0 || label >= classes) throw DomainError("label out of range");
      const ImageD& image = images[s];
      Rng rng = substream(seed, "dropout", step_key, static_cast<std::uint64_t>(s));
      LogTensord x = gaussian_log_prob(
          image, leaf, all_observed(static_cast<int>(image.rows()), static_cast<int>(image.cols())));
      const auto dropped = input_dropout(x, input_dropout_rate, rng);
      ProductHook hook;
      if (product_dropout_rate > 0.0)
        hook = [&](LogTensord& p) { product_dropout(p, product_dropout_rate, rng); };
      auto fwd = forward_marginal(plan, params, std::move(x), hook);

      const Eigen::VectorXd z = class_log_outputs(plan, fwd.trace);
      const double zmax = z.maxCoeff();
      if (zmax == kNegInf) continue;  // every class at zero probability
      const double lse = zmax + std::log((z.array() - zmax).exp().sum());
      acc.loss += lse - z(label);
      Eigen::Index arg = 0;
      for (Eigen::Index k = 1; k < z.size(); ++k)
        if (z(k) > z(arg)) arg = k;
      acc.correct += arg == label;

      RowMatrixd seed_grad = (z.array() - lse).exp().matrix().transpose();
      seed_grad(0, label) -= 1.0;
      auto g = backward_gradients(plan, params, fwd.trace, class_op, seed_grad);
      for (std::size_t k = 0; k < g.log_weights.size(); ++k)
        if (g.log_weights[k].size()) acc.log_weights[k] += g.log_weights[k];

      const int width = static_cast<int>(image.cols());
      for (int cell = 0; cell < leaf.cells(); ++cell) {
        if (dropped[cell]) continue;
        const double xv = image(cell / width, cell % width);
        for (int k = 0; k < leaf.components(); ++k) {
          const double gl = g.leaf(cell, k);
          if (gl == 0.0) continue;
          const double var = leaf.variances(cell, k);
          const double d = xv - leaf.means(cell, k);
          acc.means(cell, k) += gl * d / var;
          const double dvar = gl * (d * d / var - 1.0) / (2.0 * var);
          acc.variance_raw(cell, k) += dvar * (var - kVarianceFloor);
        }
      }
    }
  });

  LossGradients out;
  double loss = 0.0;
  int correct = 0;
  std::vector<RowMatrixd> lw;
  RowMatrixd means, raw;
  for (int w = 0; w < threads; ++w) {
    auto& p = partial[w];
    if (p.log_weights.empty()) continue;
    loss += p.loss;
    correct += p.correct;
    if (lw.empty()) {
      lw = std::move(p.log_weights);
      means = std::move(p.means);
      raw = std::move(p.variance_raw);
      continue;
    }
    for (std::size_t k = 0; k < lw.size(); ++k) lw[k] += p.log_weights[k];
    means += p.means;
    raw += p.variance_raw;
  }
  const double scale = n > 0 ? 1.0 / n : 0.0;
  out.loss = loss * scale;
  out.accuracy = correct * scale;
  // Chain through the per-column softmax: d/da_j = g_j - w_j * sum_i g_i.
  for (std::size_t k = 0; k < params.sums.size(); ++k) {
    const RowMatrixd w = params.sums[k].log_weights.array().exp();
    RowMatrixd g = lw.empty() ? RowMatrixd::Zero(w.rows(), w.cols()) : RowMatrixd(lw[k] * scale);
    const Eigen::RowVectorXd col_sums = g.colwise().sum();
    g -= (w.array().rowwise() * col_sums.array()).matrix();
    out.blocks.push_back(std::move(g));
  }
  out.blocks.push_back(means.size() ? RowMatrixd(means * scale)
                                    : RowMatrixd::Zero(leaf.cells(), leaf.components()));
  out.blocks.push_back(raw.size() ? RowMatrixd(raw * scale)
                                  : RowMatrixd::Zero(leaf.cells(), leaf.components()));
  return out;
}

void adam_update(std::span<RowMatrixd* const> blocks, std::span<const RowMatrixd> grads,
                 AdamState& state, const AdamHyper& hyper) {
  if (blocks.size() != grads.size()) throw DomainError("adam_update: block count mismatch");
  if (state.m.empty()) {
    for (const auto* b : blocks) {
      state.m.push_back(RowMatrixd::Zero(b->rows(), b->cols()));
      state.v.push_back(RowMatrixd::Zero(b->rows(), b->cols()));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    m = hyper.beta1 * m + (1.0 - hyper.beta1) * grads[i];
    v = hyper.beta2 * v + (1.0 - hyper.beta2) * grads[i].cwiseAbs2();
    blocks[i]->array() -=
        hyper.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + hyper.epsilon);
  }
}

AdamStepStats adam_step(const ExecutionPlan& plan, ModelParams& params, AdamState& state,
                        std::span<const ImageD> images, std::span<const int> labels,
                        const TrainConfig& config, std::uint64_t step_key) {
  if (params.mode != AccumulatorMode::kLog)
    throw UnsupportedError("gradient training needs log-space accumulators");
  auto g = loss_gradients(plan, params, images, labels, config.product_dropout,
                          config.input_dropout, config.seed, step_key, config.threads);
  auto blocks = trainable_blocks(params);
  adam_update(blocks, g.blocks, state, config.adam);
  params.refresh_weights();
  params.refresh_variances();
  return {g.loss, g.accuracy};
}

ModelParams init_params(const ExecutionPlan& plan, std::span<const ImageD> images,
                        const TrainConfig& config) {
  Rng rng = substream(config.seed, "init");
  const bool adam = config.mode == TrainMode::kAdam;
  ModelParams params =
      random_params(plan, adam ? AccumulatorMode::kLog : AccumulatorMode::kCounts, rng);
  if (adam) params.refresh_weights();
  else params.refresh_weights(config.smoothing_base);
  if (plan.leaf().kind == OpKind::kGaussianLeaf) {
    const int k = plan.leaf().output.channels;
    if (adam)
      set_gaussian(params, equidistant_init(-1.5, 1.5, k, plan.spec.height, plan.spec.width));
    else
      set_gaussian(params, quantile_init(images, k));
  }
  return params;
}

void train(const ExecutionPlan& plan, ModelParams& params, std::span<const ImageD> images,
           std::span<const int> labels, const TrainConfig& config, const ProgressSink& progress) {
  config.validate();
  const bool adam = config.mode == TrainMode::kAdam;
  if (adam && labels.size() != images.size())
    throw DomainError("gradient training needs one label per image");
  const int n = static_cast<int>(images.size());
  std::vector<int> order(n);
  AdamState state;
  const auto start = std::chrono::steady_clock::now();
  auto emit = [&](int epoch, int batch, const char* metric, double value) {
    if (progress) progress({epoch, batch, metric, value});
  };

  std::vector<ImageD> batch_images;
  std::vector<int> batch_labels;
  std::vector<LogTensord> batch_leaves;
  std::uint64_t step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle = substream(config.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(uniform01(shuffle) * (i + 1));
      std::swap(order[i], order[j]);
    }
    int batch = 0;
    for (int begin = 0; begin < n; begin += config.batch_size, ++batch, ++step) {
      const int end = std::min(n, begin + config.batch_size);
      if (adam) {
        batch_images.clear();
        batch_labels.clear();
        for (int s = begin; s < end; ++s) {
          batch_images.push_back(images[order[s]]);
          batch_labels.push_back(labels[order[s]]);
        }
        auto stats = adam_step(plan, params, state, batch_images, batch_labels, config, step);
        emit(epoch, batch, "loss", stats.loss);
        emit(epoch, batch, "accuracy", stats.accuracy);
      } else {
        batch_leaves.clear();
        for (int s = begin; s < end; ++s) {
          const ImageD& im = images[order[s]];
          batch_leaves.push_back(make_leaf_tensor(
              plan, params, im,
              all_observed(static_cast<int>(im.rows()), static_cast<int>(im.cols()))));
        }
        auto stats = hard_em_step(plan, params, batch_leaves,
                                  config.mode == TrainMode::kHardEmUsi, config.threads,
                                  config.smoothing_base);
        emit(epoch, batch, "loglik", stats.mean_log_likelihood);
      }
      emit(epoch, batch, "wall_time",
           std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
  }
}

}  // namespace dgcspn
