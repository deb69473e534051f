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

#include "dgcspn/inference.hpp"

#include <cmath>

namespace dgcspn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// exp(x) for x below this is under kLinearFloor in log_matmul.
const double kLogLinearFloor = std::log(detail::kLinearFloor);

// Children of a class-sum / root op as one row: child cells concatenated.
RowMatrixd gather_children(const PlanOp& op, const LogTensord& input) {
  const int c = input.channels();
  RowMatrixd x(1, op.fan_in);
  for (std::size_t j = 0; j < op.child_cells.size(); ++j)
    x.block(0, static_cast<Eigen::Index>(j) * c, 1, c) = input.matrix().row(op.child_cells[j]);
  return x;
}

void scatter_children(const PlanOp& op, const RowMatrixd& gx, RowMatrixd& g_in) {
  const Eigen::Index c = g_in.cols();
  for (std::size_t j = 0; j < op.child_cells.size(); ++j)
    g_in.row(op.child_cells[j]) = gx.block(0, static_cast<Eigen::Index>(j) * c, 1, c);
}

const RowMatrixd& weights_of(const ModelParams& params, const PlanOp& op) {
  return params.sums.at(op.param_slot).log_weights;
}

void check_leaf(const ExecutionPlan& plan, const LogTensord& leaf) {
  const auto& want = plan.leaf().output;
  if (!(leaf.shape() == want))
    throw DomainError("leaf tensor shape does not match the plan input");
}

}  // namespace

ForwardResult forward_marginal(const ExecutionPlan& plan, const ModelParams& params,
                               LogTensord leaf, const ProductHook& on_product) {
  check_leaf(plan, leaf);
  ForwardResult r;
  auto& acts = r.trace.activations;
  acts.reserve(plan.ops.size());
  acts.push_back(std::move(leaf));
  for (std::size_t k = 1; k < plan.ops.size(); ++k) {
    const PlanOp& op = plan.ops[k];
    const LogTensord& in = acts[k - 1];
    switch (op.kind) {
      case OpKind::kSum:
        acts.push_back(spatial_sum_forward(in, weights_of(params, op), op.padding));
        break;
      case OpKind::kProduct:
        acts.push_back(gclp_forward(in, op.geometry, op.kernel_table));
        if (on_product) on_product(acts.back());
        break;
      case OpKind::kClassSums:
      case OpKind::kRoot: {
        LogTensord out(1, 1, op.output.channels);
        out.matrix() = log_matmul(gather_children(op, in), weights_of(params, op));
        acts.push_back(std::move(out));
        break;
      }
      default:
        throw DomainError("forward_marginal: unexpected leaf op inside the plan");
    }
  }
  r.log_value = acts.back().matrix()(0, 0);
  return r;
}

double partition_function(const ExecutionPlan& plan, const ModelParams& params) {
  return forward_marginal(plan, params, LogTensord(plan.leaf().output, 0.0)).log_value;
}

namespace {

// out(r, o) = max_i x(r, i) + log_w(i, o), recording argmax (lowest on ties).
RowMatrixd max_product(const RowMatrixd& x, const RowMatrixd& log_w, WinnerMatrix& winners) {
  RowMatrixd out(x.rows(), log_w.cols());
  winners.resize(x.rows(), log_w.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index o = 0; o < log_w.cols(); ++o) {
      double best = kNegInf;
      int arg = 0;
      for (Eigen::Index i = 0; i < x.cols(); ++i) {
        const double v = x(r, i) + log_w(i, o);
        if (v > best) {
          best = v;
          arg = static_cast<int>(i);
        }
      }
      out(r, o) = best;
      winners(r, o) = arg;
    }
  }
  return out;
}

}  // namespace

MpeResult forward_mpe(const ExecutionPlan& plan, const ModelParams& params, LogTensord leaf) {
  check_leaf(plan, leaf);
  MpeResult r;
  auto& acts = r.trace.activations;
  r.winners.resize(plan.ops.size());
  acts.push_back(std::move(leaf));
  for (std::size_t k = 1; k < plan.ops.size(); ++k) {
    const PlanOp& op = plan.ops[k];
    const LogTensord& in = acts[k - 1];
    if (op.kind == OpKind::kProduct) {
      acts.push_back(gclp_forward(in, op.geometry, op.kernel_table));
      continue;
    }
    LogTensord out(op.output);
    if (op.kind == OpKind::kSum) {
      out.matrix() = max_product(in.matrix(), weights_of(params, op), r.winners[k]);
      for (std::size_t c = 0; c < op.padding.size(); ++c)
        if (op.padding[c]) out.matrix().row(static_cast<Eigen::Index>(c)).setZero();
    } else {
      out.matrix() = max_product(gather_children(op, in), weights_of(params, op), r.winners[k]);
    }
    acts.push_back(std::move(out));
  }
  r.log_value = acts.back().matrix()(0, 0);
  return r;
}

namespace {

// Sum of the selected children of product (cell, r) except patch position
// skip; used when the skipped child is -inf and the quotient is undefined.
double product_without(const PlanOp& op, const LogTensord& in, int oi, int oj, int r, int skip) {
  double acc = 0.0;
  for (int t = 0; t < op.geometry.patch_size(); ++t) {
    if (t == skip) continue;
    const int c = op.geometry.input_cell(oi, oj, t);
    if (c >= 0) acc += in.matrix()(c, op.kernel_table(r, t));
  }
  return acc;
}

}  // namespace

LogTensord backward_root_derivatives(const ExecutionPlan& plan, const ModelParams& params,
                                     const ForwardTrace& trace) {
  const auto& acts = trace.activations;
  if (acts.size() != plan.ops.size()) throw DomainError("trace does not match the plan");
  // g = log dS/d(node value), one matrix per op output.
  RowMatrixd g = RowMatrixd::Zero(1, 1);
  for (std::size_t k = plan.ops.size() - 1; k >= 1; --k) {
    const PlanOp& op = plan.ops[k];
    const LogTensord& in = acts[k - 1];
    const LogTensord& out = acts[k];
    RowMatrixd g_in = RowMatrixd::Constant(in.cells(), in.channels(), kNegInf);
    switch (op.kind) {
      case OpKind::kSum:
        g_in = log_matmul(g, weights_of(params, op).transpose());
        for (std::size_t c = 0; c < op.padding.size(); ++c)
          if (op.padding[c]) g_in.row(static_cast<Eigen::Index>(c)).setConstant(kNegInf);
        break;
      case OpKind::kClassSums:
      case OpKind::kRoot:
        scatter_children(op, log_matmul(g, weights_of(params, op).transpose()), g_in);
        break;
      case OpKind::kProduct: {
        const auto& geo = op.geometry;
        for (int oi = 0; oi < geo.out_h; ++oi) {
          for (int oj = 0; oj < geo.out_w; ++oj) {
            const int cell = oi * geo.out_w + oj;
            for (int r = 0; r < op.output.channels; ++r) {
              const double up = g(cell, r);
              if (up == kNegInf) continue;
              const double value = out.matrix()(cell, r);
              for (int t = 0; t < geo.patch_size(); ++t) {
                const int c = geo.input_cell(oi, oj, t);
                if (c < 0) continue;
                const int ch = op.kernel_table(r, t);
                const double child = in.matrix()(c, ch);
                const double others = child == kNegInf ? product_without(op, in, oi, oj, r, t)
                                                       : value - child;
                g_in(c, ch) = log_add_exp(g_in(c, ch), up + others);
              }
            }
          }
        }
        break;
      }
      default:
        break;
    }
    g = std::move(g_in);
  }
  LogTensord result(plan.leaf().output);
  result.matrix() = g;
  return result;
}

namespace {

// Backward through out = log_matmul(x, log_w) for ordinary gradients.
void sum_backward(const RowMatrixd& x, const RowMatrixd& out, const RowMatrixd& log_w,
                  const RowMatrixd& g_out, const std::vector<char>& padding, RowMatrixd& g_x,
                  RowMatrixd& g_log_w) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index n = x.cols();
  const Eigen::Index m = log_w.cols();
  g_x = RowMatrixd::Zero(rows, n);
  RowMatrixd a = RowMatrixd::Zero(rows, m);
  RowMatrixd e = RowMatrixd::Zero(rows, n);
  Eigen::VectorXd shift = x.rowwise().maxCoeff();
  for (Eigen::Index r = 0; r < rows; ++r) {
    if (shift(r) == kNegInf) continue;
    if (static_cast<std::size_t>(r) < padding.size() && padding[r]) continue;
    e.row(r) = (x.row(r).array() - shift(r)).exp();
    for (Eigen::Index o = 0; o < m; ++o) {
      const double go = g_out(r, o);
      if (go == 0.0 || out(r, o) == kNegInf) continue;
      const double rel = out(r, o) - shift(r);
      if (rel > kLogLinearFloor) {
        a(r, o) = go * std::exp(-rel);
        continue;
      }
      // Shifted sum underflowed in the forward pass: exact responsibilities.
      for (Eigen::Index i = 0; i < n; ++i) {
        const double resp = std::exp(log_w(i, o) + x(r, i) - out(r, o));
        g_x(r, i) += go * resp;
        g_log_w(i, o) += go * resp;
      }
    }
  }
  const RowMatrixd w = log_w.array().exp();
  g_x.array() += e.array() * (a * w.transpose()).array();
  g_log_w.array() += w.array() * (e.transpose() * a).array();
}

}  // namespace

LogValueGradients backward_gradients(const ExecutionPlan& plan, const ModelParams& params,
                                     const ForwardTrace& trace, int seed_op,
                                     const RowMatrixd& seed) {
  const auto& acts = trace.activations;
  if (acts.size() != plan.ops.size()) throw DomainError("trace does not match the plan");
  if (seed_op < 1 || seed_op >= static_cast<int>(plan.ops.size()))
    throw DomainError("backward_gradients: seed op out of range");
  const auto& seed_out = acts[seed_op].matrix();
  if (seed.rows() != seed_out.rows() || seed.cols() != seed_out.cols())
    throw DomainError("backward_gradients: seed shape differs from the op output");

  LogValueGradients grads;
  grads.log_weights.resize(params.sums.size());
  RowMatrixd g = seed;
  for (int k = seed_op; k >= 1; --k) {
    const PlanOp& op = plan.ops[k];
    const LogTensord& in = acts[k - 1];
    const LogTensord& out = acts[k];
    RowMatrixd g_in = RowMatrixd::Zero(in.cells(), in.channels());
    switch (op.kind) {
      case OpKind::kSum: {
        auto& gw = grads.log_weights[op.param_slot];
        if (gw.size() == 0) gw = RowMatrixd::Zero(op.fan_in, op.output.channels);
        sum_backward(in.matrix(), out.matrix(), weights_of(params, op), g, op.padding, g_in, gw);
        break;
      }
      case OpKind::kClassSums:
      case OpKind::kRoot: {
        auto& gw = grads.log_weights[op.param_slot];
        if (gw.size() == 0) gw = RowMatrixd::Zero(op.fan_in, op.output.channels);
        RowMatrixd gx;
        sum_backward(gather_children(op, in), out.matrix(), weights_of(params, op), g, {}, gx, gw);
        scatter_children(op, gx, g_in);
        break;
      }
      case OpKind::kProduct: {
        const auto& geo = op.geometry;
        for (int oi = 0; oi < geo.out_h; ++oi) {
          for (int oj = 0; oj < geo.out_w; ++oj) {
            const int cell = oi * geo.out_w + oj;
            for (int r = 0; r < op.output.channels; ++r) {
              const double up = g(cell, r);
              // Zero-probability (e.g. dropped) products pass nothing down.
              if (up == 0.0 || out.matrix()(cell, r) == kNegInf) continue;
              for (int t = 0; t < geo.patch_size(); ++t) {
                const int c = geo.input_cell(oi, oj, t);
                if (c >= 0) g_in(c, op.kernel_table(r, t)) += up;
              }
            }
          }
        }
        break;
      }
      default:
        break;
    }
    g = std::move(g_in);
  }
  grads.leaf = std::move(g);
  return grads;
}

LogTensord make_leaf_tensor(const ExecutionPlan& plan, const ModelParams& params,
                            const ImageD& image, const EvidenceMask& mask) {
  if (plan.leaf().kind != OpKind::kGaussianLeaf || !params.gaussian)
    throw UnsupportedError("network has no Gaussian leaf layer");
  return gaussian_log_prob(image, *params.gaussian, mask);
}

Eigen::VectorXd class_log_outputs(const ExecutionPlan& plan, const ForwardTrace& trace) {
  const int k = plan.class_op();
  if (k < 0) throw UnsupportedError("network has no class sums");
  return trace.activations.at(k).matrix().row(0).transpose();
}

LeafPosterior leaf_posterior(const ExecutionPlan& plan, const ModelParams& params,
                             const ImageD& image, const EvidenceMask& mask) {
  auto fwd = forward_marginal(plan, params, make_leaf_tensor(plan, params, image, mask));
  const LogTensord g = backward_root_derivatives(plan, params, fwd.trace);
  const int cells = g.cells();
  const int k = g.channels();
  LeafPosterior post;
  post.probs = RowMatrixd::Zero(cells, k);
  post.observed.resize(cells);
  const int w = static_cast<int>(image.cols());
  for (int c = 0; c < cells; ++c) {
    post.observed[c] = mask(c / w, c % w);
    if (post.observed[c]) continue;
    const double m = g.matrix().row(c).maxCoeff();
    if (m == kNegInf) {
      post.probs.row(c).setConstant(1.0 / k);
      continue;
    }
    post.probs.row(c) = (g.matrix().row(c).array() - m).exp();
    post.probs.row(c) /= post.probs.row(c).sum();
  }
  return post;
}

ImageD inpaint(const ExecutionPlan& plan, const ModelParams& params, const ImageD& image,
               const EvidenceMask& mask) {
  if (plan.leaf().kind != OpKind::kGaussianLeaf || !params.gaussian)
    throw UnsupportedError("inpainting needs Gaussian leaves");
  ImageD out = image;
  if (mask.all()) return out;
  const LeafPosterior post = leaf_posterior(plan, params, image, mask);
  const int w = static_cast<int>(image.cols());
  for (int c = 0; c < static_cast<int>(post.observed.size()); ++c) {
    if (post.observed[c]) continue;
    out(c / w, c % w) = post.probs.row(c).dot(params.gaussian->means.row(c));
  }
  return out;
}

}  // namespace dgcspn
