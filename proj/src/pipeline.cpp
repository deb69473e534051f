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

#include "dgcspn/pipeline.hpp"

#include <algorithm>

#include "dgcspn/errors.hpp"
#include "dgcspn/parallel.hpp"

namespace dgcspn {

InpaintSummary inpaint_dataset(const ExecutionPlan& plan, const ModelParams& params,
                               const ImageDataset& data, Occlusion occlusion, int threads) {
  if (plan.discriminative())
    throw UnsupportedError("inpainting needs a generative network (this one has class sums)");
  if (data.height != plan.spec.height || data.width != plan.spec.width)
    throw DataError("dataset images do not match the network input shape");
  const EvidenceMask mask = apply_occlusion(data.height, data.width, occlusion);
  const bool any_hidden = !mask.all();
  InpaintSummary out;
  out.completions.resize(data.count);
  std::vector<double> mse(data.count, 0.0);
  parallel_chunks(data.count, threads, [&](int, int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const ImageD original = data.image(i);
      const NormStats stats = observed_stats(original, mask);
      ImageD x = ((original.array() - stats.mean) / stats.std).matrix();
      ImageD y = denormalize(inpaint(plan, params, x, mask), stats);
      y = y.cwiseMax(0.0).cwiseMin(255.0);
      // Observed pixels are evidence; return them untouched.
      for (Eigen::Index k = 0; k < y.size(); ++k)
        if (mask.data()[k]) y.data()[k] = original.data()[k];
      if (any_hidden) mse[i] = mse_occluded(y, original, mask);
      out.completions[i] = std::move(y);
    }
  });
  for (double m : mse) out.mean_mse += m;
  if (data.count > 0) out.mean_mse /= data.count;
  return out;
}

ImageD pixel_mean(const ImageDataset& data) {
  ImageD mean = ImageD::Zero(data.height, data.width);
  for (int i = 0; i < data.count; ++i) mean += data.image(i);
  if (data.count > 0) mean /= data.count;
  return mean;
}

double baseline_mse(const ImageD& mean_image, const ImageDataset& data, Occlusion occlusion) {
  const EvidenceMask mask = apply_occlusion(data.height, data.width, occlusion);
  if (mask.all() || data.count == 0) return 0.0;
  double total = 0.0;
  for (int i = 0; i < data.count; ++i) total += mse_occluded(mean_image, data.image(i), mask);
  return total / data.count;
}

int predict_class(const Eigen::VectorXd& z) {
  int best = 0;
  for (int k = 1; k < z.size(); ++k)
    if (z(k) > z(best)) best = k;
  return best;
}

ClassifySummary classify_dataset(const ExecutionPlan& plan, const ModelParams& params,
                                 const ImageDataset& data, int threads) {
  const int op = plan.class_op();
  if (op < 0) throw UnsupportedError("classification needs a network with class sums");
  if (!data.labels) throw DataError("classification needs labels");
  data.check();
  if (data.height != plan.spec.height || data.width != plan.spec.width)
    throw DataError("dataset images do not match the network input shape");
  const int classes = plan.ops[op].output.channels;
  ClassifySummary out;
  out.predictions.assign(data.count, 0);
  parallel_chunks(data.count, threads, [&](int, int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const ImageD x = normalize(data.image(i));
      auto fwd = forward_marginal(
          plan, params, make_leaf_tensor(plan, params, x, all_observed(data.height, data.width)));
      out.predictions[i] = predict_class(class_log_outputs(plan, fwd.trace));
    }
  });
  out.confusion.setZero(classes, classes);
  int hits = 0;
  for (int i = 0; i < data.count; ++i) {
    const int truth = (*data.labels)[i];
    if (truth < 0 || truth >= classes)
      throw DataError("label " + std::to_string(truth) + " outside the network's classes");
    ++out.confusion(truth, out.predictions[i]);
    hits += truth == out.predictions[i];
  }
  out.accuracy = data.count > 0 ? static_cast<double>(hits) / data.count : 0.0;
  return out;
}

double mean_log_likelihood(const ExecutionPlan& plan, const ModelParams& params,
                           const std::vector<ImageD>& normalized, int threads) {
  const int n = static_cast<int>(normalized.size());
  std::vector<double> ll(n, 0.0);
  parallel_chunks(n, threads, [&](int, int begin, int end) {
    for (int i = begin; i < end; ++i) {
      const auto& x = normalized[i];
      ll[i] = forward_marginal(plan, params,
                               make_leaf_tensor(plan, params, x,
                                                all_observed(static_cast<int>(x.rows()),
                                                             static_cast<int>(x.cols()))))
                  .log_value;
    }
  });
  double total = 0.0;
  for (double v : ll) total += v;
  return n > 0 ? total / n : 0.0;
}

}  // namespace dgcspn
