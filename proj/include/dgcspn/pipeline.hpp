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

#ifndef DGCSPN_PIPELINE_HPP_
#define DGCSPN_PIPELINE_HPP_

// Dataset-level evaluation shared by the command-line tool and the
// acceptance runner.

#include <functional>
#include <vector>

#include "dgcspn/data.hpp"
#include "dgcspn/inference.hpp"

namespace dgcspn {

struct InpaintSummary {
  double mean_mse = 0.0;            // over images; 0 when nothing is hidden
  std::vector<ImageD> completions;  // [0, 255] scale, unrounded
};

/// Completes every image of `data` under `occlusion`. Each image is
/// normalized with the statistics of its observed pixels, completed, mapped
/// back and clipped to [0, 255]. Refuses discriminative networks.
InpaintSummary inpaint_dataset(const ExecutionPlan& plan, const ModelParams& params,
                               const ImageDataset& data, Occlusion occlusion, int threads = 1);

/// Per-pixel mean of the training images ([0, 255]) used as a prediction for
/// every hidden pixel; the reference predictor for inpainting.
ImageD pixel_mean(const ImageDataset& data);
double baseline_mse(const ImageD& mean_image, const ImageDataset& data, Occlusion occlusion);

struct ClassifySummary {
  double accuracy = 0.0;
  std::vector<int> predictions;
  // confusion(true, predicted)
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> confusion;
};

/// argmax over the class-sum outputs, ties to the lowest class. Throws
/// DataError without labels and UnsupportedError without class sums.
ClassifySummary classify_dataset(const ExecutionPlan& plan, const ModelParams& params,
                                 const ImageDataset& data, int threads = 1);

int predict_class(const Eigen::VectorXd& class_log_outputs);

/// Mean root log-value over normalized images.
double mean_log_likelihood(const ExecutionPlan& plan, const ModelParams& params,
                           const std::vector<ImageD>& normalized, int threads = 1);

}  // namespace dgcspn

#endif  // DGCSPN_PIPELINE_HPP_
