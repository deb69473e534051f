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

// dgcspn: command-line front end.
//
//   dgcspn validate --structure net.txt
//   dgcspn train    --structure net.txt --images train.idx3-ubyte.gz --out model.spnc
//   dgcspn inpaint  --checkpoint model.spnc --images test.gz --occlusion left,bottom --out dir
//   dgcspn classify --checkpoint model.spnc --images test.gz --labels labels.gz
//   dgcspn eval     --checkpoint model.spnc --images test.gz
//
// Exit codes: 0 success, 1 runtime failure (including an invalid network),
// 2 usage or parse errors.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dgcspn/checkpoint.hpp"
#include "dgcspn/data.hpp"
#include "dgcspn/errors.hpp"
#include "dgcspn/graph.hpp"
#include "dgcspn/pipeline.hpp"
#include "dgcspn/training.hpp"

namespace {

using namespace dgcspn;

constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Options {
  std::string structure;
  std::string checkpoint;
  std::string images;
  std::string labels;
  std::string mode = "hard_em";
  std::string out;
  std::vector<std::string> occlusion{"left", "bottom"};
  int epochs = 15;
  int batch = 128;
  std::uint64_t seed = 0;
  int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  int limit = -1;
  double learning_rate = AdamHyper{}.learning_rate;
  double product_dropout = 0.2;
  double input_dropout = 0.2;
};

ImageDataset load_limited(const Options& o, bool want_labels) {
  ImageDataset data = load_images(o.images, want_labels ? o.labels : "");
  if (o.limit >= 0) data = data.head(o.limit);
  return data;
}

int run_validate(const Options& o) {
  const NetworkSpec spec = load_structure(o.structure);
  const ValidityReport report = check_validity(spec);
  std::cout << format_report(report);
  return report.valid ? 0 : kFailure;
}

int run_train(const Options& o) {
  const NetworkSpec spec = load_structure(o.structure);
  const ExecutionPlan plan = compile(spec);
  TrainConfig config;
  config.mode = parse_train_mode(o.mode);
  config.epochs = o.epochs;
  config.batch_size = o.batch;
  config.seed = o.seed;
  config.threads = o.threads;
  config.adam.learning_rate = o.learning_rate;
  config.product_dropout = o.product_dropout;
  config.input_dropout = o.input_dropout;
  config.validate();

  const bool adam = config.mode == TrainMode::kAdam;
  if (adam && !plan.discriminative())
    throw UnsupportedError("--mode adam needs a network with class_sums");
  if (!adam && plan.discriminative())
    throw UnsupportedError("hard EM needs a generative network (no class_sums)");
  if (adam && o.labels.empty()) throw DataError("--mode adam needs --labels");

  const ImageDataset data = load_limited(o, adam);
  data.check();
  if (data.height != spec.height || data.width != spec.width)
    throw DataError("images are " + std::to_string(data.height) + "x" + std::to_string(data.width) +
                    " but the network expects " + std::to_string(spec.height) + "x" +
                    std::to_string(spec.width));
  const NormalizedSet norm = normalize_samplewise(data);
  std::vector<int> labels = adam ? *data.labels : std::vector<int>{};

  Checkpoint ckpt;
  ckpt.spec = spec;
  ckpt.seed = config.seed;
  ckpt.mode = config.mode;
  ckpt.params = init_params(plan, norm.images, config);
  train(plan, ckpt.params, norm.images, labels, config, [](const ProgressRecord& r) {
    std::printf("epoch=%d batch=%d metric=%s:%.9g\n", r.epoch, r.batch, r.metric.c_str(), r.value);
    std::fflush(stdout);
  });
  save_checkpoint(o.out, ckpt);
  return 0;
}

int run_inpaint(const Options& o) {
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const ExecutionPlan plan = compile(ckpt.spec);
  if (plan.discriminative())
    throw UnsupportedError("refusing to inpaint with a discriminative checkpoint");
  const ImageDataset data = load_limited(o, false);
  std::vector<Occlusion> kinds;
  for (const auto& name : o.occlusion) kinds.push_back(parse_occlusion(name));
  if (!o.out.empty()) std::filesystem::create_directories(o.out);

  for (Occlusion kind : kinds) {
    const InpaintSummary s = inpaint_dataset(plan, ckpt.params, data, kind, o.threads);
    if (!o.out.empty()) {
      for (std::size_t i = 0; i < s.completions.size(); ++i)
        write_pgm((std::filesystem::path(o.out) /
                   (std::string(to_string(kind)) + "_" + std::to_string(i) + ".pgm"))
                      .string(),
                  s.completions[i]);
    }
    std::printf("occlusion=%s images=%d mse=%.4f\n", to_string(kind), data.count, s.mean_mse);
  }
  return 0;
}

int run_classify(const Options& o) {
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const ExecutionPlan plan = compile(ckpt.spec);
  if (o.labels.empty()) throw DataError("classify needs --labels");
  const ImageDataset data = load_limited(o, true);
  const ClassifySummary s = classify_dataset(plan, ckpt.params, data, o.threads);
  std::printf("accuracy=%.4f\n", s.accuracy);
  for (Eigen::Index k = 0; k < s.confusion.rows(); ++k) {
    std::printf("class=%d total=%lld predicted=", static_cast<int>(k), s.confusion.row(k).sum());
    for (Eigen::Index j = 0; j < s.confusion.cols(); ++j)
      std::printf("%s%lld", j ? "," : "", s.confusion(k, j));
    std::printf("\n");
  }
  return 0;
}

int run_eval(const Options& o) {
  const Checkpoint ckpt = load_checkpoint(o.checkpoint);
  const ExecutionPlan plan = compile(ckpt.spec);
  const ImageDataset data = load_limited(o, false);
  const NormalizedSet norm = normalize_samplewise(data);
  std::printf("images=%d mean_loglik=%.6f log_z=%.3e\n", data.count,
              mean_log_likelihood(plan, ckpt.params, norm.images, o.threads),
              partition_function(plan, ckpt.params));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Deep generalized convolutional sum-product networks"};
  app.require_subcommand(1);

  auto* validate = app.add_subcommand("validate", "Check completeness and decomposability");
  validate->add_option("--structure", o.structure, "Structure file")->required();

  auto* train_cmd = app.add_subcommand("train", "Train a network and write a checkpoint");
  train_cmd->add_option("--structure", o.structure, "Structure file")->required();
  train_cmd->add_option("--images", o.images, "IDX (optionally .gz) or SPNT images")->required();
  train_cmd->add_option("--labels", o.labels, "IDX labels (required for adam)");
  train_cmd->add_option("--mode", o.mode, "Training mode")
      ->check(CLI::IsMember({"hard_em", "hard_em_usi", "adam"}))
      ->capture_default_str();
  train_cmd->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--batch", o.batch)->check(CLI::PositiveNumber)->capture_default_str();
  train_cmd->add_option("--seed", o.seed)->capture_default_str();
  train_cmd->add_option("--lr", o.learning_rate, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--product-dropout", o.product_dropout)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--input-dropout", o.input_dropout)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  train_cmd->add_option("--out", o.out, "Checkpoint path")->required();

  auto* inpaint_cmd = app.add_subcommand("inpaint", "Complete occluded images");
  inpaint_cmd->add_option("--checkpoint", o.checkpoint)->required();
  inpaint_cmd->add_option("--images", o.images)->required();
  inpaint_cmd->add_option("--occlusion", o.occlusion, "left, bottom and/or none")
      ->delimiter(',')
      ->check(CLI::IsMember({"left", "bottom", "none"}))
      ->capture_default_str();
  inpaint_cmd->add_option("--out", o.out, "Directory for <occlusion>_<i>.pgm completions");

  auto* classify = app.add_subcommand("classify", "Accuracy and confusion counts");
  classify->add_option("--checkpoint", o.checkpoint)->required();
  classify->add_option("--images", o.images)->required();
  classify->add_option("--labels", o.labels)->required();

  auto* eval = app.add_subcommand("eval", "Mean log-likelihood and log partition function");
  eval->add_option("--checkpoint", o.checkpoint)->required();
  eval->add_option("--images", o.images)->required();

  for (auto* sub : {train_cmd, inpaint_cmd, classify, eval}) {
    sub->add_option("--threads", o.threads, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    if (sub != train_cmd) sub->add_option("--limit", o.limit, "Use only the first N images");
  }
  train_cmd->add_option("--limit", o.limit, "Use only the first N images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*validate) return run_validate(o);
    if (*train_cmd) return run_train(o);
    if (*inpaint_cmd) return run_inpaint(o);
    if (*classify) return run_classify(o);
    if (*eval) return run_eval(o);
  } catch (const InvalidNetworkError& e) {
    std::cerr << "error: " << e.what() << "\n" << format_report(e.report());
    return kFailure;
  } catch (const ParseError& e) {
    std::cerr << "error: " << o.structure << ": " << e.what() << "\n";
    return kUsage;
  } catch (const StructureError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
