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

#include <cmath>
#include <numeric>

#include "criteria.hpp"
#include "doctest.h"
#include "dgcspn/training.hpp"
#include "networks.hpp"

using namespace dgcspn;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd logs(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = std::log(x);
  return out;
}

double total(const RowMatrixd& m) { return m.sum(); }

// Linearly separable two-class toy: pixels near -1 for class 0, near +1 for
// class 1.
void separable_toy(Rng& rng, int n, std::vector<ImageD>& images, std::vector<int>& labels) {
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    ImageD x(1, 2);
    for (Eigen::Index j = 0; j < x.size(); ++j)
      x.data()[j] = (y ? 1.0 : -1.0) + 0.3 * standard_normal(rng);
    images.push_back(x);
    labels.push_back(y);
  }
}

double clean_accuracy(const ExecutionPlan& plan, const ModelParams& p,
                      const std::vector<ImageD>& images, const std::vector<int>& labels) {
  int hits = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto fwd = forward_marginal(plan, p, make_leaf_tensor(plan, p, images[i], all_observed(1, 2)));
    Eigen::Index arg = 0;
    class_log_outputs(plan, fwd.trace).maxCoeff(&arg);
    hits += arg == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(images.size());
}

double mean_ll(const ExecutionPlan& plan, const ModelParams& p, const std::vector<ImageD>& images) {
  double s = 0.0;
  for (const auto& im : images)
    s += forward_marginal(plan, p,
                          make_leaf_tensor(plan, p, im,
                                           all_observed(static_cast<int>(im.rows()),
                                                        static_cast<int>(im.cols()))))
             .log_value;
  return s / static_cast<double>(images.size());
}

// Small images built from a few prototypes plus noise.
std::vector<ImageD> prototype_images(Rng& rng, int n, int h, int w) {
  std::vector<ImageD> protos;
  for (int k = 0; k < 3; ++k) {
    ImageD p(h, w);
    for (Eigen::Index j = 0; j < p.size(); ++j) p.data()[j] = 2.0 * standard_normal(rng);
    protos.push_back(p);
  }
  std::vector<ImageD> out;
  for (int i = 0; i < n; ++i) {
    ImageD x = protos[testnet::uniform_int(rng, 0, 2)];
    for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] += 0.3 * standard_normal(rng);
    out.push_back(x);
  }
  return out;
}

const char* kGenerative =
    "input shape=4x4\ngaussian_leaf k=3\n"
    "gclp kernel=2x2 dilation=1x1 pad=full channels=onehot:8\nspatial_sum channels=4\n"
    "gclp kernel=2x2 dilation=2x2 pad=full\nspatial_sum channels=4\n"
    "gclp kernel=2x2 dilation=4x4 pad=full\nroot\n";

}  // namespace

TEST_SUITE("training") {

TEST_CASE("training modes and config validation") {
  CHECK(parse_train_mode("hard_em") == TrainMode::kHardEm);
  CHECK(parse_train_mode("hard_em_usi") == TrainMode::kHardEmUsi);
  CHECK(parse_train_mode("adam") == TrainMode::kAdam);
  CHECK_THROWS_AS(parse_train_mode("sgd"), DomainError);
  for (TrainMode m : {TrainMode::kHardEm, TrainMode::kHardEmUsi, TrainMode::kAdam})
    CHECK(parse_train_mode(to_string(m)) == m);

  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.adam.learning_rate == 1e-4);
  CHECK(c.adam.beta1 == 0.9);
  CHECK(c.adam.beta2 == 0.999);
  CHECK(c.adam.epsilon == 1e-7);
  CHECK(c.product_dropout == 0.2);
  CHECK(c.input_dropout == 0.2);
  TrainConfig bad = c;
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  bad.product_dropout = 1.5;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = c;
  bad.input_dropout = -0.1;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("smooth_normalize examples") {
  Eigen::VectorXd c(2);
  c << 3.0, 1.0;
  Eigen::VectorXd w = smooth_normalize(c);
  CHECK(w(0) == doctest::Approx(3.005 / 4.01).epsilon(1e-14));
  CHECK(w(1) == doctest::Approx(1.005 / 4.01).epsilon(1e-14));
  CHECK(w(0) == doctest::Approx(0.74938).epsilon(1e-5));

  w = smooth_normalize(Eigen::VectorXd::Zero(5));
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(w(i) == doctest::Approx(0.2).epsilon(1e-15));

  Eigen::VectorXd big = Eigen::VectorXd::Zero(3);
  big(0) = 1e12;
  w = smooth_normalize(big);
  CHECK(w(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(w(1) < 1e-14);
  CHECK_THROWS_AS(smooth_normalize(Eigen::VectorXd(0)), DomainError);
}

TEST_CASE("winner selection: weighted picks the heavier product, USI the larger child") {
  Eigen::RowVectorXd children = logs({0.2, 0.9}).transpose();
  Eigen::VectorXd w = logs({0.9, 0.1});
  CHECK(select_winner(children, w, false) == 0);
  CHECK(select_winner(children, w, true) == 1);
  Eigen::RowVectorXd tie = logs({0.5, 0.5, 0.5}).transpose();
  CHECK(select_winner(tie, logs({0.2, 0.2, 0.6}), false) == 2);
  CHECK(select_winner(tie, logs({0.3, 0.3, 0.4}), true) == 0);
  Eigen::RowVectorXd dead = Eigen::RowVectorXd::Constant(3, -kInf);
  CHECK(select_winner(dead, logs({0.3, 0.3, 0.4}), false) == 0);
}

TEST_CASE("winner selection is invariant to weight scaling, and USI to any weights") {
  Rng rng = substream(21, "argmax");
  for (int i = 0; i < 2000; ++i) {
    const int n = testnet::uniform_int(rng, 1, 8);
    Eigen::RowVectorXd c(n);
    Eigen::VectorXd w(n), other(n);
    for (int j = 0; j < n; ++j) {
      c(j) = -5.0 * uniform01(rng);
      w(j) = std::log(0.01 + uniform01(rng));
      other(j) = std::log(0.01 + uniform01(rng));
    }
    const double shift = std::log(1e-3 + 1e3 * uniform01(rng));
    const int base = select_winner(c, w, false);
    CHECK(select_winner(c, (w.array() + shift).matrix(), false) == base);
    CHECK(select_winner(c, other, true) == select_winner(c, w, true));
  }
}

TEST_CASE("each reached sum instance gains exactly one count per sample") {
  // Two cells, one 2-channel sum per cell, a product over both cells.
  ExecutionPlan plan = compile(parse_structure(
      "input shape=1x2\ngaussian_leaf k=2\nspatial_sum channels=2\n"
      "gclp kernel=1x2 channels=onehot:4\nroot\n"));
  Rng rng = substream(22, "increment");
  ModelParams p = random_params(plan, AccumulatorMode::kCounts, rng);
  set_gaussian(p, GaussianLeafParams{RowMatrixd::Zero(2, 2), RowMatrixd::Ones(2, 2)});
  for (int s = 0; s < 50; ++s) {
    LogTensord leaf(1, 2, 2);
    for (Eigen::Index j = 0; j < 4; ++j) leaf.matrix().data()[j] = -3.0 * uniform01(rng);
    auto fwd = forward_marginal(plan, p, leaf);
    std::vector<RowMatrixd> counts = {RowMatrixd::Zero(2, 2), RowMatrixd::Zero(4, 1)};
    accumulate_winners(plan, p, fwd.trace, s % 2 == 1, counts);
    CHECK(total(counts[1]) == 1.0);
    CHECK(total(counts[0]) == 2.0);
    // The root's winning product selects one channel per cell; each gets +1.
    Eigen::Index win = 0;
    counts[1].col(0).maxCoeff(&win);
    const int c0 = static_cast<int>(win) / 2, c1 = static_cast<int>(win) % 2;
    CHECK(counts[0].col(c0).sum() + counts[0].col(c1).sum() == (c0 == c1 ? 4.0 : 2.0));
    for (Eigen::Index j = 0; j < counts[0].size(); ++j) {
      const double v = counts[0].data()[j];
      CHECK(v == std::floor(v));
    }
  }
}

TEST_CASE("hard EM recovers the mixing proportions of a separated 2-component mixture") {
  ExecutionPlan plan = compile(parse_structure("input shape=1x1\ngaussian_leaf k=2\nroot\n"));
  TrainConfig cfg;
  cfg.seed = 3;
  cfg.epochs = 1;
  cfg.batch_size = 128;
  Rng rng = substream(23, "mixture");
  std::vector<ImageD> images;
  int first = 0;
  for (int i = 0; i < 2000; ++i) {
    const bool a = uniform01(rng) < 0.3;
    first += a;
    images.push_back(ImageD::Constant(1, 1, (a ? -4.0 : 4.0) + standard_normal(rng)));
  }
  for (TrainMode mode : {TrainMode::kHardEm, TrainMode::kHardEmUsi}) {
    cfg.mode = mode;
    ModelParams p = init_params(plan, images, cfg);
    // Components at the true means.
    set_gaussian(p, GaussianLeafParams{(RowMatrixd(1, 2) << -4.0, 4.0).finished(),
                                       RowMatrixd::Ones(1, 2)});
    train(plan, p, images, {}, cfg);
    const double w0 = std::exp(p.sums[0].log_weights(0, 0));
    CHECK(std::abs(w0 - 0.3) <= 0.1);
    CHECK(std::abs(w0 - first / 2000.0) <= 0.01);
  }
}

TEST_CASE("weights stay normalized after every EM step") {
  Rng rng = substream(24, "em-norm");
  testnet::Options o;
  o.gaussian = true;
  o.allow_class_sums = false;
  for (int i = 0; i < 30; ++i) {
    ExecutionPlan plan = compile(testnet::random_valid_network(rng, o));
    ModelParams p = random_params(plan, AccumulatorMode::kCounts, rng);
    std::vector<LogTensord> batch;
    for (int b = 0; b < 5; ++b) {
      LogTensord leaf(plan.leaf().output);
      for (Eigen::Index j = 0; j < leaf.matrix().size(); ++j)
        leaf.matrix().data()[j] = -4.0 * uniform01(rng);
      batch.push_back(leaf);
    }
    for (int step = 0; step < 3; ++step) {
      hard_em_step(plan, p, batch, step == 1, 2);
      for (const auto& s : p.sums) {
        CHECK(s.accumulators.minCoeff() >= 0.0);
        const RowMatrixd w = s.log_weights.array().exp();
        CHECK(w.minCoeff() >= 0.0);
        for (Eigen::Index c = 0; c < w.cols(); ++c) CHECK(std::abs(w.col(c).sum() - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("hard EM refuses discriminative networks and log accumulators") {
  const ExecutionPlan disc = compile(criteria::gradient_network());
  ModelParams p = uniform_params(disc, AccumulatorMode::kCounts);
  std::vector<LogTensord> batch{LogTensord(disc.leaf().output)};
  CHECK_THROWS_AS(hard_em_step(disc, p, batch, false), UnsupportedError);

  const ExecutionPlan gen = compile(parse_structure("input shape=1x1\ngaussian_leaf k=2\nroot\n"));
  ModelParams q = uniform_params(gen, AccumulatorMode::kLog);
  std::vector<LogTensord> one{LogTensord(gen.leaf().output)};
  CHECK_THROWS_AS(hard_em_step(gen, q, one, false), UnsupportedError);
}

TEST_CASE("product dropout") {
  Rng rng = substream(25, "product-dropout");
  LogTensord t(10, 10, 1000);
  t.matrix().setConstant(-1.0);
  LogTensord same = t;
  product_dropout(same, 0.0, rng);
  CHECK(same.matrix() == t.matrix());
  LogTensord all = t;
  product_dropout(all, 1.0, rng);
  CHECK((all.matrix().array() == -kInf).all());
  LogTensord some = t;
  product_dropout(some, 0.2, rng);
  const double frac = static_cast<double>((some.matrix().array() == -kInf).count()) /
                      static_cast<double>(some.matrix().size());
  CHECK(some.matrix().size() == 100000);
  CHECK(std::abs(frac - 0.2) <= 0.01);
}

TEST_CASE("input dropout removes whole variables") {
  Rng rng = substream(26, "input-dropout");
  LogTensord t(20, 20, 4);
  for (Eigen::Index j = 0; j < t.matrix().size(); ++j) t.matrix().data()[j] = -1.0 - uniform01(rng);
  LogTensord same = t;
  const auto none = input_dropout(same, 0.0, rng);
  CHECK(same.matrix() == t.matrix());
  CHECK(std::accumulate(none.begin(), none.end(), 0) == 0);
  LogTensord all = t;
  input_dropout(all, 1.0, rng);
  CHECK(all.matrix().isZero(0.0));
  LogTensord some = t;
  const auto dropped = input_dropout(some, 0.3, rng);
  int n = 0;
  for (int c = 0; c < t.cells(); ++c) {
    if (dropped[c]) {
      ++n;
      CHECK((some.matrix().row(c).array() == 0.0).all());
    } else {
      CHECK(some.matrix().row(c) == t.matrix().row(c));
    }
  }
  CHECK(n > 0);
  CHECK(n < t.cells());
}

TEST_CASE("Adam: zero gradient is a no-op, first step is about alpha * sign(g)") {
  Rng rng = substream(27, "adam");
  RowMatrixd a(3, 4), b(2, 2);
  for (Eigen::Index j = 0; j < a.size(); ++j) a.data()[j] = standard_normal(rng);
  for (Eigen::Index j = 0; j < b.size(); ++j) b.data()[j] = standard_normal(rng);
  const RowMatrixd a0 = a, b0 = b;
  std::vector<RowMatrixd*> blocks{&a, &b};
  AdamHyper hyper;

  AdamState zero;
  std::vector<RowMatrixd> zeros{RowMatrixd::Zero(3, 4), RowMatrixd::Zero(2, 2)};
  for (int i = 0; i < 5; ++i) adam_update(blocks, zeros, zero, hyper);
  CHECK(a == a0);
  CHECK(b == b0);

  AdamState state;
  std::vector<RowMatrixd> g{RowMatrixd(3, 4), RowMatrixd(2, 2)};
  for (auto& m : g)
    for (Eigen::Index j = 0; j < m.size(); ++j)
      m.data()[j] = (uniform01(rng) < 0.5 ? -1.0 : 1.0) * (0.01 + uniform01(rng));
  adam_update(blocks, g, state, hyper);
  CHECK(state.step == 1);
  for (int k = 0; k < 2; ++k) {
    const RowMatrixd& now = k ? b : a;
    const RowMatrixd& before = k ? b0 : a0;
    for (Eigen::Index j = 0; j < now.size(); ++j) {
      const double step = now.data()[j] - before.data()[j];
      const double want = -hyper.learning_rate * (g[k].data()[j] > 0 ? 1.0 : -1.0);
      CHECK(std::abs(step - want) <= hyper.learning_rate * 1e-4);
    }
    CHECK(state.v[k].minCoeff() >= 0.0);
  }
}

TEST_CASE("cross-entropy gradients match central differences") {
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    const auto r = criteria::gradient_check(seed);
    CHECK(r.parameters <= 200);
    CHECK(r.checked == r.parameters);
    CHECK(r.loss_rel <= 1e-3);
  }
}

TEST_CASE("gradient training rejects bad inputs") {
  const ExecutionPlan plan = compile(criteria::gradient_network());
  Rng rng = substream(34, "adam-errors");
  ModelParams p = criteria::gradient_params(plan, rng);
  std::vector<ImageD> images{ImageD::Zero(2, 2), ImageD::Zero(2, 2)};
  std::vector<int> one_label{0};
  CHECK_THROWS_AS(loss_gradients(plan, p, images, one_label, 0, 0, 0, 0), DomainError);
  std::vector<int> bad_label{0, 9};
  CHECK_THROWS_AS(loss_gradients(plan, p, images, bad_label, 0, 0, 0, 0), DomainError);
  ModelParams counts = uniform_params(plan, AccumulatorMode::kCounts);
  AdamState state;
  std::vector<int> labels{0, 1};
  CHECK_THROWS_AS(adam_step(plan, counts, state, images, labels, TrainConfig{}, 0),
                  UnsupportedError);
  const ExecutionPlan gen =
      compile(parse_structure("input shape=2x2\ngaussian_leaf k=2\ngclp kernel=2x2\nroot\n"));
  ModelParams q = uniform_params(gen, AccumulatorMode::kLog);
  CHECK_THROWS_AS(loss_gradients(gen, q, images, labels, 0, 0, 0, 0), UnsupportedError);
}

TEST_CASE("Adam separates a linearly separable two-class toy within 200 steps") {
  const ExecutionPlan plan = compile(parse_structure(
      "input shape=1x2\ngaussian_leaf k=2\ngclp kernel=1x2 channels=onehot:4\n"
      "class_sums k=2\nroot\n"));
  Rng rng = substream(35, "toy");
  std::vector<ImageD> images;
  std::vector<int> labels;
  separable_toy(rng, 64, images, labels);
  TrainConfig cfg;
  cfg.mode = TrainMode::kAdam;
  cfg.seed = 5;
  cfg.adam.learning_rate = 1e-2;
  ModelParams p = init_params(plan, images, cfg);
  AdamState state;
  int reached = -1;
  for (int step = 0; step < 200 && reached < 0; ++step) {
    adam_step(plan, p, state, images, labels, cfg, static_cast<std::uint64_t>(step));
    if (clean_accuracy(plan, p, images, labels) == 1.0) reached = step + 1;
  }
  INFO("steps to 100%: " << reached);
  CHECK(reached > 0);
}

TEST_CASE("training is reproducible for a fixed seed") {
  Rng rng = substream(36, "repro");
  const std::vector<ImageD> images = prototype_images(rng, 60, 4, 4);
  const ExecutionPlan plan = compile(parse_structure(kGenerative));
  TrainConfig cfg;
  cfg.seed = 11;
  cfg.epochs = 2;
  cfg.batch_size = 16;
  for (TrainMode mode : {TrainMode::kHardEm, TrainMode::kHardEmUsi}) {
    cfg.mode = mode;
    cfg.threads = 1;
    ModelParams a = init_params(plan, images, cfg);
    ModelParams b = init_params(plan, images, cfg);
    train(plan, a, images, {}, cfg);
    cfg.threads = 4;
    train(plan, b, images, {}, cfg);
    // Counts are integers, so the merge order cannot change them.
    for (std::size_t s = 0; s < a.sums.size(); ++s) {
      CHECK(a.sums[s].accumulators == b.sums[s].accumulators);
      CHECK(a.sums[s].log_weights == b.sums[s].log_weights);
    }
  }

  const ExecutionPlan disc = compile(criteria::gradient_network());
  std::vector<ImageD> dimages;
  std::vector<int> dlabels;
  for (int i = 0; i < 40; ++i) {
    ImageD x(2, 2);
    for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = standard_normal(rng);
    dimages.push_back(x);
    dlabels.push_back(i % 3);
  }
  cfg.mode = TrainMode::kAdam;
  cfg.threads = 3;
  ModelParams a = init_params(disc, dimages, cfg);
  ModelParams b = init_params(disc, dimages, cfg);
  train(disc, a, dimages, dlabels, cfg);
  train(disc, b, dimages, dlabels, cfg);
  for (std::size_t s = 0; s < a.sums.size(); ++s)
    CHECK(a.sums[s].accumulators == b.sums[s].accumulators);
  CHECK(a.gaussian->means == b.gaussian->means);
  CHECK(a.variance_raw == b.variance_raw);
}

TEST_CASE("progress records and the kept partial batch") {
  const ExecutionPlan plan = compile(parse_structure("input shape=1x1\ngaussian_leaf k=2\nroot\n"));
  std::vector<ImageD> images;
  for (int i = 0; i < 10; ++i) images.push_back(ImageD::Constant(1, 1, i));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  ModelParams p = init_params(plan, images, cfg);
  std::vector<ProgressRecord> log;
  train(plan, p, images, {}, cfg, [&](const ProgressRecord& r) { log.push_back(r); });
  int ll = 0;
  for (const auto& r : log) ll += r.metric == "loglik";
  CHECK(ll == 6);
  CHECK(log.back().epoch == 2);
  CHECK(log.back().batch == 2);
  CHECK(log.back().metric == "wall_time");
  // 20 sample visits, one root count each, on top of the initial draws.
  Rng init = substream(cfg.seed, "init");
  CHECK(p.sums[0].accumulators.sum() == doctest::Approx(20.0 + uniform01(init) + uniform01(init)));
}

TEST_CASE("hard EM raises the training log-likelihood") {
  Rng rng = substream(37, "ll-increase");
  for (int d = 0; d < 3; ++d) {
    const std::vector<ImageD> images = prototype_images(rng, 200, 4, 4);
    const ExecutionPlan plan = compile(parse_structure(kGenerative));
    for (TrainMode mode : {TrainMode::kHardEm, TrainMode::kHardEmUsi}) {
      TrainConfig cfg;
      cfg.mode = mode;
      cfg.seed = static_cast<std::uint64_t>(d);
      cfg.epochs = 15;
      cfg.batch_size = 32;
      ModelParams p = init_params(plan, images, cfg);
      const double before = mean_ll(plan, p, images);
      train(plan, p, images, {}, cfg);
      const double after = mean_ll(plan, p, images);
      INFO(to_string(mode) << " " << before << " -> " << after);
      CHECK(after > before);
    }
  }
}

}  // TEST_SUITE
