/*
 * Copyright 2026 The AMTFNet Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "amtfnet/checkpoint.hpp"
#include "amtfnet/grad_check.hpp"
#include "amtfnet/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace amtfnet;

namespace {

void set_grad(Tensor& t, const std::vector<double>& g) {
  t.set_requires_grad(true);
  auto sink = grad_sink(t);
  std::copy(g.begin(), g.end(), sink.begin());
}

// Two classes: the sign of the first variable's level separates them.
WindowedDataset toy_dataset(std::size_t rows_per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RawSeries> runs;
  for (std::size_t label = 0; label < 2; ++label) {
    RawSeries s;
    s.names = {"a", "b"};
    const double level = label == 0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < rows_per_class; ++r) {
      s.values.push_back(level + 0.3 * rng.normal());
      s.values.push_back(0.3 * rng.normal());
      s.labels.push_back(label);
    }
    runs.push_back(s);
  }
  return slide_windows(runs, 8);
}

ModelConfig toy_config() {
  ModelConfig c;
  c.v = 2;
  c.w = 8;
  c.kernel_sizes = {3, 5, 7};
  c.hidden = 6;
  c.num_classes = 2;
  c.dropout_rate = 0.1;
  return c;
}

TrainConfig fast_train(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 16;
  t.seed = 3;
  return t;
}

double eval_mean_loss(const Model& model, const WindowedDataset& ds) {
  NoGradGuard no_grad;
  Rng unused(0);
  std::vector<std::size_t> all(ds.size());
  std::iota(all.begin(), all.end(), 0);
  return cross_entropy(forward(ds.batch(all), model, false, unused), ds.labels(all)).item() /
         static_cast<double>(ds.size());
}

}  // namespace

TEST(LrSchedule, Examples) {
  const TrainConfig cfg;
  EXPECT_EQ(lr_schedule(0, cfg), 0.01);
  EXPECT_NEAR(lr_schedule(3, cfg), 0.003, 1e-18);
  EXPECT_NEAR(lr_schedule(7, cfg), 0.0009, 1e-18);
  for (std::size_t e = 0; e < 30; ++e) {
    EXPECT_EQ(lr_schedule(e, cfg), 0.01 * std::pow(0.3, static_cast<double>(e / 3)));
    if (e) {
      EXPECT_LE(lr_schedule(e, cfg), lr_schedule(e - 1, cfg));
    }
  }
}

TEST(TrainConfig, DefaultsAndStrictJson) {
  const TrainConfig d;
  EXPECT_EQ(d.epochs, 30u);
  EXPECT_EQ(d.batch_size, 512u);
  EXPECT_EQ(d.initial_lr, 0.01);
  EXPECT_EQ(d.decay_factor, 0.3);
  EXPECT_EQ(d.decay_every, 3u);
  EXPECT_EQ(d.optimizer, OptimizerKind::kAdam);
  const auto back = TrainConfig::from_json(d.to_json());
  EXPECT_EQ(back.to_json(), d.to_json());
  EXPECT_THROW(TrainConfig::from_json(Json{{"epoch", 3}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json(Json{{"optimizer", "rmsprop"}}), ConfigError);
  EXPECT_THROW(TrainConfig::from_json(Json{{"batch_size", 0}}).validate(), ConfigError);
}

TEST(CrossEntropy, Examples) {
  const Tensor perfect = Tensor::matrix({{1.0, 0.0, 0.0}, {0.0, 0.0, 1.0}});
  EXPECT_EQ(cross_entropy(perfect, {0, 2}).item(), 0.0);
  for (std::size_t L : {2u, 3u, 7u}) {
    const std::size_t B = 5;
    const Tensor uniform = Tensor::full({B, L}, 1.0 / static_cast<double>(L));
    EXPECT_NEAR(cross_entropy(uniform, std::vector<std::size_t>(B, 1)).item(),
                static_cast<double>(B) * std::log(static_cast<double>(L)), 1e-12);
  }
  EXPECT_THROW(cross_entropy(perfect, {0, 3}), std::out_of_range);
  EXPECT_THROW(cross_entropy(perfect, {0}), ShapeError);
}

TEST(CrossEntropy, ClampedAndNonNegative) {
  const Tensor wrong = Tensor::matrix({{1.0, 0.0}});
  EXPECT_NEAR(cross_entropy(wrong, {1}).item(), -std::log(1e-12), 1e-9);
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(12);
    for (auto& x : z) x = rng.normal() * 3.0;
    const Tensor p = softmax(Tensor({3, 4}, z), 1);
    std::vector<std::size_t> y{0, 1, 3};
    EXPECT_GT(cross_entropy(p, y).item(), 0.0);
  }
}

TEST(CrossEntropy, GradientThroughSoftmaxIsProbsMinusOneHot) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t B = 4, L = 5;
    std::vector<double> z(B * L);
    for (auto& x : z) x = rng.normal() * 2.0;
    Tensor logits({B, L}, z, true);
    std::vector<std::size_t> y(B);
    for (auto& l : y) l = static_cast<std::size_t>(rng.uniform(0.0, static_cast<double>(L)));
    GradTape tape;
    Tensor p = softmax(logits, 1);
    tape.backward(cross_entropy(p, y));
    for (std::size_t k = 0; k < B; ++k)
      for (std::size_t l = 0; l < L; ++l)
        EXPECT_NEAR(logits.grad()[k * L + l], p.at(k, l) - (l == y[k] ? 1.0 : 0.0), 1e-10);
  }
}

TEST(CrossEntropy, EndToEndTinyModelGradCheck) {
  ModelConfig cfg;
  cfg.v = 3;
  cfg.w = 8;
  cfg.kernel_sizes = {3, 5, 7};  // kernels may not exceed the window
  cfg.hidden = 5;
  cfg.num_classes = 3;
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    Model model = make_model(cfg, seed);
    Rng rng(seed + 100);
    // Random biases move the point off the exact ReLU kinks that zero-initialised biases create.
    for (auto& [name, t] : model.params)
      if (name.ends_with("bias"))
        for (auto& b : t.mutable_data()) b = rng.uniform(-0.2, 0.2);
    std::vector<double> xv(2 * cfg.v * cfg.w);
    for (auto& x : xv) x = rng.normal();
    const Tensor x({2, cfg.v, cfg.w}, xv);
    const std::vector<std::size_t> y{0, 2};
    std::vector<Tensor> inputs;
    for (auto& [name, t] : model.params) inputs.push_back(t);
    auto f = [&](const std::vector<Tensor>&) {
      Rng unused(0);
      return cross_entropy(forward(x, model, false, unused), y);
    };
    const auto rep = grad_check(f, inputs, 1e-5, 1e-3);
    EXPECT_TRUE(rep.passed) << "seed " << seed << " max rel error " << rep.max_rel_error << " at input " << rep.worst_input << "[" << rep.worst_index << "] analytic " << rep.worst_analytic << " numeric " << rep.worst_numeric;
  }
}

TEST(Optimizer, ZeroGradientLeavesParametersUnchanged) {
  for (auto kind : {OptimizerKind::kAdam, OptimizerKind::kSgdMomentum}) {
    TrainConfig cfg;
    cfg.optimizer = kind;
    LayerParams params{{"w", Tensor({3}, {1.0, -2.0, 3.0}, true)}};
    set_grad(params.at("w"), {0.0, 0.0, 0.0});
    OptimizerState state;
    optimizer_step(params, state, 0.01, cfg);
    EXPECT_EQ(std::vector<double>(params.at("w").data().begin(), params.at("w").data().end()),
              (std::vector<double>{1.0, -2.0, 3.0}));
    EXPECT_FALSE(params.at("w").has_grad());
  }
}

TEST(Optimizer, SgdFirstStep) {
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::kSgdMomentum;
  LayerParams params{{"p", Tensor({1}, {0.5}, true)}};
  set_grad(params.at("p"), {1.0});
  OptimizerState state;
  optimizer_step(params, state, 0.01, cfg);
  EXPECT_DOUBLE_EQ(params.at("p")[0], 0.49);
  set_grad(params.at("p"), {1.0});
  optimizer_step(params, state, 0.01, cfg);  // v = 0.9 * -0.01 - 0.01
  EXPECT_NEAR(params.at("p")[0], 0.49 - 0.019, 1e-15);
}

TEST(Optimizer, AdamMatchesReferenceUpdate) {
  TrainConfig cfg;
  LayerParams params{{"p", Tensor({1}, {0.0}, true)}};
  set_grad(params.at("p"), {1.0});
  OptimizerState state;
  optimizer_step(params, state, 0.01, cfg);
  EXPECT_NEAR(params.at("p")[0], -0.01 / (1.0 + 1e-8), 1e-12);

  // Several steps with varying gradients against a hand-rolled loop.
  LayerParams multi{{"q", Tensor({2}, {0.3, -0.7}, true)}};
  OptimizerState st;
  double ref[2] = {0.3, -0.7}, m[2] = {0, 0}, v[2] = {0, 0};
  const double grads[4][2] = {{0.5, -1.0}, {0.1, 2.0}, {-0.3, 0.0}, {1.5, -0.2}};
  for (int step = 0; step < 4; ++step) {
    set_grad(multi.at("q"), {grads[step][0], grads[step][1]});
    const double lr = 0.01 * (step + 1);
    optimizer_step(multi, st, lr, cfg);
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * grads[step][i];
      v[i] = 0.999 * v[i] + 0.001 * grads[step][i] * grads[step][i];
      const double mh = m[i] / (1 - std::pow(0.9, step + 1));
      const double vh = v[i] / (1 - std::pow(0.999, step + 1));
      ref[i] -= lr * mh / (std::sqrt(vh) + 1e-8);
      EXPECT_NEAR(multi.at("q")[i], ref[i], 1e-12);
    }
  }
}

TEST(Optimizer, NonFiniteGradientAborts) {
  TrainConfig cfg;
  LayerParams params{{"p", Tensor({2}, {1.0, 2.0}, true)}};
  set_grad(params.at("p"), {0.0, std::nan("")});
  OptimizerState state;
  EXPECT_THROW(optimizer_step(params, state, 0.01, cfg), NumericError);
  EXPECT_EQ(params.at("p")[0], 1.0);
}

TEST(Train, ToySeparableSetConverges) {
  const auto ds = toy_dataset(120, 1);
  const auto split = stratified_split(ds, {});
  Model model = make_model(toy_config(), 7);
  const auto report = train(model, split.train, split.val, fast_train(30));
  ASSERT_EQ(report.epochs.size(), 30u);
  double lowest = INFINITY;
  for (const auto& e : report.epochs) lowest = std::min(lowest, e.mean_loss);
  EXPECT_LT(lowest, 0.05);
  EXPECT_LT(eval_mean_loss(model, split.train), 0.05);
  EXPECT_EQ(evaluate(model, split.test).micro_f1, 1.0);
}

TEST(Train, DeterministicAndSelectsBestEpoch) {
  const auto ds = toy_dataset(60, 2);
  const auto split = stratified_split(ds, {});
  Model a = make_model(toy_config(), 11), b = make_model(toy_config(), 11);
  const auto ra = train(a, split.train, split.val, fast_train(4));
  const auto rb = train(b, split.train, split.val, fast_train(4));
  EXPECT_EQ(ra.to_json().dump(), rb.to_json().dump());
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));

  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& e : ra.epochs) {
    EXPECT_EQ(e.lr, lr_schedule(e.epoch, fast_train(4)));
    if (e.val_micro_f1 >= best) {
      best = e.val_micro_f1;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(ra.best_val_micro_f1, best);
  EXPECT_EQ(ra.best_epoch, best_epoch);
  EXPECT_GE(ra.best_val_micro_f1, ra.epochs.back().val_micro_f1);
  EXPECT_EQ(evaluate(a, split.val).micro_f1, ra.best_val_micro_f1);
}

TEST(Train, SgdMomentumAlsoLearns) {
  const auto ds = toy_dataset(120, 1);
  const auto split = stratified_split(ds, {});
  Model model = make_model(toy_config(), 7);
  auto cfg = fast_train(10);
  cfg.optimizer = OptimizerKind::kSgdMomentum;
  train(model, split.train, split.val, cfg);
  EXPECT_GT(evaluate(model, split.test).micro_f1, 0.9);
}

TEST(Train, RejectsEmptyTrainingSet) {
  const auto ds = toy_dataset(40, 2);
  Model model = make_model(toy_config(), 1);
  EXPECT_THROW(train(model, ds.subset({}), ds, fast_train(1)), DataError);
}

TEST(Train, DivergenceRaisesNumericError) {
  const auto ds = toy_dataset(40, 2);
  Model model = make_model(toy_config(), 1);
  for (auto& x : model.params.at("fc1.weight").mutable_data()) x = std::nan("");
  EXPECT_THROW(train(model, ds, ds, fast_train(1)), NumericError);
}

TEST(Evaluate, ThreadCountDoesNotChangeResults) {
  const auto ds = toy_dataset(50, 6);
  const Model model = make_model(toy_config(), 2);
  const auto one = predict(model, ds, 7);
  setenv("AMTFNET_THREADS", "3", 1);
  const auto three = predict(model, ds, 7);
  unsetenv("AMTFNET_THREADS");
  EXPECT_EQ(one, three);
  const auto rep = evaluate(model, ds);
  EXPECT_EQ(rep.confusion.total(), ds.size());
  EXPECT_THROW(evaluate(model, ds.subset({})), DataError);
}

TEST(ExportFeatures, ShapeAndDeterminism) {
  Rng rng(1);
  std::vector<RawSeries> runs(1);
  runs[0].names = {"a", "b"};
  for (std::size_t r = 0; r < 30; ++r) {
    runs[0].values.push_back(rng.normal());
    runs[0].values.push_back(rng.normal());
    runs[0].labels.push_back(r % 2);
    runs[0].modes.push_back(r % 3);
  }
  const auto ds = slide_windows(runs, 8);
  const Model model = make_model(toy_config(), 3);
  std::ostringstream a, b;
  export_features(model, ds, a, 5);
  export_features(model, ds, b, 5);
  EXPECT_EQ(a.str(), b.str());
  std::istringstream in(a.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "f0,f1,f2,f3,f4,f5,label,mode");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
    ++rows;
  }
  EXPECT_EQ(rows, ds.size());
}
