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

/**
 * \file train.hpp
 * \brief Cross-entropy training with step-decayed learning rate, validation
 * model selection, evaluation and fused-feature export.
 */
#pragma once

#include "amtfnet/data.hpp"
#include "amtfnet/metrics.hpp"
#include "amtfnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <thread>

namespace amtfnet {

/// Training diverged: NaN/inf loss or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OptimizerKind { kAdam, kSgdMomentum };

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 512;
  double initial_lr = 0.01;
  double decay_factor = 0.3;
  std::size_t decay_every = 3;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t eval_batch_size = 1024;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
    if (eval_batch_size == 0) throw ConfigError("train.eval_batch_size must be >= 1");
    if (!(initial_lr > 0)) throw ConfigError("train.initial_lr must be > 0");
    if (!(decay_factor > 0)) throw ConfigError("train.decay_factor must be > 0");
    if (decay_every == 0) throw ConfigError("train.decay_every must be >= 1");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train.momentum must be in [0, 1)");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw ConfigError("train.beta1/beta2 must be in [0, 1)");
    if (!(adam_eps > 0)) throw ConfigError("train.adam_eps must be > 0");
  }

  Json to_json() const {
    return Json{{"epochs", epochs},
                {"batch_size", batch_size},
                {"initial_lr", initial_lr},
                {"decay_factor", decay_factor},
                {"decay_every", decay_every},
                {"optimizer", optimizer == OptimizerKind::kAdam ? "adam" : "sgd_momentum"},
                {"momentum", momentum},
                {"beta1", beta1},
                {"beta2", beta2},
                {"adam_eps", adam_eps},
                {"eval_batch_size", eval_batch_size}};
  }

  static TrainConfig from_json(const Json& j, const std::string& where = "train") {
    return from_json(j, TrainConfig(), where);
  }

  static TrainConfig from_json(const Json& j, TrainConfig c, const std::string& where) {
    json_util::reject_unknown(j, {"epochs", "batch_size", "initial_lr", "decay_factor",
                                  "decay_every", "optimizer", "momentum", "beta1", "beta2",
                                  "adam_eps", "eval_batch_size"},
                              where);
    json_util::read(j, "epochs", c.epochs, where);
    json_util::read(j, "batch_size", c.batch_size, where);
    json_util::read(j, "initial_lr", c.initial_lr, where);
    json_util::read(j, "decay_factor", c.decay_factor, where);
    json_util::read(j, "decay_every", c.decay_every, where);
    json_util::read(j, "momentum", c.momentum, where);
    json_util::read(j, "beta1", c.beta1, where);
    json_util::read(j, "beta2", c.beta2, where);
    json_util::read(j, "adam_eps", c.adam_eps, where);
    json_util::read(j, "eval_batch_size", c.eval_batch_size, where);
    std::string opt = c.optimizer == OptimizerKind::kAdam ? "adam" : "sgd_momentum";
    json_util::read(j, "optimizer", opt, where);
    if (opt == "adam")
      c.optimizer = OptimizerKind::kAdam;
    else if (opt == "sgd_momentum")
      c.optimizer = OptimizerKind::kSgdMomentum;
    else
      throw ConfigError(where + ".optimizer: expected \"adam\" or \"sgd_momentum\", got \"" + opt + "\"");
    return c;
  }
};

/// initial_lr * decay_factor ^ floor(epoch / decay_every)
inline double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  return cfg.initial_lr * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

inline constexpr double kLogClamp = 1e-12;

/// Summed cross-entropy -sum_k log(max(p[k, y_k], 1e-12)) over a batch of
/// probability rows ([L] or [B x L]). The clamp has zero gradient.
inline Tensor cross_entropy(const Tensor& probs, const std::vector<std::size_t>& labels) {
  const bool batched = probs.rank() == 2;
  if (probs.rank() != 1 && !batched) throw ShapeError("cross_entropy: probs must be [L] or [B x L]");
  const std::size_t B = batched ? probs.dim(0) : 1, L = probs.dim(probs.rank() - 1);
  if (labels.size() != B)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(B) + " rows");
  for (auto y : labels)
    if (y >= L)
      throw std::out_of_range("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                              std::to_string(L) + ")");
  auto p = probs.data();
  double total = 0.0;
  for (std::size_t k = 0; k < B; ++k) total -= std::log(std::max(p[k * L + labels[k]], kLogClamp));
  Tensor out = Tensor::scalar(total);
  record_op({probs}, out, [probs, labels, B, L](std::span<const double> g) {
    auto gp = grad_sink(probs);
    auto pv = probs.data();
    for (std::size_t k = 0; k < B; ++k) {
      const double pk = pv[k * L + labels[k]];
      if (pk > kLogClamp) gp[k * L + labels[k]] -= g[0] / pk;
    }
  });
  return out;
}

struct OptimizerState {
  std::map<std::string, std::vector<double>> first, second;
  std::size_t steps = 0;
};

/// Applies one update from the gradients held by `params`, then clears them.
/// A parameter without a gradient is treated as having a zero gradient.
inline void optimizer_step(LayerParams& params, OptimizerState& state, double lr,
                           const TrainConfig& cfg) {
  for (const auto& [name, t] : params)
    for (double g : t.grad())
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + name);
  ++state.steps;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.steps));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.steps));
  for (auto& [name, t] : params) {
    auto p = t.mutable_data();
    auto g = t.grad();
    auto& m = state.first[name];
    if (m.empty()) m.assign(p.size(), 0.0);
    auto grad_at = [&](std::size_t i) { return g.empty() ? 0.0 : g[i]; };
    if (cfg.optimizer == OptimizerKind::kAdam) {
      auto& v = state.second[name];
      if (v.empty()) v.assign(p.size(), 0.0);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = grad_at(i);
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
      }
    } else {
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg.momentum * m[i] - lr * grad_at(i);
        p[i] += m[i];
      }
    }
    t.zero_grad();
  }
}

inline LayerParams clone_params(const LayerParams& params) {
  LayerParams out;
  for (const auto& [name, t] : params) out.emplace(name, t.clone(true));
  return out;
}

namespace detail {

inline std::size_t eval_threads() {
  if (const char* env = std::getenv("AMTFNET_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return 1;
}

// Runs fn(begin, end) over [0, n) in chunks of `chunk`, spread over
// AMTFNET_THREADS workers. Every chunk writes only its own outputs, so the
// result does not depend on the thread count.
inline void parallel_chunks(std::size_t n, std::size_t chunk,
                            const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t chunks = (n + chunk - 1) / chunk;
  const std::size_t workers = std::min(eval_threads(), std::max<std::size_t>(chunks, 1));
  auto run = [&](std::size_t first_chunk) {
    for (std::size_t c = first_chunk; c < chunks; c += workers)
      fn(c * chunk, std::min(n, (c + 1) * chunk));
  };
  if (workers <= 1) {
    run(0);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t k = 0; k < workers; ++k)
    pool.emplace_back([&, k] {
      try {
        run(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::vector<std::size_t> iota(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

}  // namespace detail

/// Argmax class per window, evaluated without dropout or tape.
inline std::vector<std::size_t> predict(const Model& model, const WindowedDataset& ds,
                                        std::size_t batch_size = 1024) {
  std::vector<std::size_t> pred(ds.size());
  detail::parallel_chunks(ds.size(), batch_size, [&](std::size_t b, std::size_t e) {
    NoGradGuard no_grad;
    Rng unused(0);
    Tensor p = forward(ds.batch(detail::iota(b, e)), model, false, unused);
    const std::size_t L = p.dim(1);
    auto pv = p.data();
    for (std::size_t k = 0; k < e - b; ++k) {
      auto row = pv.subspan(k * L, L);
      pred[b + k] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
  });
  return pred;
}

inline EvalReport evaluate(const Model& model, const WindowedDataset& ds,
                           std::size_t batch_size = 1024) {
  if (ds.empty()) throw DataError("evaluate: dataset is empty");
  const auto pred = predict(model, ds, batch_size);
  ConfusionMatrix cm(model.config.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.label(i) >= model.config.num_classes)
      throw DataError("evaluate: label " + std::to_string(ds.label(i)) + " outside the model's " +
                      std::to_string(model.config.num_classes) + " classes");
    cm.add(ds.label(i), pred[i]);
  }
  return compute_metrics(cm);
}

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double mean_loss = 0.0;  // summed batch losses / training samples
  double val_micro_f1 = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_micro_f1 = -1.0;
  LayerParams best_params;

  Json to_json() const {
    Json traj = Json::array();
    for (const auto& e : epochs)
      traj.push_back({{"epoch", e.epoch},
                      {"lr", e.lr},
                      {"mean_loss", e.mean_loss},
                      {"val_micro_f1", e.val_micro_f1}});
    return Json{{"best_epoch", best_epoch},
                {"best_val_micro_f1", best_val_micro_f1},
                {"epochs", traj}};
  }
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded mini-batch training. Batches are drawn without replacement from a
/// fresh permutation each epoch; the last partial batch is kept. The model
/// ends holding the parameters of the epoch with the best validation
/// Micro-F1, the latest such epoch on ties.
inline TrainReport train(Model& model, const WindowedDataset& train_set,
                         const WindowedDataset& val_set, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (train_set.empty()) throw DataError("train: training set is empty");
  if (val_set.empty()) throw DataError("train: validation set is empty");
  check_params(model);
  for (auto& [name, t] : model.params) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));
  OptimizerState state;
  TrainReport report;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, cfg);
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(b),
                                         order.begin() + static_cast<long>(std::min(order.size(), b + cfg.batch_size)));
      GradTape tape;
      Tensor probs = forward(train_set.batch(idx), model, true, dropout_rng);
      Tensor loss = cross_entropy(probs, train_set.labels(idx));
      if (!std::isfinite(loss.item()))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b / cfg.batch_size));
      tape.backward(loss);
      optimizer_step(model.params, state, lr, cfg);
      loss_sum += loss.item();
    }
    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(order.size()),
                    evaluate(model, val_set, cfg.eval_batch_size).micro_f1};
    report.epochs.push_back(rec);
    if (rec.val_micro_f1 >= report.best_val_micro_f1) {
      report.best_val_micro_f1 = rec.val_micro_f1;
      report.best_epoch = epoch;
      report.best_params = clone_params(model.params);
    }
    if (on_epoch) on_epoch(rec);
  }
  model.params = clone_params(report.best_params);
  return report;
}

/// One CSV row per window: the fused feature f, the label and, when the
/// data carries them, the mode tag.
inline void export_features(const Model& model, const WindowedDataset& ds, std::ostream& out,
                            std::size_t batch_size = 1024) {
  if (ds.empty()) throw DataError("export_features: dataset is empty");
  std::vector<std::vector<double>> rows(ds.size());
  detail::parallel_chunks(ds.size(), batch_size, [&](std::size_t b, std::size_t e) {
    NoGradGuard no_grad;
    Tensor f = fused_feature(ds.batch(detail::iota(b, e)), model);
    const std::size_t width = f.dim(1);
    for (std::size_t k = 0; k < e - b; ++k)
      rows[b + k].assign(f.data().begin() + static_cast<long>(k * width),
                         f.data().begin() + static_cast<long>((k + 1) * width));
  });
  const std::size_t width = rows.front().size();
  for (std::size_t j = 0; j < width; ++j) out << 'f' << j << ',';
  out << "label" << (ds.has_modes() ? ",mode" : "") << '\n';
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double x : rows[i]) out << detail::format_double(x) << ',';
    out << ds.label(i);
    if (ds.has_modes()) out << ',' << ds.mode(i);
    out << '\n';
  }
}

inline void export_features(const Model& model, const WindowedDataset& ds, const std::string& path,
                            std::size_t batch_size = 1024) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  export_features(model, ds, out, batch_size);
  if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace amtfnet
