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
 * \file model.hpp
 * \brief AMTFNet: multiscale depthwise convolution + GRU feature extractor,
 * temporal-attention fusion and a softmax classifier, plus the ablation
 * variants A1-A6.
 *
 * Variant map (MSDC / GRU / fusion):
 *   A1  yes / no  / none   temporal mean of the MSDC map (auto readout)
 *   A2  no  / yes / none   last hidden state (auto readout)
 *   A3  yes / no  / TAM
 *   A4  no  / yes / TAM
 *   A5  yes / yes / none   as A2
 *   A6  yes / yes / SE block
 *   FULL yes / yes / TAM
 *
 * Variants without fusion read out either the last time column or the
 * temporal mean. "auto" picks the last column when there is a GRU and the
 * mean otherwise.
 *
 * Every function accepts a single window [v x w] or a batch [B x v x w].
 */
#pragma once

#include "amtfnet/layers.hpp"
#include "amtfnet/random.hpp"
#include "amtfnet/tensor.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace amtfnet {

enum class Variant { kA1, kA2, kA3, kA4, kA5, kA6, kFull };
enum class Fusion { kNone, kTemporalAttention, kSqueezeExcitation };
enum class Readout { kAuto, kLast, kMean };  // feature of the variants without fusion

struct VariantTraits {
  bool msdc;
  bool gru;
  Fusion fusion;
};

inline constexpr std::array<Variant, 7> kAllVariants{Variant::kA1, Variant::kA2, Variant::kA3,
                                                     Variant::kA4, Variant::kA5, Variant::kA6,
                                                     Variant::kFull};

constexpr VariantTraits traits(Variant v) {
  switch (v) {
    case Variant::kA1: return {true, false, Fusion::kNone};
    case Variant::kA2: return {false, true, Fusion::kNone};
    case Variant::kA3: return {true, false, Fusion::kTemporalAttention};
    case Variant::kA4: return {false, true, Fusion::kTemporalAttention};
    case Variant::kA5: return {true, true, Fusion::kNone};
    case Variant::kA6: return {true, true, Fusion::kSqueezeExcitation};
    case Variant::kFull: return {true, true, Fusion::kTemporalAttention};
  }
  return {true, true, Fusion::kTemporalAttention};
}

inline std::string readout_name(Readout r) {
  return r == Readout::kLast ? "last" : r == Readout::kMean ? "mean" : "auto";
}

inline std::string variant_name(Variant v) {
  static constexpr std::array<const char*, 7> names{"A1", "A2", "A3", "A4", "A5", "A6", "FULL"};
  return names[static_cast<std::size_t>(v)];
}

inline Variant parse_variant(std::string_view s) {
  for (auto v : kAllVariants)
    if (variant_name(v) == s) return v;
  throw std::invalid_argument("unknown model variant '" + std::string(s) +
                              "' (expected A1..A6 or FULL)");
}

struct ModelConfig {
  std::size_t v = 0;   // input variables
  std::size_t w = 64;  // window length
  std::vector<std::size_t> kernel_sizes{3, 5, 7, 9};
  std::size_t hidden = 100;
  std::size_t num_classes = 2;
  std::size_t reduction = 4;
  double dropout_rate = 0.5;
  double norm_eps = 1e-5;
  Variant variant = Variant::kFull;
  Readout readout = Readout::kAuto;

  /// Width of the attention bottleneck, ceil(w / reduction).
  std::size_t reduced_width() const { return (w + reduction - 1) / reduction; }
  std::size_t msdc_channels() const { return kernel_sizes.size() * v; }
  std::size_t gru_input() const { return traits(variant).msdc ? msdc_channels() : v; }
  /// Height of the feature map handed to fusion, which is also the classifier input width.
  std::size_t feature_height() const { return traits(variant).gru ? hidden : msdc_channels(); }

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
    if (v == 0) fail("v must be >= 1");
    if (w == 0) fail("w must be >= 1");
    if (hidden == 0) fail("hidden must be >= 1");
    if (num_classes < 2) fail("num_classes must be >= 2");
    if (reduction == 0) fail("reduction must be >= 1");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must be in [0, 1)");
    if (!(norm_eps > 0.0)) fail("norm_eps must be > 0");
    if (traits(variant).msdc) {
      if (kernel_sizes.empty()) fail("kernel_sizes must not be empty");
      for (auto n : kernel_sizes)
        if (n % 2 == 0 || n > w)
          fail("kernel size " + std::to_string(n) + " must be odd and <= w");
    }
  }
};

struct Model {
  ModelConfig config;
  LayerParams params;

  const Tensor& param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("model has no parameter '" + name + "'");
    return it->second;
  }
};

/// Every parameter tensor the variant owns, in initialisation order.
inline std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  const auto tr = traits(cfg.variant);
  std::vector<ParamSpec> specs;
  const std::size_t v = cfg.v, H = cfg.hidden, w = cfg.w, red = cfg.reduced_width();
  if (tr.msdc) {
    for (auto n : cfg.kernel_sizes) {
      const std::string p = "dc" + std::to_string(n);
      specs.push_back({p + ".kernel", {v, n}, n, false});
      specs.push_back({p + ".bias", {v}, n, true});
    }
  }
  if (tr.gru) {
    const std::size_t d = cfg.gru_input();
    for (const char* m : {"W_r", "W_z", "W"}) specs.push_back({std::string("gru.") + m, {H, d}, d, false});
    for (const char* m : {"U_r", "U_z", "U"}) specs.push_back({std::string("gru.") + m, {H, H}, H, false});
    for (const char* m : {"b_r", "b_z", "b_h"}) specs.push_back({std::string("gru.") + m, {H}, H, true});
  }
  auto fc = [&](const std::string& name, std::size_t in, std::size_t out) {
    specs.push_back({name + ".weight", {out, in}, in, false});
    specs.push_back({name + ".bias", {out}, in, true});
  };
  if (tr.fusion == Fusion::kTemporalAttention) {
    fc("fc1", w, red);
    fc("fc2", red, w);
    fc("fc3", w, red);
    fc("fc4", red, w);
    specs.push_back({"fuser.kernel", {1, 2, 3}, 6, false});
    specs.push_back({"fuser.bias", {1}, 6, true});
  } else if (tr.fusion == Fusion::kSqueezeExcitation) {
    fc("se.fc_a", w, red);
    fc("se.fc_b", red, w);
  }
  fc("classifier", cfg.feature_height(), cfg.num_classes);
  return specs;
}

/// Closed-form parameter total for a configuration.
inline std::size_t count_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const auto tr = traits(cfg.variant);
  const std::size_t v = cfg.v, H = cfg.hidden, w = cfg.w, red = cfg.reduced_width();
  std::size_t total = 0;
  if (tr.msdc)
    for (auto n : cfg.kernel_sizes) total += v * n + v;
  if (tr.gru) total += 3 * (H * cfg.gru_input() + H * H + H);
  const std::size_t bottleneck = (w * red + red) + (red * w + w);
  if (tr.fusion == Fusion::kTemporalAttention) total += 2 * bottleneck + (2 * 3 + 1);
  if (tr.fusion == Fusion::kSqueezeExcitation) total += bottleneck;
  total += cfg.num_classes * cfg.feature_height() + cfg.num_classes;
  return total;
}

/// Sum of the element counts of the tensors a constructed model actually holds.
inline std::size_t enumerate_parameters(const Model& model) {
  std::size_t total = 0;
  for (const auto& [name, t] : model.params) total += t.size();
  return total;
}

/// Throws unless `model.params` holds exactly the tensors of its layout.
inline void check_params(const Model& model) {
  const auto specs = parameter_layout(model.config);
  if (specs.size() != model.params.size())
    throw ShapeError("model holds " + std::to_string(model.params.size()) +
                     " parameter tensors, configuration needs " + std::to_string(specs.size()));
  for (const auto& s : specs) {
    auto it = model.params.find(s.name);
    if (it == model.params.end()) throw ShapeError("missing parameter " + s.name);
    if (it->second.shape() != s.shape)
      throw ShapeError("parameter " + s.name + " has shape " + to_string(it->second.shape()) +
                       ", expected " + to_string(s.shape));
  }
}

inline Model make_model(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return Model{cfg, init_params(parameter_layout(cfg), rng)};
}

namespace detail {

inline std::size_t time_axis(const Tensor& t) { return t.rank() - 1; }
inline std::size_t feature_axis(const Tensor& t) { return t.rank() - 2; }

inline void check_input(const Tensor& x, const ModelConfig& cfg) {
  const bool ok = (x.rank() == 2 || x.rank() == 3) && x.dim(x.rank() - 2) == cfg.v &&
                  x.dim(x.rank() - 1) == cfg.w;
  if (!ok)
    throw ShapeError("model input " + to_string(x.shape()) + " does not match v=" +
                     std::to_string(cfg.v) + ", w=" + std::to_string(cfg.w));
}

// Stacks two length-w maps ([w] or [B x w]) into a 2-channel sequence.
inline Tensor stack_channels(const Tensor& p1, const Tensor& p2) {
  if (p1.rank() == 1)
    return concat({reshape(p1, {1, p1.dim(0)}), reshape(p2, {1, p2.dim(0)})}, 0);
  const std::size_t B = p1.dim(0), w = p1.dim(1);
  return concat({reshape(p1, {B, 1, w}), reshape(p2, {B, 1, w})}, 1);
}

// Drops the singleton channel of a [1 x w] / [B x 1 x w] map.
inline Tensor squeeze_channel(const Tensor& a) {
  if (a.rank() == 2) return reshape(a, {a.dim(1)});
  return reshape(a, {a.dim(0), a.dim(2)});
}

}  // namespace detail

/// relu(instance_norm(DC_n(x))) for each kernel size, concatenated on the
/// channel axis: [v x w] -> [|K|v x w].
inline Tensor msdc(const Tensor& x, const Model& model) {
  const auto& cfg = model.config;
  std::vector<Tensor> branches;
  for (auto n : cfg.kernel_sizes) {
    const std::string p = "dc" + std::to_string(n);
    branches.push_back(relu(instance_norm(
        depthwise_conv1d(x, model.param(p + ".kernel"), model.param(p + ".bias")), cfg.norm_eps)));
  }
  return concat(branches, detail::feature_axis(x));
}

struct Features {
  Tensor b;  // MSDC output, undefined without MSDC
  Tensor h;  // GRU trajectory, undefined without GRU

  /// Map handed to fusion / pooling: h when the variant has a GRU, else b.
  const Tensor& map() const { return h.defined() ? h : b; }
};

inline Features feature_extract(const Tensor& x, const Model& model) {
  const auto& cfg = model.config;
  detail::check_input(x, cfg);
  const auto tr = traits(cfg.variant);
  Features f;
  if (tr.msdc) f.b = msdc(x, model);
  if (tr.gru) f.h = gru_sequence(tr.msdc ? f.b : x, GruWeights::from(model.params));
  return f;
}

/// Attention map over time: ReLU(Conv([FC2(ReLU(FC1(mean))); FC4(ReLU(FC3(std)))])),
/// where mean and population std are taken over the feature axis. Output is
/// [w] (or [B x w]) and non-negative.
inline Tensor temporal_attention(const Tensor& h, const Model& model) {
  const std::size_t fa = detail::feature_axis(h);
  if (h.dim(fa + 1) != model.config.w)
    throw ShapeError("temporal_attention: feature map " + to_string(h.shape()) +
                     " does not have w=" + std::to_string(model.config.w));
  auto p = [&](const char* n) -> const Tensor& { return model.param(n); };
  Tensor q1 = mean(h, fa);
  Tensor q2 = std_dev(h, fa);
  Tensor p1 = linear(relu(linear(q1, p("fc1.weight"), p("fc1.bias"))), p("fc2.weight"), p("fc2.bias"));
  Tensor p2 = linear(relu(linear(q2, p("fc3.weight"), p("fc3.bias"))), p("fc4.weight"), p("fc4.bias"));
  Tensor a = relu(conv1d(detail::stack_channels(p1, p2), p("fuser.kernel"), p("fuser.bias")));
  return detail::squeeze_channel(a);
}

/// Squeeze-and-excitation over time: sigmoid(FC_b(ReLU(FC_a(mean over features)))).
inline Tensor se_block(const Tensor& h, const Model& model) {
  const std::size_t fa = detail::feature_axis(h);
  if (h.dim(fa + 1) != model.config.w)
    throw ShapeError("se_block: feature map " + to_string(h.shape()) + " does not have w=" +
                     std::to_string(model.config.w));
  auto p = [&](const char* n) -> const Tensor& { return model.param(n); };
  Tensor s = mean(h, fa);
  return sigmoid(linear(relu(linear(s, p("se.fc_a.weight"), p("se.fc_a.bias"))),
                        p("se.fc_b.weight"), p("se.fc_b.bias")));
}

/// Attention-weighted sum of time columns: f = sum_t a_t * h[:, t].
inline Tensor fuse(const Tensor& h, const Tensor& a) {
  const bool ok = (h.rank() == 2 && a.rank() == 1 && a.dim(0) == h.dim(1)) ||
                  (h.rank() == 3 && a.rank() == 2 && a.dim(0) == h.dim(0) && a.dim(1) == h.dim(2));
  if (!ok)
    throw ShapeError("fuse: attention " + to_string(a.shape()) + " does not fit feature map " +
                     to_string(h.shape()));
  if (h.rank() == 2) return matvec(h, a);
  const std::size_t B = h.dim(0), H = h.dim(1), w = h.dim(2);
  return reshape(matmul(h, reshape(a, {B, w, 1})), {B, H});
}

/// Fixed-width summary the classifier consumes, per variant.
inline Tensor fused_feature(const Features& feats, const Model& model) {
  const Tensor& m = feats.map();
  switch (traits(model.config.variant).fusion) {
    case Fusion::kTemporalAttention: return fuse(m, temporal_attention(m, model));
    case Fusion::kSqueezeExcitation: return fuse(m, se_block(m, model));
    case Fusion::kNone: break;
  }
  const std::size_t ta = detail::time_axis(m);
  const auto readout = model.config.readout;
  if (readout == Readout::kMean || (readout == Readout::kAuto && !feats.h.defined()))
    return mean(m, ta);
  Tensor last = slice(m, ta, m.dim(ta) - 1, 1);
  Shape s = m.shape();
  s.pop_back();
  return reshape(last, s);
}

inline Tensor fused_feature(const Tensor& x, const Model& model) {
  return fused_feature(feature_extract(x, model), model);
}

/// Pre-softmax scores Fc(dropout(f)).
inline Tensor classifier_logits(const Tensor& f, const Model& model, bool training, Rng& rng) {
  return linear(dropout(f, model.config.dropout_rate, training, rng),
                model.param("classifier.weight"), model.param("classifier.bias"));
}

/// Class probabilities softmax(Fc(dropout(f))).
inline Tensor classify(const Tensor& f, const Model& model, bool training, Rng& rng) {
  Tensor logits = classifier_logits(f, model, training, rng);
  return softmax(logits, logits.rank() - 1);
}

inline Tensor forward(const Tensor& x, const Model& model, bool training, Rng& rng) {
  return classify(fused_feature(x, model), model, training, rng);
}

}  // namespace amtfnet
