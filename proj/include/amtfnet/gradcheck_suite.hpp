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
 * \file gradcheck_suite.hpp
 * \brief Finite-difference checks of every differentiable layer and of the
 * end-to-end tiny model, each at several random points.
 */
#pragma once

#include "amtfnet/grad_check.hpp"
#include "amtfnet/train.hpp"

namespace amtfnet {

struct SuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const SuiteEntry& e) { return e.passed; });
  }
};

struct SuiteOptions {
  std::uint64_t seed = 0;
  std::size_t points = 5;
  double eps = 1e-5;
  double layer_tol = 1e-4;
  double model_tol = 1e-3;
  bool corrupt = false;  // adds a deliberately wrong backward rule
};

namespace detail {

inline Tensor random_input(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(shape, std::move(v));
}

// Weighted sum with fixed random weights, so every output coordinate
// contributes a distinct amount to the scalar.
inline Tensor probe(const Tensor& y, const Tensor& weights) {
  return sum_all(mul(reshape(y, {y.size()}), weights));
}

inline Tensor probe_weights(std::size_t n, Rng& rng) { return random_input({n}, rng); }

inline Tensor squared_wrong_backward(const Tensor& x) {
  std::vector<double> v(x.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = x[i] * x[i];
  Tensor out(x.shape(), std::move(v));
  record_op({x}, out, [x](std::span<const double> g) {
    auto gx = grad_sink(x);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += 3.0 * x[i] * g[i];  // should be 2x
  });
  return out;
}

inline ModelConfig tiny_model_config(Variant variant) {
  ModelConfig c;
  c.v = 3;
  c.w = 8;
  c.kernel_sizes = {3, 5, 7};
  c.hidden = 5;
  c.num_classes = 3;
  c.variant = variant;
  return c;
}

}  // namespace detail

/// Runs every check. Inputs are redrawn at each of `points` random points.
inline SuiteReport run_gradcheck_suite(const SuiteOptions& opt = {}) {
  using Inputs = std::vector<Tensor>;
  SuiteReport report;
  Rng rng(derive_seed(opt.seed, "gradcheck"));

  // A check draws fresh inputs from `make` and evaluates `f` at each point.
  auto run = [&](const std::string& name, double tol, const std::function<Inputs(Rng&)>& make,
                 const std::function<Tensor(const Inputs&)>& f) {
    SuiteEntry e{name, 0.0, tol, true};
    for (std::size_t k = 0; k < opt.points; ++k) {
      const auto rep = grad_check(f, make(rng), opt.eps, tol);
      e.max_rel_error = std::max(e.max_rel_error, rep.max_rel_error);
      e.passed = e.passed && rep.passed;
    }
    report.entries.push_back(e);
  };
  auto shapes = [](std::vector<Shape> s, double lo = -1.0, double hi = 1.0) {
    return [s, lo, hi](Rng& r) {
      Inputs in;
      for (const auto& sh : s) in.push_back(detail::random_input(sh, r, lo, hi));
      return in;
    };
  };
  const Tensor w12 = detail::probe_weights(12, rng);
  const Tensor w24 = detail::probe_weights(24, rng);
  auto layer = [&](const std::string& name, std::vector<Shape> s,
                   const std::function<Tensor(const Inputs&)>& f, double lo = -1.0,
                   double hi = 1.0) { run(name, opt.layer_tol, shapes(std::move(s), lo, hi), f); };

  layer("add", {{3, 4}, {4}}, [&](const Inputs& in) { return detail::probe(add(in[0], in[1]), w12); });
  layer("sub", {{3, 4}, {3, 4}}, [&](const Inputs& in) { return detail::probe(sub(in[0], in[1]), w12); });
  layer("mul", {{3, 4}, {3}}, [&](const Inputs& in) { return detail::probe(mul(in[0], in[1]), w12); });
  layer("relu", {{3, 4}}, [&](const Inputs& in) { return detail::probe(relu(in[0]), w12); });
  layer("sigmoid", {{3, 4}}, [&](const Inputs& in) { return detail::probe(sigmoid(in[0]), w12); }, -3, 3);
  layer("tanh", {{3, 4}}, [&](const Inputs& in) { return detail::probe(tanh(in[0]), w12); }, -3, 3);
  layer("affine", {{3, 4}}, [&](const Inputs& in) { return detail::probe(affine(in[0], -1.5, 0.2), w12); });
  layer("matmul", {{3, 5}, {5, 4}}, [&](const Inputs& in) { return detail::probe(matmul(in[0], in[1]), w12); });
  layer("matmul_batched", {{2, 3, 5}, {5, 4}},
        [&](const Inputs& in) { return detail::probe(matmul(in[0], in[1]), w24); });
  layer("transpose", {{3, 4}}, [&](const Inputs& in) { return detail::probe(transpose(in[0]), w12); });
  layer("reshape", {{3, 4}}, [&](const Inputs& in) { return detail::probe(reshape(in[0], {2, 6}), w12); });
  layer("sum", {{3, 4}, {4}}, [&](const Inputs& in) { return sum_all(mul(sum(in[0], 0), in[1])); });
  layer("mean", {{3, 4}, {3}}, [&](const Inputs& in) { return sum_all(mul(mean(in[0], 1), in[1])); });
  layer("std", {{3, 4}, {3}}, [&](const Inputs& in) { return sum_all(mul(std_dev(in[0], 1), in[1])); });
  layer("softmax", {{3, 4}}, [&](const Inputs& in) { return detail::probe(softmax(in[0], 1), w12); }, -2, 2);
  layer("concat", {{3, 2}, {3, 2}},
        [&](const Inputs& in) { return detail::probe(concat({in[0], in[1]}, 1), w12); });
  layer("slice", {{3, 8}}, [&](const Inputs& in) { return detail::probe(slice(in[0], 1, 2, 4), w12); });
  layer("depthwise_conv1d", {{3, 8}, {3, 5}, {3}},
        [&](const Inputs& in) { return detail::probe(depthwise_conv1d(in[0], in[1], in[2]), w24); });
  layer("depthwise_conv1d_batched", {{2, 3, 4}, {3, 3}, {3}},
        [&](const Inputs& in) { return detail::probe(depthwise_conv1d(in[0], in[1], in[2]), w24); });
  layer("conv1d", {{2, 6}, {4, 2, 3}, {4}},
        [&](const Inputs& in) { return detail::probe(conv1d(in[0], in[1], in[2]), w24); });
  layer("instance_norm", {{3, 8}},
        [&](const Inputs& in) { return detail::probe(instance_norm(in[0]), w24); });
  layer("instance_norm_batched", {{3, 2, 4}},
        [&](const Inputs& in) { return detail::probe(instance_norm(in[0]), w24); });
  layer("matvec", {{4, 3}, {3}}, [&](const Inputs& in) { return sum_all(relu(matvec(in[0], in[1]))); });
  layer("linear", {{2, 6}, {3, 6}, {3}}, [&](const Inputs& in) {
    return detail::probe(reshape(linear(in[0], in[1], in[2]), {6}), slice(w12, 0, 0, 6));
  });

  const std::size_t H = 4, d = 3;
  const std::vector<Shape> gru_shapes{{H, d}, {H, d}, {H, d}, {H, H}, {H, H}, {H, H}, {H}, {H}, {H}};
  auto gru_of = [](const Inputs& in, std::size_t off) {
    return GruWeights{in[off],     in[off + 1], in[off + 2], in[off + 3], in[off + 4],
                      in[off + 5], in[off + 6], in[off + 7], in[off + 8]};
  };
  {
    std::vector<Shape> s{{d}, {H}};
    s.insert(s.end(), gru_shapes.begin(), gru_shapes.end());
    layer("gru_step", s, [&](const Inputs& in) {
      return detail::probe(gru_step(in[0], in[1], gru_of(in, 2)), slice(w12, 0, 0, H));
    });
  }
  {
    std::vector<Shape> s{{2, d, 3}, {H}};
    s.insert(s.end(), gru_shapes.begin(), gru_shapes.end());
    layer("gru_sequence", s, [&](const Inputs& in) {
      return detail::probe(gru_sequence(in[0], gru_of(in, 2), in[1]), w24);
    });
  }

  // Model blocks and the end-to-end tiny model. Inputs are the block's
  // first argument followed by every parameter of the model.
  auto model_check = [&](const std::string& name, double tol, const ModelConfig& cfg,
                         const Shape& first,
                         const std::function<Tensor(const Tensor&, const Model&)>& f) {
    const auto layout = parameter_layout(cfg);
    run(name, tol,
        [first, layout](Rng& r) {
          Inputs in{detail::random_input(first, r)};
          for (const auto& p : layout) in.push_back(detail::random_input(p.shape, r, -0.6, 0.6));
          return in;
        },
        [cfg, layout, f](const Inputs& in) {
          Model m{cfg, {}};
          for (std::size_t k = 0; k < layout.size(); ++k) m.params.emplace(layout[k].name, in[k + 1]);
          return f(in[0], m);
        });
  };
  const std::vector<std::size_t> labels{0, 2};
  for (Variant variant : kAllVariants) {
    const ModelConfig cfg = detail::tiny_model_config(variant);
    model_check("model_" + variant_name(variant), opt.model_tol, cfg, {2, cfg.v, cfg.w},
                [&](const Tensor& x, const Model& m) {
                  Rng unused(0);
                  return cross_entropy(forward(x, m, false, unused), labels);
                });
  }
  const ModelConfig full = detail::tiny_model_config(Variant::kFull);
  const Shape h_shape{2, full.hidden, full.w};
  const Tensor w_msdc = detail::probe_weights(2 * full.msdc_channels() * full.w, rng);
  const Tensor w_time = detail::probe_weights(2 * full.w, rng);
  model_check("msdc", opt.layer_tol, full, {2, full.v, full.w},
              [&](const Tensor& x, const Model& m) { return detail::probe(msdc(x, m), w_msdc); });
  model_check("temporal_attention", opt.layer_tol, full, h_shape, [&](const Tensor& h, const Model& m) {
    return detail::probe(temporal_attention(h, m), w_time);
  });
  model_check("se_block", opt.layer_tol, detail::tiny_model_config(Variant::kA6), h_shape,
              [&](const Tensor& h, const Model& m) { return detail::probe(se_block(h, m), w_time); });
  model_check("classify", opt.layer_tol, full, {2, full.hidden}, [&](const Tensor& f, const Model& m) {
    Rng unused(0);
    return cross_entropy(classify(f, m, false, unused), labels);
  });
  layer("fuse", {h_shape, {2, full.w}}, [&](const Inputs& in) {
    return detail::probe(fuse(in[0], in[1]), slice(w_time, 0, 0, 2 * full.hidden));
  });
  layer("cross_entropy", {{3, 4}}, [&](const Inputs& in) {
    return cross_entropy(softmax(in[0], 1), {0, 3, 1});
  }, -2, 2);

  if (opt.corrupt)
    layer("corrupted_square", {{3, 4}},
          [&](const Inputs& in) { return detail::probe(detail::squared_wrong_backward(in[0]), w12); });
  return report;
}

}  // namespace amtfnet
