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
#include "amtfnet/model.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace amtfnet;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

ModelConfig small_config(Variant variant = Variant::kFull) {
  ModelConfig c;
  c.v = 3;
  c.w = 16;
  c.hidden = 6;
  c.num_classes = 4;
  c.variant = variant;
  return c;
}

void zero_all(Model& m) {
  for (auto& [name, t] : m.params)
    for (auto& x : t.mutable_data()) x = 0.0;
}

double rel_norm(const Tensor& a, const Tensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += a[i] * a[i];
  }
  return std::sqrt(num / den);
}

std::vector<double> column(const Tensor& h, std::size_t t) {
  std::vector<double> c(h.dim(0));
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = h.at(i, t);
  return c;
}

// Straight-line temporal attention over raw arrays, written from the
// formulas without the tensor engine.
std::vector<double> reference_attention(const Tensor& h, const Model& m) {
  const std::size_t H = h.dim(0), w = h.dim(1);
  const std::size_t red = m.config.reduced_width();
  auto P = [&](const char* n) { return m.param(n); };
  std::vector<double> q1(w, 0.0), q2(w, 0.0);
  for (std::size_t t = 0; t < w; ++t) {
    for (std::size_t i = 0; i < H; ++i) q1[t] += h.at(i, t);
    q1[t] /= static_cast<double>(H);
    for (std::size_t i = 0; i < H; ++i) q2[t] += (h.at(i, t) - q1[t]) * (h.at(i, t) - q1[t]);
    q2[t] = std::sqrt(q2[t] / static_cast<double>(H));
  }
  auto mlp = [&](const std::vector<double>& q, const char* a, const char* b) {
    Tensor Wa = P((std::string(a) + ".weight").c_str()), ba = P((std::string(a) + ".bias").c_str());
    Tensor Wb = P((std::string(b) + ".weight").c_str()), bb = P((std::string(b) + ".bias").c_str());
    std::vector<double> mid(red), out(w);
    for (std::size_t j = 0; j < red; ++j) {
      double s = ba[j];
      for (std::size_t t = 0; t < w; ++t) s += Wa.at(j, t) * q[t];
      mid[j] = std::max(0.0, s);
    }
    for (std::size_t t = 0; t < w; ++t) {
      double s = bb[t];
      for (std::size_t j = 0; j < red; ++j) s += Wb.at(t, j) * mid[j];
      out[t] = s;
    }
    return out;
  };
  auto p1 = mlp(q1, "fc1", "fc2"), p2 = mlp(q2, "fc3", "fc4");
  Tensor k = P("fuser.kernel");
  const double beta = P("fuser.bias")[0];
  std::vector<double> a(w);
  for (std::size_t t = 0; t < w; ++t) {
    double s = beta;
    for (std::size_t i = 0; i < 3; ++i) {
      const long src = static_cast<long>(t + i) - 1;
      if (src < 0 || src >= static_cast<long>(w)) continue;
      s += k[i] * p1[src] + k[3 + i] * p2[src];
    }
    a[t] = std::max(0.0, s);
  }
  return a;
}

}  // namespace

TEST(ModelConfig, ValidationAndDerivedSizes) {
  ModelConfig c = small_config();
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.reduced_width(), 4u);
  c.w = 15;
  EXPECT_EQ(c.reduced_width(), 4u);  // rounded up
  c = small_config();
  c.num_classes = 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.kernel_sizes = {3, 4};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.dropout_rate = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  EXPECT_EQ(parse_variant("A3"), Variant::kA3);
  EXPECT_EQ(parse_variant("FULL"), Variant::kFull);
  EXPECT_THROW(parse_variant("A7"), std::invalid_argument);
  ModelConfig d;
  EXPECT_EQ(d.w, 64u);
  EXPECT_EQ(d.hidden, 100u);
  EXPECT_EQ(d.kernel_sizes, (std::vector<std::size_t>{3, 5, 7, 9}));
}

TEST(FeatureExtract, FullSizeShape) {
  ModelConfig c;
  c.v = 52;
  c.num_classes = 20;
  Model m = make_model(c, 1);
  Rng rng(2);
  Features f = feature_extract(random_tensor({52, 64}, rng), m);
  EXPECT_EQ(f.b.shape(), (Shape{208, 64}));
  EXPECT_EQ(f.h.shape(), (Shape{100, 64}));
}

TEST(FeatureExtract, ZeroInputZeroGruGivesZeroTrajectory) {
  Model m = make_model(small_config(), 3);
  for (auto& [name, t] : m.params)
    if (name.rfind("gru.", 0) == 0)
      for (auto& x : t.mutable_data()) x = 0.0;
  Features f = feature_extract(Tensor::zeros({3, 16}), m);
  for (double x : f.h.data()) EXPECT_EQ(x, 0.0);
}

TEST(FeatureExtract, ConvolutionReceptiveField) {
  // Instance normalisation pools over the whole window, so locality is
  // checked on each branch's convolution output.
  Model m = make_model(small_config(), 4);
  Rng rng(5);
  Tensor x = random_tensor({3, 16}, rng);
  for (std::size_t t0 : {0u, 5u, 15u}) {
    Tensor xp = x.clone();
    for (std::size_t c = 0; c < 3; ++c) xp.mutable_data()[c * 16 + t0] += 1.0;
    for (auto n : m.config.kernel_sizes) {
      const std::string p = "dc" + std::to_string(n);
      Tensor y0 = depthwise_conv1d(x, m.param(p + ".kernel"), m.param(p + ".bias"));
      Tensor y1 = depthwise_conv1d(xp, m.param(p + ".kernel"), m.param(p + ".bias"));
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t t = 0; t < 16; ++t) {
          const long dist = std::abs(static_cast<long>(t) - static_cast<long>(t0));
          if (dist > static_cast<long>(n / 2)) {
            EXPECT_EQ(y0[c * 16 + t], y1[c * 16 + t]);
          }
        }
      EXPECT_LE(n / 2, 4u);
    }
  }
}

TEST(FeatureExtract, RejectsMismatchedInput) {
  Model m = make_model(small_config(), 6);
  EXPECT_THROW(feature_extract(Tensor::zeros({4, 16}), m), ShapeError);
  EXPECT_THROW(feature_extract(Tensor::zeros({3, 15}), m), ShapeError);
}

TEST(TemporalAttention, ConstantPipeline) {
  Model m = make_model(small_config(), 7);
  zero_all(m);
  Rng rng(8);
  Tensor h = random_tensor({6, 16}, rng);
  m.params.at("fuser.bias").mutable_data()[0] = 0.25;
  const Tensor uniform = temporal_attention(h, m);
  for (double a : uniform.data()) EXPECT_EQ(a, 0.25);
  m.params.at("fuser.bias").mutable_data()[0] = -0.25;
  const Tensor gated = temporal_attention(h, m);
  for (double a : gated.data()) EXPECT_EQ(a, 0.0);
}

TEST(TemporalAttention, MatchesStraightLineImplementation) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Model m = make_model(small_config(), 100 + static_cast<std::uint64_t>(trial));
    for (auto& [name, t] : m.params)
      for (auto& x : t.mutable_data()) x = rng.uniform(-0.5, 0.5);
    Tensor h = random_tensor({6, 16}, rng);
    Tensor a = temporal_attention(h, m);
    auto want = reference_attention(h, m);
    for (std::size_t t = 0; t < 16; ++t) EXPECT_NEAR(a[t], want[t], 1e-12);
  }
}

TEST(TemporalAttention, NonNegativeAndBatched) {
  Rng rng(10);
  Model m = make_model(small_config(), 11);
  for (int trial = 0; trial < 200; ++trial) {
    for (auto& [name, t] : m.params)
      for (auto& x : t.mutable_data()) x = rng.uniform(-2, 2);
    Tensor h = random_tensor({2, 6, 16}, rng, -3, 3);
    Tensor a = temporal_attention(h, m);
    ASSERT_EQ(a.shape(), (Shape{2, 16}));
    for (double x : a.data()) EXPECT_GE(x, 0.0);
    Tensor a1 = temporal_attention(reshape(slice(h, 0, 1, 1), {6, 16}), m);
    for (std::size_t t = 0; t < 16; ++t) EXPECT_NEAR(a[16 + t], a1[t], 1e-13 * (1.0 + a1[t]));
  }
}

TEST(Fuse, SpecExamples) {
  Rng rng(12);
  Tensor h = random_tensor({5, 8}, rng);
  std::vector<double> onehot(8, 0.0);
  onehot[3] = 1.0;
  Tensor f = fuse(h, Tensor::vector(onehot));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(f[i], h.at(i, 3));
  Tensor mean_f = fuse(h, Tensor::full({8}, 1.0 / 8));
  Tensor m = mean(h, 1);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(mean_f[i], m[i], 1e-15);
  Tensor hand = fuse(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({1, 2}));
  EXPECT_EQ(hand[0], 1.0);
  EXPECT_EQ(hand[1], 2.0);
  EXPECT_THROW(fuse(h, Tensor::zeros({7})), ShapeError);
}

TEST(Fuse, Linearity) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor h = random_tensor({5, 8}, rng), a = random_tensor({8}, rng), b = random_tensor({8}, rng);
    const double alpha = rng.uniform(-3, 3);
    Tensor lhs = fuse(h, add(a, b)), fa = fuse(h, a), fb = fuse(h, b);
    Tensor scaled = fuse(h, affine(a, alpha));
    for (std::size_t i = 0; i < 5; ++i) {
      EXPECT_NEAR(lhs[i], fa[i] + fb[i], 1e-12);
      EXPECT_NEAR(scaled[i], alpha * fa[i], 1e-12);
    }
  }
}

TEST(SeBlock, SpecExamples) {
  Model m = make_model(small_config(Variant::kA6), 14);
  Rng rng(15);
  Tensor h = random_tensor({6, 16}, rng);
  Model z = m;
  z.params.clear();
  for (const auto& [name, t] : m.params) z.params.emplace(name, t.clone());
  zero_all(z);
  const Tensor excitation = se_block(h, z);
  for (double e : excitation.data()) EXPECT_EQ(e, 0.5);

  for (int trial = 0; trial < 20; ++trial) {
    for (auto& [name, t] : m.params)
      for (auto& x : t.mutable_data()) x = rng.uniform(-1, 1);
    Tensor e = se_block(h, m);
    // Straight-line reference.
    const std::size_t w = 16, red = 4;
    std::vector<double> s(w, 0.0), mid(red);
    for (std::size_t t = 0; t < w; ++t) {
      for (std::size_t i = 0; i < 6; ++i) s[t] += h.at(i, t);
      s[t] /= 6.0;
    }
    const Tensor &Wa = m.param("se.fc_a.weight"), &ba = m.param("se.fc_a.bias");
    const Tensor &Wb = m.param("se.fc_b.weight"), &bb = m.param("se.fc_b.bias");
    for (std::size_t j = 0; j < red; ++j) {
      double acc = ba[j];
      for (std::size_t t = 0; t < w; ++t) acc += Wa.at(j, t) * s[t];
      mid[j] = std::max(0.0, acc);
    }
    for (std::size_t t = 0; t < w; ++t) {
      double acc = bb[t];
      for (std::size_t j = 0; j < red; ++j) acc += Wb.at(t, j) * mid[j];
      const double want = 1.0 / (1.0 + std::exp(-acc));
      EXPECT_NEAR(e[t], want, 1e-12);
      EXPECT_GT(e[t], 0.0);
      EXPECT_LT(e[t], 1.0);
    }
  }
}

TEST(Classify, SpecExamples) {
  Model m = make_model(small_config(), 16);
  Rng rng(17);
  for (auto& x : m.params.at("classifier.weight").mutable_data()) x = 0.0;
  Tensor p = classify(random_tensor({6}, rng), m, false, rng);
  for (double x : p.data()) EXPECT_NEAR(x, 0.25, 1e-15);

  Model r = make_model(small_config(), 18);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor f = random_tensor({6}, rng, -3, 3);
    Tensor logits = classifier_logits(f, r, false, rng);
    Tensor probs = classify(f, r, false, rng);
    double total = 0.0;
    for (double x : probs.data()) {
      EXPECT_GT(x, 0.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    auto am = [](const Tensor& t) {
      return std::max_element(t.data().begin(), t.data().end()) - t.data().begin();
    };
    EXPECT_EQ(am(logits), am(probs));
  }
}

TEST(Forward, FullSizeShapeAndDeterminism) {
  ModelConfig c;
  c.v = 52;
  c.num_classes = 20;
  Model m = make_model(c, 19);
  Rng rng(20);
  Tensor x = random_tensor({52, 64}, rng);
  Tensor p1 = forward(x, m, false, rng), p2 = forward(x, m, false, rng);
  EXPECT_EQ(p1.shape(), (Shape{20}));
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(p1[i], p2[i]);
}

TEST(Forward, ForcedOneHotAttentionSelectsColumn) {
  Model m = make_model(small_config(), 21);
  for (const char* n : {"fc1.weight", "fc1.bias", "fc2.weight", "fc3.weight", "fc3.bias",
                        "fc4.weight", "fc4.bias", "fuser.kernel", "fuser.bias"})
    for (auto& x : m.params.at(n).mutable_data()) x = 0.0;
  const std::size_t t0 = 9;
  auto b2 = m.params.at("fc2.bias").mutable_data();
  std::fill(b2.begin(), b2.end(), 0.0);
  b2[t0] = 1.0;
  m.params.at("fuser.kernel").mutable_data()[1] = 1.0;  // channel p1, centre tap
  Rng rng(22);
  Tensor x = random_tensor({3, 16}, rng);
  Tensor h = feature_extract(x, m).h;
  Tensor want = classify(Tensor::vector(column(h, t0)), m, false, rng);
  Tensor got = forward(x, m, false, rng);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-15);
}

TEST(Forward, VariantFallbacks) {
  Rng rng(23);
  Tensor x = random_tensor({3, 16}, rng);
  {
    Model m = make_model(small_config(Variant::kA1), 24);
    Features f = feature_extract(x, m);
    EXPECT_FALSE(f.h.defined());
    Tensor got = fused_feature(f, m), want = mean(f.b, 1);
    ASSERT_EQ(got.shape(), (Shape{12}));
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(got[i], want[i]);

    m.config.readout = Readout::kLast;
    Tensor last_got = fused_feature(f, m);
    auto last = column(f.b, 15);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(last_got[i], last[i]);
  }
  for (Variant v : {Variant::kA2, Variant::kA5}) {
    Model m = make_model(small_config(v), 25);
    Features f = feature_extract(x, m);
    Tensor got = fused_feature(f, m);
    auto last = column(f.h, 15);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(got[i], last[i]);
    m.config.readout = Readout::kMean;
    Tensor avg = fused_feature(f, m), want = mean(f.h, 1);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(avg[i], want[i]);
  }
  {
    Model m = make_model(small_config(Variant::kA3), 26);
    Features f = feature_extract(x, m);
    EXPECT_EQ(fused_feature(f, m).shape(), (Shape{12}));
  }
  for (Variant v : kAllVariants) {
    Model m = make_model(small_config(v), 27);
    Tensor p = forward(x, m, true, rng);
    EXPECT_EQ(p.shape(), (Shape{4}));
    Tensor batch = forward(reshape(concat({x, x}, 0), {2, 3, 16}), m, false, rng);
    Tensor single = forward(x, m, false, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_NEAR(batch[i], single[i], 1e-13) << variant_name(v);
      EXPECT_NEAR(batch[4 + i], single[i], 1e-13) << variant_name(v);
    }
  }
}

TEST(Forward, ProbabilityVectorProperty) {
  Rng rng(28);
  for (Variant v : kAllVariants) {
    Model m = make_model(small_config(v), 29);
    for (int trial = 0; trial < 5; ++trial) {
      Tensor p = forward(random_tensor({3, 16}, rng, -4, 4), m, false, rng);
      double total = 0.0;
      for (double x : p.data()) {
        EXPECT_GT(x, 0.0);
        total += x;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
  }
}

TEST(ModeShift, InstanceNormAbsorbsOffsetsWithoutPadding) {
  // Unit kernels see no padding, so a per-channel offset only moves each
  // channel's level, which instance normalisation removes.
  ModelConfig c = small_config();
  c.kernel_sizes = {1};
  Model m = make_model(c, 30);
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({3, 16}, rng);
    Tensor xs = x.clone();
    for (std::size_t ch = 0; ch < 3; ++ch) {
      const double off = rng.uniform(-10, 10);
      for (std::size_t t = 0; t < 16; ++t) xs.mutable_data()[ch * 16 + t] += off;
    }
    EXPECT_LT(rel_norm(msdc(x, m), msdc(xs, m)), 1e-3);
  }
}

TEST(ModeShift, MultiscaleBranchesDampOffsets) {
  // With zero "same" padding the edge columns see a partial offset, so the
  // change is damped rather than removed.
  Model m = make_model(small_config(), 32);
  Rng rng(33);
  for (double scale : {0.1, 1.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      Tensor x = random_tensor({3, 16}, rng);
      Tensor xs = x.clone();
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double off = scale * rng.uniform(-1, 1);
        for (std::size_t t = 0; t < 16; ++t) xs.mutable_data()[ch * 16 + t] += off;
      }
      std::vector<Tensor> raw0, raw1;
      for (auto n : m.config.kernel_sizes) {
        const std::string p = "dc" + std::to_string(n);
        raw0.push_back(depthwise_conv1d(x, m.param(p + ".kernel"), m.param(p + ".bias")));
        raw1.push_back(depthwise_conv1d(xs, m.param(p + ".kernel"), m.param(p + ".bias")));
      }
      const double raw_change = rel_norm(concat(raw0, 0), concat(raw1, 0));
      EXPECT_LT(rel_norm(msdc(x, m), msdc(xs, m)), 0.5 * raw_change);
    }
  }
}

TEST(CountParameters, ClosedFormMatchesEnumeration) {
  Rng rng(36);
  for (int trial = 0; trial < 30; ++trial) {
    ModelConfig c;
    c.v = 1 + static_cast<std::size_t>(rng.uniform(0, 6));
    c.w = 9 + static_cast<std::size_t>(rng.uniform(0, 20));
    c.hidden = 1 + static_cast<std::size_t>(rng.uniform(0, 10));
    c.num_classes = 2 + static_cast<std::size_t>(rng.uniform(0, 5));
    c.reduction = 1 + static_cast<std::size_t>(rng.uniform(0, 6));
    for (Variant v : kAllVariants) {
      c.variant = v;
      Model m = make_model(c, 37);
      EXPECT_EQ(count_parameters(c), enumerate_parameters(m)) << variant_name(v);
      check_params(m);
    }
  }
}

TEST(CountParameters, ReferenceConfigurations) {
  ModelConfig te;
  te.v = 52;
  te.num_classes = 20;
  // dc: 4*52 + 52*(3+5+7+9); gru: 3*(100*208 + 100*100 + 100);
  // attention: 2*(64*16 + 16 + 16*64 + 64) + 2*3 + 1; classifier: 20*100 + 20.
  const std::size_t te_hand = (4 * 52 + 52 * 24) + 3 * (20800 + 10000 + 100) +
                              (2 * (1024 + 16 + 1024 + 64) + 7) + 2020;
  EXPECT_EQ(count_parameters(te), te_hand);
  EXPECT_NEAR(static_cast<double>(count_parameters(te)), 0.10e6, 0.05 * 0.10e6);

  ModelConfig tp;
  tp.v = 24;
  tp.num_classes = 5;
  const std::size_t tp_hand = (4 * 24 + 24 * 24) + 3 * (9600 + 10000 + 100) +
                              (2 * (1024 + 16 + 1024 + 64) + 7) + 505;
  EXPECT_EQ(count_parameters(tp), tp_hand);
}

TEST(CountParameters, VariantMonotonicity) {
  ModelConfig c;
  c.v = 52;
  c.num_classes = 20;
  auto count = [&](Variant v) {
    c.variant = v;
    return count_parameters(c);
  };
  EXPECT_LT(count(Variant::kA1), count(Variant::kA3));
  EXPECT_LT(count(Variant::kA5), count(Variant::kFull));
}

TEST(Checkpoint, RoundTripIsExact) {
  Model m = make_model(small_config(Variant::kA6), 38);
  const Json meta{{"note", "x"}, {"mean", {1.5, 2.5}}};
  const std::string bytes = serialize_checkpoint(m, meta);
  Checkpoint ck = deserialize_checkpoint(bytes);
  EXPECT_EQ(ck.model.config.variant, Variant::kA6);
  EXPECT_EQ(ck.meta, meta);
  ASSERT_EQ(ck.model.params.size(), m.params.size());
  for (const auto& [name, t] : m.params) {
    const Tensor& u = ck.model.params.at(name);
    EXPECT_EQ(u.shape(), t.shape());
    EXPECT_TRUE(std::equal(t.data().begin(), t.data().end(), u.data().begin()));
  }
  EXPECT_EQ(serialize_checkpoint(ck.model, ck.meta), bytes);
}

TEST(Checkpoint, RejectsCorruptInput) {
  Model m = make_model(small_config(), 39);
  std::string bytes = serialize_checkpoint(m);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), ConfigError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_checkpoint(bad), ConfigError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "z"), ConfigError);
}

TEST(Checkpoint, ConfigJsonRejectsUnknownKeys) {
  Json j = to_json(small_config());
  EXPECT_EQ(model_config_from_json(j).w, 16u);
  j["hiden"] = 5;
  EXPECT_THROW(model_config_from_json(j), ConfigError);
}

TEST(Checkpoint, ReadoutRoundTrips) {
  ModelConfig c = small_config(Variant::kA1);
  EXPECT_EQ(model_config_from_json(to_json(c)).readout, Readout::kAuto);
  c.readout = Readout::kMean;
  Json j = to_json(c);
  EXPECT_EQ(j["readout"], "mean");
  EXPECT_EQ(model_config_from_json(j).readout, Readout::kMean);
  EXPECT_EQ(deserialize_checkpoint(serialize_checkpoint(make_model(c, 40))).model.config.readout,
            Readout::kMean);
  j["readout"] = "first";
  EXPECT_THROW(model_config_from_json(j), ConfigError);
}
