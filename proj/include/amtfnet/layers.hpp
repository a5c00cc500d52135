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
 * \file layers.hpp
 * \brief Parameterised layers: depthwise/standard 1-D convolution, instance
 * normalisation, GRU, fully connected, dropout and parameter initialisation.
 *
 * Sequence layers take one sample as [channels x time] or a batch as
 * [batch x channels x time] and return the same rank. Convolutions are
 * cross-correlations with centred zero padding, so output length equals
 * input length.
 */
#pragma once

#include "amtfnet/random.hpp"
#include "amtfnet/tensor.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace amtfnet {

/// Named parameter tensors of a model. Ordered, so iteration is stable.
using LayerParams = std::map<std::string, Tensor>;

namespace detail {

struct SeqView {
  std::size_t batch, channels, time;
  bool batched;
};

inline SeqView seq_view(const Tensor& x, const char* who) {
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1), false};
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2), true};
  throw ShapeError(std::string(who) + ": expected [C x w] or [B x C x w], got " +
                   to_string(x.shape()));
}

inline Shape seq_shape(const SeqView& v, std::size_t channels) {
  return v.batched ? Shape{v.batch, channels, v.time} : Shape{channels, v.time};
}

inline void check_kernel_size(std::size_t n, std::size_t w, const char* who) {
  if (n % 2 == 0)
    throw ShapeError(std::string(who) + ": kernel size must be odd, got " + std::to_string(n));
  if (n > w)
    throw ShapeError(std::string(who) + ": kernel size " + std::to_string(n) +
                     " exceeds sequence length " + std::to_string(w));
}

}  // namespace detail

/// One kernel row per channel, no cross-channel mixing:
/// y[m, t] = bias[m] + sum_i kernel[m, i] * x[m, t + i - (n - 1) / 2].
inline Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  const auto v = detail::seq_view(x, "depthwise_conv1d");
  if (kernel.rank() != 2 || kernel.dim(0) != v.channels || bias.rank() != 1 ||
      bias.dim(0) != v.channels)
    throw ShapeError("depthwise_conv1d: kernel " + to_string(kernel.shape()) + " / bias " +
                     to_string(bias.shape()) + " do not fit input " + to_string(x.shape()));
  const std::size_t n = kernel.dim(1);
  detail::check_kernel_size(n, v.time, "depthwise_conv1d");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(n / 2);
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(v.time);

  Tensor out = detail::empty_like(x.shape());
  auto o = out.mutable_data();
  auto xi = x.data();
  auto k = kernel.data();
  auto bb = bias.data();
  for (std::size_t b = 0; b < v.batch; ++b) {
    for (std::size_t m = 0; m < v.channels; ++m) {
      const double* row = xi.data() + (b * v.channels + m) * v.time;
      double* dst = o.data() + (b * v.channels + m) * v.time;
      const double* km = k.data() + m * n;
      for (std::ptrdiff_t t = 0; t < w; ++t) {
        double s = bb[m];
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, pad - t);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), w - t + pad);
        for (std::ptrdiff_t i = lo; i < hi; ++i) s += km[i] * row[t + i - pad];
        dst[t] = s;
      }
    }
  }

  record_op({x, kernel, bias}, out, [x, kernel, bias, v, n, pad, w](std::span<const double> g) {
    auto gx = grad_sink(x), gk = grad_sink(kernel), gb = grad_sink(bias);
    auto xi = x.data();
    auto k = kernel.data();
    for (std::size_t b = 0; b < v.batch; ++b) {
      for (std::size_t m = 0; m < v.channels; ++m) {
        const std::size_t base = (b * v.channels + m) * v.time;
        const double* gm = g.data() + base;
        for (std::ptrdiff_t t = 0; t < w; ++t) {
          const double gt = gm[t];
          if (!gb.empty()) gb[m] += gt;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, pad - t);
          const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), w - t + pad);
          for (std::ptrdiff_t i = lo; i < hi; ++i) {
            const std::size_t src = base + static_cast<std::size_t>(t + i - pad);
            if (!gk.empty()) gk[m * n + i] += gt * xi[src];
            if (!gx.empty()) gx[src] += gt * k[m * n + i];
          }
        }
      }
    }
  });
  return out;
}

/// Multi-channel cross-correlation. kernel is [O x C x n], bias [O].
inline Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  const auto v = detail::seq_view(x, "conv1d");
  if (kernel.rank() != 3 || kernel.dim(1) != v.channels || bias.rank() != 1 ||
      bias.dim(0) != kernel.dim(0))
    throw ShapeError("conv1d: kernel " + to_string(kernel.shape()) + " / bias " +
                     to_string(bias.shape()) + " do not fit input " + to_string(x.shape()));
  const std::size_t out_ch = kernel.dim(0), n = kernel.dim(2);
  detail::check_kernel_size(n, v.time, "conv1d");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(n / 2);
  const std::ptrdiff_t w = static_cast<std::ptrdiff_t>(v.time);

  Tensor out = detail::empty_like(detail::seq_shape(v, out_ch));
  auto o = out.mutable_data();
  auto xi = x.data();
  auto k = kernel.data();
  for (std::size_t b = 0; b < v.batch; ++b) {
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
      double* dst = o.data() + (b * out_ch + oc) * v.time;
      for (std::ptrdiff_t t = 0; t < w; ++t) {
        double s = bias[oc];
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, pad - t);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), w - t + pad);
        for (std::size_t c = 0; c < v.channels; ++c) {
          const double* row = xi.data() + (b * v.channels + c) * v.time;
          const double* kc = k.data() + (oc * v.channels + c) * n;
          for (std::ptrdiff_t i = lo; i < hi; ++i) s += kc[i] * row[t + i - pad];
        }
        dst[t] = s;
      }
    }
  }

  record_op({x, kernel, bias}, out,
            [x, kernel, bias, v, out_ch, n, pad, w](std::span<const double> g) {
              auto gx = grad_sink(x), gk = grad_sink(kernel), gb = grad_sink(bias);
              auto xi = x.data();
              auto k = kernel.data();
              for (std::size_t b = 0; b < v.batch; ++b) {
                for (std::size_t oc = 0; oc < out_ch; ++oc) {
                  const double* go = g.data() + (b * out_ch + oc) * v.time;
                  for (std::ptrdiff_t t = 0; t < w; ++t) {
                    const double gt = go[t];
                    if (!gb.empty()) gb[oc] += gt;
                    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, pad - t);
                    const std::ptrdiff_t hi =
                        std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n), w - t + pad);
                    for (std::size_t c = 0; c < v.channels; ++c) {
                      const std::size_t base = (b * v.channels + c) * v.time;
                      const std::size_t kb = (oc * v.channels + c) * n;
                      for (std::ptrdiff_t i = lo; i < hi; ++i) {
                        const std::size_t src = base + static_cast<std::size_t>(t + i - pad);
                        if (!gk.empty()) gk[kb + i] += gt * xi[src];
                        if (!gx.empty()) gx[src] += gt * k[kb + i];
                      }
                    }
                  }
                }
              }
            });
  return out;
}

/// Per-sample, per-channel standardisation over time, no affine parameters:
/// (x - mean) / sqrt(var + eps) with the population variance.
inline Tensor instance_norm(const Tensor& x, double eps = 1e-5) {
  const auto v = detail::seq_view(x, "instance_norm");
  const std::size_t rows = v.batch * v.channels, w = v.time;
  Tensor out = detail::empty_like(x.shape());
  auto o = out.mutable_data();
  auto xi = x.data();
  std::vector<double> inv_sigma(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = xi.data() + r * w;
    double m = 0.0;
    for (std::size_t t = 0; t < w; ++t) m += src[t];
    m /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t t = 0; t < w; ++t) var += (src[t] - m) * (src[t] - m);
    var /= static_cast<double>(w);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[r] = is;
    for (std::size_t t = 0; t < w; ++t) o[r * w + t] = (src[t] - m) * is;
  }
  record_op({x}, out, [x, out, rows, w, inv_sigma = std::move(inv_sigma)](std::span<const double> g) {
    auto gx = grad_sink(x);
    auto y = out.data();
    const double inv_w = 1.0 / static_cast<double>(w);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* gr = g.data() + r * w;
      const double* yr = y.data() + r * w;
      double gm = 0.0, gy = 0.0;
      for (std::size_t t = 0; t < w; ++t) {
        gm += gr[t];
        gy += gr[t] * yr[t];
      }
      gm *= inv_w;
      gy *= inv_w;
      for (std::size_t t = 0; t < w; ++t)
        gx[r * w + t] += inv_sigma[r] * (gr[t] - gm - yr[t] * gy);
    }
  });
  return out;
}

/// W·x for a single vector x [d] or a batch of row vectors x [B x d].
inline Tensor matvec(const Tensor& weight, const Tensor& x) {
  if (weight.rank() != 2)
    throw ShapeError("matvec: weight must be rank 2, got " + to_string(weight.shape()));
  if (x.rank() == 1) {
    if (x.dim(0) != weight.dim(1))
      throw ShapeError("matvec: weight " + to_string(weight.shape()) + " cannot multiply " +
                       to_string(x.shape()));
    return reshape(matmul(weight, reshape(x, {x.dim(0), 1})), {weight.dim(0)});
  }
  if (x.rank() == 2) {
    if (x.dim(1) != weight.dim(1))
      throw ShapeError("matvec: weight " + to_string(weight.shape()) + " cannot multiply " +
                       to_string(x.shape()));
    return matmul(x, transpose(weight));
  }
  throw ShapeError("matvec: input must be [d] or [B x d], got " + to_string(x.shape()));
}

/// weight·x + bias. x is [d] or a batch [B x d].
inline Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (bias.rank() != 1 || weight.rank() != 2 || bias.dim(0) != weight.dim(0))
    throw ShapeError("linear: weight " + to_string(weight.shape()) + " and bias " +
                     to_string(bias.shape()) + " disagree");
  return add(matvec(weight, x), bias);
}

/// GRU weights. Input matrices are [H x d], recurrent ones [H x H], biases [H].
struct GruWeights {
  Tensor W_r, W_z, W, U_r, U_z, U, b_r, b_z, b_h;

  std::size_t hidden() const { return U.dim(0); }
  std::size_t input() const { return W.dim(1); }

  static GruWeights from(const LayerParams& p, const std::string& prefix = "gru.") {
    auto get = [&](const char* n) { return p.at(prefix + n); };
    return {get("W_r"), get("W_z"), get("W"), get("U_r"), get("U_z"),
            get("U"),   get("b_r"), get("b_z"), get("b_h")};
  }

  void validate() const {
    const std::size_t H = U.rank() == 2 ? U.dim(0) : 0;
    const std::size_t d = W.rank() == 2 ? W.dim(1) : 0;
    auto is = [](const Tensor& t, Shape s) { return t.defined() && t.shape() == s; };
    bool ok = H > 0 && d > 0;
    for (const Tensor* t : {&W_r, &W_z, &W}) ok = ok && is(*t, {H, d});
    for (const Tensor* t : {&U_r, &U_z, &U}) ok = ok && is(*t, {H, H});
    for (const Tensor* t : {&b_r, &b_z, &b_h}) ok = ok && is(*t, {H});
    if (!ok) throw ShapeError("gru: inconsistent weight shapes");
  }
};

/// One GRU update written out with tensor primitives:
///   r  = sigmoid(W_r b + U_r h + b_r)
///   h~ = tanh(W b + U (r * h) + b_h)
///   z  = sigmoid(W_z b + U_z h + b_z)
///   h' = (1 - z) * h + z * h~
/// b_t is [d] with h_prev [H], or batched [B x d] with [B x H].
inline Tensor gru_step(const Tensor& b_t, const Tensor& h_prev, const GruWeights& p) {
  p.validate();
  const std::size_t H = p.hidden();
  const bool batched = b_t.rank() == 2;
  const bool ok = batched ? (h_prev.rank() == 2 && h_prev.dim(0) == b_t.dim(0) &&
                             h_prev.dim(1) == H && b_t.dim(1) == p.input())
                          : (b_t.rank() == 1 && h_prev.rank() == 1 && h_prev.dim(0) == H &&
                             b_t.dim(0) == p.input());
  if (!ok)
    throw ShapeError("gru_step: input " + to_string(b_t.shape()) + " / state " +
                     to_string(h_prev.shape()) + " do not fit weights (d=" +
                     std::to_string(p.input()) + ", H=" + std::to_string(H) + ")");
  Tensor r = sigmoid(add(add(matvec(p.W_r, b_t), matvec(p.U_r, h_prev)), p.b_r));
  Tensor cand = tanh(add(add(matvec(p.W, b_t), matvec(p.U, mul(r, h_prev))), p.b_h));
  Tensor z = sigmoid(add(add(matvec(p.W_z, b_t), matvec(p.U_z, h_prev)), p.b_z));
  return add(mul(affine(z, -1.0, 1.0), h_prev), mul(z, cand));
}

/// Runs the GRU over every time column of b ([d x w] or [B x d x w]) and
/// returns the hidden trajectory ([H x w] or [B x H x w]). h0 is [H] and
/// defaults to zeros. Recorded as one tape node with its own
/// backpropagation-through-time rule.
inline Tensor gru_sequence(const Tensor& b, const GruWeights& p, const Tensor& h0 = Tensor()) {
  using Mat = Eigen::MatrixXd;
  p.validate();
  const auto v = detail::seq_view(b, "gru_sequence");
  const std::size_t H = p.hidden(), d = p.input(), B = v.batch, w = v.time;
  if (v.channels != d)
    throw ShapeError("gru_sequence: input " + to_string(b.shape()) + " has " +
                     std::to_string(v.channels) + " channels, weights expect " +
                     std::to_string(d));
  if (h0.defined() && (h0.rank() != 1 || h0.dim(0) != H))
    throw ShapeError("gru_sequence: h0 must be [" + std::to_string(H) + "], got " +
                     to_string(h0.shape()));
  const std::size_t cols = w * B;

  // Column t*B + s holds time step t of sample s.
  Mat X(d, cols);
  auto bi = b.data();
  for (std::size_t s = 0; s < B; ++s)
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t t = 0; t < w; ++t) X(c, t * B + s) = bi[(s * d + c) * w + t];

  Mat Wcat(3 * H, d), Urz(2 * H, H);
  Wcat.topRows(H) = detail::MapC(p.W_r.data().data(), H, d);
  Wcat.middleRows(H, H) = detail::MapC(p.W_z.data().data(), H, d);
  Wcat.bottomRows(H) = detail::MapC(p.W.data().data(), H, d);
  Urz.topRows(H) = detail::MapC(p.U_r.data().data(), H, H);
  Urz.bottomRows(H) = detail::MapC(p.U_z.data().data(), H, H);
  const Mat Uc = detail::MapC(p.U.data().data(), H, H);
  Eigen::VectorXd bias(3 * H);
  for (std::size_t i = 0; i < H; ++i) {
    bias(i) = p.b_r[i];
    bias(H + i) = p.b_z[i];
    bias(2 * H + i) = p.b_h[i];
  }

  Mat G = Wcat * X;
  G.colwise() += bias;

  // States: block 0 is h0, block t+1 is h_t.
  auto states = std::make_shared<Mat>(H, cols + B);
  auto R = std::make_shared<Mat>(H, cols);
  auto Z = std::make_shared<Mat>(H, cols);
  auto C = std::make_shared<Mat>(H, cols);
  auto RH = std::make_shared<Mat>(H, cols);
  for (std::size_t s = 0; s < B; ++s)
    for (std::size_t i = 0; i < H; ++i) (*states)(i, s) = h0.defined() ? h0[i] : 0.0;

  Mat pre_rz(2 * H, B), pre_c(H, B);
  for (std::size_t t = 0; t < w; ++t) {
    const auto hprev = states->middleCols(t * B, B);
    pre_rz.noalias() = Urz * hprev;
    pre_rz += G.block(0, t * B, 2 * H, B);
    auto r = R->middleCols(t * B, B);
    auto z = Z->middleCols(t * B, B);
    r = (1.0 + (-pre_rz.topRows(H).array()).exp()).inverse().matrix();
    z = (1.0 + (-pre_rz.bottomRows(H).array()).exp()).inverse().matrix();
    RH->middleCols(t * B, B) = r.cwiseProduct(hprev);
    pre_c.noalias() = Uc * RH->middleCols(t * B, B);
    pre_c += G.block(2 * H, t * B, H, B);
    auto c = C->middleCols(t * B, B);
    // tanh(a) = 2 sigmoid(2a) - 1 keeps the exponential vectorised.
    c = (2.0 * (1.0 + (-2.0 * pre_c.array()).exp()).inverse() - 1.0).matrix();
    states->middleCols((t + 1) * B, B) =
        (1.0 - z.array()).matrix().cwiseProduct(hprev) + z.cwiseProduct(c);
  }

  Tensor out = detail::empty_like(detail::seq_shape(v, H));
  auto o = out.mutable_data();
  for (std::size_t s = 0; s < B; ++s)
    for (std::size_t i = 0; i < H; ++i)
      for (std::size_t t = 0; t < w; ++t) o[(s * H + i) * w + t] = (*states)(i, (t + 1) * B + s);

  std::vector<Tensor> inputs{b, p.W_r, p.W_z, p.W, p.U_r, p.U_z, p.U, p.b_r, p.b_z, p.b_h};
  if (h0.defined()) inputs.push_back(h0);
  auto Xs = std::make_shared<Mat>(std::move(X));
  record_op(inputs, out,
            [b, p, h0, H, d, B, w, cols, Xs, states, R, Z, C, RH, Wcat, Urz,
             Uc](std::span<const double> g) {
              Mat dG(3 * H, cols), dOut(H, cols);
              for (std::size_t s = 0; s < B; ++s)
                for (std::size_t i = 0; i < H; ++i)
                  for (std::size_t t = 0; t < w; ++t) dOut(i, t * B + s) = g[(s * H + i) * w + t];
              Mat dh = Mat::Zero(H, B), dhp(H, B), dRH(H, B);
              for (std::size_t t = w; t-- > 0;) {
                dh += dOut.middleCols(t * B, B);
                const auto hprev = states->middleCols(t * B, B);
                const auto r = R->middleCols(t * B, B).array();
                const auto z = Z->middleCols(t * B, B).array();
                const auto c = C->middleCols(t * B, B).array();
                const auto dha = dh.array();
                dG.block(2 * H, t * B, H, B) = (dha * z * (1.0 - c * c)).matrix();
                dG.block(H, t * B, H, B) =
                    (dha * (c - hprev.array()) * z * (1.0 - z)).matrix();
                dhp = (dha * (1.0 - z)).matrix();
                dRH.noalias() = Uc.transpose() * dG.block(2 * H, t * B, H, B);
                dG.block(0, t * B, H, B) =
                    (dRH.array() * hprev.array() * r * (1.0 - r)).matrix();
                dhp += dRH.cwiseProduct(R->middleCols(t * B, B));
                dhp.noalias() += Urz.transpose() * dG.block(0, t * B, 2 * H, B);
                dh.swap(dhp);
              }

              auto add_to = [](const Tensor& t, const Mat& m) {
                auto gs = grad_sink(t);
                if (gs.empty()) return;
                detail::Map(gs.data(), m.rows(), m.cols()) += m;
              };
              if (p.W_r.requires_grad() || p.W_z.requires_grad() || p.W.requires_grad()) {
                const Mat dW = dG * Xs->transpose();
                add_to(p.W_r, dW.topRows(H));
                add_to(p.W_z, dW.middleRows(H, H));
                add_to(p.W, dW.bottomRows(H));
              }
              if (p.U_r.requires_grad() || p.U_z.requires_grad()) {
                const Mat dU = dG.topRows(2 * H) * states->leftCols(cols).transpose();
                add_to(p.U_r, dU.topRows(H));
                add_to(p.U_z, dU.bottomRows(H));
              }
              if (p.U.requires_grad()) add_to(p.U, dG.bottomRows(H) * RH->transpose());
              if (p.b_r.requires_grad() || p.b_z.requires_grad() || p.b_h.requires_grad()) {
                const Eigen::VectorXd db = dG.rowwise().sum();
                add_to(p.b_r, db.head(H));
                add_to(p.b_z, db.segment(H, H));
                add_to(p.b_h, db.tail(H));
              }
              if (h0.defined() && h0.requires_grad()) add_to(h0, dh.rowwise().sum());
              if (auto gb = grad_sink(b); !gb.empty()) {
                const Mat dX = Wcat.transpose() * dG;
                for (std::size_t s = 0; s < B; ++s)
                  for (std::size_t c = 0; c < d; ++c)
                    for (std::size_t t = 0; t < w; ++t)
                      gb[(s * d + c) * w + t] += dX(c, t * B + s);
              }
            });
  return out;
}

/// Inverted dropout: survivors are scaled by 1 / (1 - rate). In eval mode,
/// or with rate 0, the input handle itself is returned.
inline Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!training || rate == 0.0) return x;
  const double keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.size());
  for (auto& m : mask) m = rng.bernoulli(rate) ? 0.0 : keep;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

struct ParamSpec {
  std::string name;
  Shape shape;
  std::size_t fan_in = 1;
  bool is_bias = false;
};

/// Weights ~ Uniform(-s, s) with s = sqrt(1 / fan_in); biases zero. Draws
/// follow the order of `specs`.
inline LayerParams init_params(const std::vector<ParamSpec>& specs, Rng& rng) {
  LayerParams params;
  for (const auto& spec : specs) {
    if (params.count(spec.name))
      throw std::invalid_argument("init_params: duplicate parameter name " + spec.name);
    Tensor t = Tensor::zeros(spec.shape, true);
    if (!spec.is_bias) {
      const double s = std::sqrt(1.0 / static_cast<double>(spec.fan_in));
      for (auto& x : t.mutable_data()) x = rng.uniform(-s, s);
    }
    params.emplace(spec.name, t);
  }
  return params;
}

}  // namespace amtfnet
