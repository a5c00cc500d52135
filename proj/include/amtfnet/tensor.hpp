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
 * \file tensor.hpp
 * \brief Dense float64 tensors with a define-by-run reverse-mode tape.
 *
 * A Tensor is a shared handle: copies alias the same storage and gradient.
 * Operations record themselves on the GradTape that is active on the calling
 * thread, but only when at least one input requires a gradient. Without an
 * active tape every operation is a plain evaluation.
 *
 * Binary elementwise operations accept equal shapes, or a rank-1 tensor of
 * length d paired with a rank-2 tensor. The vector is matched against the
 * trailing axis when its size is d, otherwise against the leading axis.
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace amtfnet {

/// Keeps freed tensor buffers in the heap instead of returning them to the
/// kernel. Every op allocates its output, so without this glibc maps and
/// unmaps large buffers on each batch. No-op on other C libraries.
inline void keep_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
#endif
}

using Shape = std::vector<std::size_t>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  const void* tape = nullptr;
  std::size_t tape_index = 0;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

inline void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be >= 1, got " + to_string(shape));
}

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>()) {
    detail::check_shape(shape);
    if (numel(shape) != values.size())
      throw ShapeError("tensor of shape " + to_string(shape) + " needs " +
                       std::to_string(numel(shape)) + " values, got " +
                       std::to_string(values.size()));
    node_->shape = std::move(shape);
    node_->value = std::move(values);
    node_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 0.0, requires_grad);
  }
  static Tensor ones(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 1.0, requires_grad);
  }
  static Tensor full(Shape shape, double fill, bool requires_grad = false) {
    detail::check_shape(shape);
    auto n = numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, fill), requires_grad);
  }
  static Tensor scalar(double v, bool requires_grad = false) {
    return Tensor({1}, {v}, requires_grad);
  }
  static Tensor vector(std::vector<double> values, bool requires_grad = false) {
    Shape s{values.size()};
    return Tensor(std::move(s), std::move(values), requires_grad);
  }
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false) {
    std::vector<double> flat;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw ShapeError("ragged matrix literal");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(flat), requires_grad);
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  /// Direct write access. Only for leaves (parameters, inputs); writing into a
  /// recorded intermediate invalidates its backward rule.
  std::span<double> mutable_data() { return node_->value; }
  double operator[](std::size_t i) const { return node_->value[i]; }
  double at(std::size_t i, std::size_t j) const {
    return node_->value[i * node_->shape.back() + j];
  }
  double item() const {
    if (size() != 1) throw ShapeError("item() on non-scalar tensor " + to_string(shape()));
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  /// Accumulated gradient; empty when nothing has flowed into this tensor.
  std::span<const double> grad() const { return node_->grad; }
  void zero_grad() { node_->grad.clear(); }

  /// Deep copy of the values, detached from any tape.
  Tensor clone(bool requires_grad = false) const {
    return Tensor(shape(), node_->value, requires_grad);
  }

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  detail::Node& node() const { return *node_; }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

using BackwardFn = std::function<void(std::span<const double> grad_out)>;

/// Reverse-mode tape. Construction makes it the active tape of the calling
/// thread; destruction restores the previous one. Call backward() at most
/// once per tape: intermediate gradients are not cleared between calls.
class GradTape {
 public:
  GradTape() : previous_(active_slot()) { active_slot() = this; }
  ~GradTape() { active_slot() = previous_; }
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active() { return active_slot(); }
  static void set_active(GradTape* tape) { active_slot() = tape; }

  std::size_t size() const { return entries_.size(); }

  void record(std::vector<Tensor> inputs, const Tensor& output, BackwardFn fn) {
    auto& node = output.node();
    node.requires_grad = true;
    node.tape = this;
    node.tape_index = entries_.size();
    entries_.push_back(Entry{std::move(inputs), output, std::move(fn)});
  }

  /// Input handles of the i-th recorded node, in recording order.
  const std::vector<Tensor>& inputs_of(std::size_t i) const { return entries_.at(i).inputs; }
  const Tensor& output_of(std::size_t i) const { return entries_.at(i).output; }

  void backward(const Tensor& output) {
    if (output.size() != 1)
      throw ShapeError("backward() needs a scalar output, got " + to_string(output.shape()));
    auto& node = output.node();
    if (node.tape != this) {
      if (node.tape != nullptr)
        throw std::logic_error("backward() on a tensor recorded on a different tape");
      if (!node.requires_grad)
        throw std::logic_error("backward() on a tensor that was not recorded on the active tape");
      node.grad_buffer()[0] += 1.0;  // a bare leaf
      return;
    }
    node.grad_buffer()[0] += 1.0;
    for (std::size_t i = node.tape_index + 1; i-- > 0;) {
      auto& e = entries_[i];
      if (e.output.has_grad()) e.fn(e.output.grad());
    }
  }

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn fn;
  };

  static GradTape*& active_slot() {
    thread_local GradTape* slot = nullptr;
    return slot;
  }

  std::vector<Entry> entries_;
  GradTape* previous_;
};

/// Suspends recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : saved_(GradTape::active()) { GradTape::set_active(nullptr); }
  ~NoGradGuard() { GradTape::set_active(saved_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  GradTape* saved_;
};

/// Runs the backward pass of the active tape from a scalar output.
inline void backward(const Tensor& output) {
  auto* tape = GradTape::active();
  if (!tape) {
    if (output.size() != 1)
      throw ShapeError("backward() needs a scalar output, got " + to_string(output.shape()));
    throw std::logic_error("backward() called with no active GradTape");
  }
  tape->backward(output);
}

/// Attaches a backward rule to `out` when a tape is active and any input
/// requires a gradient. Custom operations use this to join the tape.
inline void record_op(std::vector<Tensor> inputs, const Tensor& out, BackwardFn fn) {
  auto* tape = GradTape::active();
  if (!tape) return;
  bool any = std::any_of(inputs.begin(), inputs.end(),
                         [](const Tensor& t) { return t.requires_grad(); });
  if (any) tape->record(std::move(inputs), out, std::move(fn));
}

/// Gradient accumulator for `t`, or an empty span when `t` takes no gradient.
inline std::span<double> grad_sink(const Tensor& t) {
  if (!t.requires_grad()) return {};
  return t.node().grad_buffer();
}

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

inline Tensor empty_like(const Shape& shape) {
  return Tensor(shape, std::vector<double>(numel(shape)));
}

// Index mapping of the second operand under the narrow broadcast rule.
struct Broadcast {
  enum Kind { kSame, kTrailing, kLeading } kind = kSame;
  std::size_t inner = 1;  // trailing length for kLeading

  std::size_t map(std::size_t i, std::size_t n) const {
    switch (kind) {
      case kSame: return i;
      case kTrailing: return i % n;
      case kLeading: return i / inner;
    }
    return i;
  }
};

}  // namespace detail

enum class BinaryOp { kAdd, kSub, kMul };
enum class UnaryOp { kRelu, kSigmoid, kTanh };

namespace detail {

inline const char* op_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return "add";
    case BinaryOp::kSub: return "sub";
    case BinaryOp::kMul: return "mul";
  }
  return "?";
}

inline Tensor binary(BinaryOp op, const Tensor& a_in, const Tensor& b_in) {
  // Normalise so that `big` carries the output shape and `small` the vector.
  bool swapped = false;
  const Tensor* big = &a_in;
  const Tensor* small = &b_in;
  Broadcast bc;
  if (a_in.shape() != b_in.shape()) {
    if (a_in.rank() == 1 && b_in.rank() == 2) {
      std::swap(big, small);
      swapped = true;
    }
    if (big->rank() == 2 && small->rank() == 1) {
      std::size_t d = small->dim(0);
      if (big->dim(1) == d) {
        bc.kind = Broadcast::kTrailing;
      } else if (big->dim(0) == d) {
        bc.kind = Broadcast::kLeading;
        bc.inner = big->dim(1);
      } else {
        big = nullptr;
      }
    } else {
      big = nullptr;
    }
    if (!big)
      throw ShapeError(std::string(op_name(op)) + ": cannot combine shapes " +
                       to_string(a_in.shape()) + " and " + to_string(b_in.shape()));
  }

  const std::size_t n = big->size();
  const std::size_t sn = small->size();
  Tensor out = empty_like(big->shape());
  auto o = out.mutable_data();
  auto x = big->data();
  auto y = small->data();
  for (std::size_t i = 0; i < n; ++i) {
    double l = x[i], r = y[bc.map(i, sn)];
    if (swapped) std::swap(l, r);
    switch (op) {
      case BinaryOp::kAdd: o[i] = l + r; break;
      case BinaryOp::kSub: o[i] = l - r; break;
      case BinaryOp::kMul: o[i] = l * r; break;
    }
  }

  Tensor A = *big, B = *small;
  record_op({a_in, b_in}, out, [op, A, B, bc, swapped](std::span<const double> g) {
    auto ga = grad_sink(A), gb = grad_sink(B);
    auto xa = A.data(), xb = B.data();
    const std::size_t sn = B.size();
    // Sign applied to the gradient of the right-hand operand for subtraction.
    const double sa = (op == BinaryOp::kSub && swapped) ? -1.0 : 1.0;
    const double sb = (op == BinaryOp::kSub && !swapped) ? -1.0 : 1.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      std::size_t j = bc.map(i, sn);
      if (op == BinaryOp::kMul) {
        if (!ga.empty()) ga[i] += g[i] * xb[j];
        if (!gb.empty()) gb[j] += g[i] * xa[i];
      } else {
        if (!ga.empty()) ga[i] += sa * g[i];
        if (!gb.empty()) gb[j] += sb * g[i];
      }
    }
  });
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::binary(BinaryOp::kAdd, a, b); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::binary(BinaryOp::kSub, a, b); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::binary(BinaryOp::kMul, a, b); }

inline Tensor unary(UnaryOp op, const Tensor& a) {
  Tensor out = detail::empty_like(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (op) {
      case UnaryOp::kRelu: o[i] = x[i] > 0.0 ? x[i] : 0.0; break;
      case UnaryOp::kSigmoid: o[i] = 1.0 / (1.0 + std::exp(-x[i])); break;
      case UnaryOp::kTanh: o[i] = std::tanh(x[i]); break;
    }
  }
  record_op({a}, out, [op, a, out](std::span<const double> g) {
    auto ga = grad_sink(a);
    auto x = a.data();
    auto y = out.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (op) {
        case UnaryOp::kRelu: ga[i] += x[i] > 0.0 ? g[i] : 0.0; break;
        case UnaryOp::kSigmoid: ga[i] += g[i] * y[i] * (1.0 - y[i]); break;
        case UnaryOp::kTanh: ga[i] += g[i] * (1.0 - y[i] * y[i]); break;
      }
    }
  });
  return out;
}

inline Tensor relu(const Tensor& a) { return unary(UnaryOp::kRelu, a); }
inline Tensor sigmoid(const Tensor& a) { return unary(UnaryOp::kSigmoid, a); }
inline Tensor tanh(const Tensor& a) { return unary(UnaryOp::kTanh, a); }

enum class ElementwiseOp { kAdd, kSub, kMul, kRelu, kSigmoid, kTanh };

/// Single entry point over the elementwise family; `b` is used only by the
/// binary members.
inline Tensor elementwise(ElementwiseOp op, const Tensor& a, const Tensor& b = Tensor()) {
  const bool binary_op = op == ElementwiseOp::kAdd || op == ElementwiseOp::kSub ||
                         op == ElementwiseOp::kMul;
  if (binary_op && !b.defined())
    throw std::invalid_argument("elementwise: binary op needs a second operand");
  switch (op) {
    case ElementwiseOp::kAdd: return add(a, b);
    case ElementwiseOp::kSub: return sub(a, b);
    case ElementwiseOp::kMul: return mul(a, b);
    case ElementwiseOp::kRelu: return relu(a);
    case ElementwiseOp::kSigmoid: return sigmoid(a);
    case ElementwiseOp::kTanh: return tanh(a);
  }
  throw std::invalid_argument("unknown elementwise op");
}

/// alpha * a + beta
inline Tensor affine(const Tensor& a, double alpha, double beta = 0.0) {
  Tensor out = detail::empty_like(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t i = 0; i < x.size(); ++i) o[i] = alpha * x[i] + beta;
  record_op({a}, out, [a, alpha](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += alpha * g[i];
  });
  return out;
}

inline Tensor reshape(const Tensor& a, Shape shape) {
  detail::check_shape(shape);
  if (numel(shape) != a.size())
    throw ShapeError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  Tensor out(std::move(shape), std::vector<double>(a.data().begin(), a.data().end()));
  record_op({a}, out, [a](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
  return out;
}

/// Swaps the last two axes of a rank-2 or rank-3 tensor.
inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2 && a.rank() != 3)
    throw ShapeError("transpose: expected rank 2 or 3, got " + to_string(a.shape()));
  const std::size_t batch = a.rank() == 3 ? a.dim(0) : 1;
  const std::size_t m = a.dim(a.rank() - 2), n = a.dim(a.rank() - 1);
  Shape s = a.shape();
  std::swap(s[s.size() - 1], s[s.size() - 2]);
  Tensor out = detail::empty_like(s);
  for (std::size_t b = 0; b < batch; ++b)
    detail::Map(out.mutable_data().data() + b * m * n, n, m) =
        detail::MapC(a.data().data() + b * m * n, m, n).transpose();
  record_op({a}, out, [a, batch, m, n](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t b = 0; b < batch; ++b)
      detail::Map(ga.data() + b * m * n, m, n) +=
          detail::MapC(g.data() + b * m * n, n, m).transpose();
  });
  return out;
}

/// Matrix product. Supports [m x k]·[k x n], batched [B x m x k]·[B x k x n],
/// and [B x m x k]·[k x n] with a shared right operand.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const bool batched = a.rank() == 3;
  const bool shared_rhs = batched && b.rank() == 2;
  bool ok = (a.rank() == 2 && b.rank() == 2) || (batched && (b.rank() == 3 || b.rank() == 2));
  if (ok && batched && !shared_rhs) ok = a.dim(0) == b.dim(0);
  const std::size_t k = ok ? a.dim(a.rank() - 1) : 0;
  if (ok) ok = b.dim(b.rank() - 2) == k;
  if (!ok)
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                     to_string(b.shape()));
  const std::size_t batch = batched ? a.dim(0) : 1;
  const std::size_t m = a.dim(a.rank() - 2), n = b.dim(b.rank() - 1);
  const std::size_t b_stride = shared_rhs || !batched ? 0 : k * n;

  Shape s = batched ? Shape{batch, m, n} : Shape{m, n};
  Tensor out = detail::empty_like(s);
  if (shared_rhs) {
    // Fold the batch into rows for a single product.
    detail::Map(out.mutable_data().data(), batch * m, n).noalias() =
        detail::MapC(a.data().data(), batch * m, k) * detail::MapC(b.data().data(), k, n);
  } else {
    for (std::size_t i = 0; i < batch; ++i)
      detail::Map(out.mutable_data().data() + i * m * n, m, n).noalias() =
          detail::MapC(a.data().data() + i * m * k, m, k) *
          detail::MapC(b.data().data() + i * b_stride, k, n);
  }

  record_op({a, b}, out, [a, b, batch, m, k, n, b_stride, shared_rhs](std::span<const double> g) {
    auto ga = grad_sink(a), gb = grad_sink(b);
    if (shared_rhs) {
      detail::MapC G(g.data(), batch * m, n);
      if (!ga.empty())
        detail::Map(ga.data(), batch * m, k).noalias() +=
            G * detail::MapC(b.data().data(), k, n).transpose();
      if (!gb.empty())
        detail::Map(gb.data(), k, n).noalias() +=
            detail::MapC(a.data().data(), batch * m, k).transpose() * G;
      return;
    }
    for (std::size_t i = 0; i < batch; ++i) {
      detail::MapC G(g.data() + i * m * n, m, n);
      if (!ga.empty())
        detail::Map(ga.data() + i * m * k, m, k).noalias() +=
            G * detail::MapC(b.data().data() + i * b_stride, k, n).transpose();
      if (!gb.empty())
        detail::Map(gb.data() + i * b_stride, k, n).noalias() +=
            detail::MapC(a.data().data() + i * m * k, m, k).transpose() * G;
    }
  });
  return out;
}

enum class ReduceOp { kMean, kStd, kSum };

namespace detail {

struct AxisLayout {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisLayout layout(const Shape& s, std::size_t axis) {
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= s[i];
  l.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) l.inner *= s[i];
  return l;
}

inline Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape r;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) r.push_back(s[i]);
  if (r.empty()) r.push_back(1);
  return r;
}

}  // namespace detail

/// Reduces `axis` away. std is the population standard deviation; its
/// gradient at zero spread is defined as zero.
inline Tensor reduce(ReduceOp op, const Tensor& a, std::size_t axis) {
  if (axis >= a.rank())
    throw ShapeError("reduce: axis " + std::to_string(axis) + " out of range for " +
                     to_string(a.shape()));
  const auto l = detail::layout(a.shape(), axis);
  Tensor out = detail::empty_like(detail::drop_axis(a.shape(), axis));
  auto o = out.mutable_data();
  auto x = a.data();
  std::vector<double> means(l.outer * l.inner);
  for (std::size_t p = 0; p < l.outer; ++p) {
    for (std::size_t q = 0; q < l.inner; ++q) {
      double s = 0.0;
      for (std::size_t i = 0; i < l.len; ++i) s += x[(p * l.len + i) * l.inner + q];
      const double mean = s / static_cast<double>(l.len);
      means[p * l.inner + q] = mean;
      double r = s;
      if (op == ReduceOp::kMean) r = mean;
      if (op == ReduceOp::kStd) {
        double ss = 0.0;
        for (std::size_t i = 0; i < l.len; ++i) {
          double d = x[(p * l.len + i) * l.inner + q] - mean;
          ss += d * d;
        }
        r = std::sqrt(ss / static_cast<double>(l.len));
      }
      o[p * l.inner + q] = r;
    }
  }
  record_op({a}, out, [op, a, out, l, means = std::move(means)](std::span<const double> g) {
    auto ga = grad_sink(a);
    auto x = a.data();
    auto y = out.data();
    const double inv_n = 1.0 / static_cast<double>(l.len);
    for (std::size_t p = 0; p < l.outer; ++p) {
      for (std::size_t q = 0; q < l.inner; ++q) {
        const std::size_t j = p * l.inner + q;
        for (std::size_t i = 0; i < l.len; ++i) {
          const std::size_t idx = (p * l.len + i) * l.inner + q;
          switch (op) {
            case ReduceOp::kSum: ga[idx] += g[j]; break;
            case ReduceOp::kMean: ga[idx] += g[j] * inv_n; break;
            case ReduceOp::kStd:
              if (y[j] > 0.0) ga[idx] += g[j] * (x[idx] - means[j]) * inv_n / y[j];
              break;
          }
        }
      }
    }
  });
  return out;
}

inline Tensor sum(const Tensor& a, std::size_t axis) { return reduce(ReduceOp::kSum, a, axis); }
inline Tensor mean(const Tensor& a, std::size_t axis) { return reduce(ReduceOp::kMean, a, axis); }
inline Tensor std_dev(const Tensor& a, std::size_t axis) { return reduce(ReduceOp::kStd, a, axis); }

/// Sum of every element, as a length-1 tensor.
inline Tensor sum_all(const Tensor& a) { return sum(reshape(a, {a.size()}), 0); }

inline Tensor softmax(const Tensor& a, std::size_t axis) {
  if (axis >= a.rank())
    throw ShapeError("softmax: axis " + std::to_string(axis) + " out of range for " +
                     to_string(a.shape()));
  for (double v : a.data())
    if (std::isnan(v)) throw std::domain_error("softmax: NaN input");
  const auto l = detail::layout(a.shape(), axis);
  Tensor out = detail::empty_like(a.shape());
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t p = 0; p < l.outer; ++p) {
    for (std::size_t q = 0; q < l.inner; ++q) {
      auto at = [&](std::size_t i) { return (p * l.len + i) * l.inner + q; };
      double mx = x[at(0)];
      for (std::size_t i = 1; i < l.len; ++i) mx = std::max(mx, x[at(i)]);
      double z = 0.0;
      for (std::size_t i = 0; i < l.len; ++i) z += (o[at(i)] = std::exp(x[at(i)] - mx));
      for (std::size_t i = 0; i < l.len; ++i) o[at(i)] /= z;
    }
  }
  record_op({a}, out, [a, out, l](std::span<const double> g) {
    auto ga = grad_sink(a);
    auto y = out.data();
    for (std::size_t p = 0; p < l.outer; ++p) {
      for (std::size_t q = 0; q < l.inner; ++q) {
        auto at = [&](std::size_t i) { return (p * l.len + i) * l.inner + q; };
        double dot = 0.0;
        for (std::size_t i = 0; i < l.len; ++i) dot += g[at(i)] * y[at(i)];
        for (std::size_t i = 0; i < l.len; ++i) ga[at(i)] += y[at(i)] * (g[at(i)] - dot);
      }
    }
  });
  return out;
}

inline Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no tensors given");
  const Shape& first = parts.front().shape();
  if (axis >= first.size())
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     to_string(first));
  Shape s = first;
  s[axis] = 0;
  for (const auto& t : parts) {
    bool ok = t.rank() == first.size();
    for (std::size_t i = 0; ok && i < first.size(); ++i)
      if (i != axis && t.dim(i) != first[i]) ok = false;
    if (!ok)
      throw ShapeError("concat: " + to_string(t.shape()) + " does not match " +
                       to_string(first) + " off axis " + std::to_string(axis));
    s[axis] += t.dim(axis);
  }
  const auto l = detail::layout(s, axis);
  Tensor out = detail::empty_like(s);
  auto o = out.mutable_data();
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& t : parts) {
    offsets.push_back(off);
    const std::size_t len = t.dim(axis);
    auto x = t.data();
    for (std::size_t p = 0; p < l.outer; ++p)
      std::copy_n(x.begin() + p * len * l.inner, len * l.inner,
                  o.begin() + (p * l.len + off) * l.inner);
    off += len;
  }
  record_op(parts, out, [parts, offsets, l, axis](std::span<const double> g) {
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto gk = grad_sink(parts[k]);
      if (gk.empty()) continue;
      const std::size_t len = parts[k].dim(axis);
      for (std::size_t p = 0; p < l.outer; ++p)
        for (std::size_t i = 0; i < len * l.inner; ++i)
          gk[p * len * l.inner + i] += g[(p * l.len + offsets[k]) * l.inner + i];
    }
  });
  return out;
}

/// Contiguous slice [start, start + count) along `axis`.
inline Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t count) {
  if (axis >= a.rank() || count == 0 || start + count > a.dim(axis))
    throw ShapeError("slice: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") on axis " + std::to_string(axis) +
                     " invalid for " + to_string(a.shape()));
  const auto l = detail::layout(a.shape(), axis);
  Shape s = a.shape();
  s[axis] = count;
  Tensor out = detail::empty_like(s);
  auto o = out.mutable_data();
  auto x = a.data();
  for (std::size_t p = 0; p < l.outer; ++p)
    std::copy_n(x.begin() + (p * l.len + start) * l.inner, count * l.inner,
                o.begin() + p * count * l.inner);
  record_op({a}, out, [a, l, start, count](std::span<const double> g) {
    auto ga = grad_sink(a);
    for (std::size_t p = 0; p < l.outer; ++p)
      for (std::size_t i = 0; i < count * l.inner; ++i)
        ga[(p * l.len + start) * l.inner + i] += g[p * count * l.inner + i];
  });
  return out;
}

}  // namespace amtfnet
