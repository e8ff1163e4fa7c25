#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major tensors.
//
// A BasicTape owns every node of one computation. Leaves are created with
// leaf(); every op appends a node holding its value and a closure that maps
// the node's output gradient onto its parents. backward() walks the tape in
// reverse creation order. Tapes are single-threaded; independent tapes may
// run concurrently.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stegowav/errors.hpp"

namespace stegowav {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense tensor value: shape plus row-major data.
template <typename Scalar>
class BasicTensor {
 public:
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() = default;

  BasicTensor(Shape shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
    for (Index d : shape_) {
      if (d <= 0) throw ConfigError("tensor extents must be positive, got " + shape_string(shape_));
    }
    if (shape_size(shape_) != data_.size()) {
      throw ConfigError("tensor shape " + shape_string(shape_) + " does not match " +
                        std::to_string(data_.size()) + " values");
    }
  }

  static BasicTensor zeros(Shape shape) { return filled(std::move(shape), Scalar(0)); }

  static BasicTensor filled(Shape shape, Scalar v) {
    const Index n = shape_size(shape);
    return BasicTensor(std::move(shape), Array::Constant(n, v));
  }

  static BasicTensor scalar(Scalar v) { return filled({1}, v); }

  /// Single-channel tensor [1, rows, cols] copied from a matrix.
  template <typename Derived>
  static BasicTensor from_plane(const Eigen::MatrixBase<Derived>& m) {
    BasicTensor t = zeros({1, m.rows(), m.cols()});
    t.plane(0) = m.template cast<Scalar>();
    return t;
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index i) const { return shape_.at(static_cast<std::size_t>(i)); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  const Array& data() const { return data_; }
  Array& data() { return data_; }

  Scalar operator[](Index i) const { return data_[i]; }
  Scalar& operator[](Index i) { return data_[i]; }

  bool all_finite() const { return data_.allFinite(); }

  // Rank-3 [depth, height, width] helpers.
  Index depth() const { return dim(0); }
  Index height() const { return dim(1); }
  Index width() const { return dim(2); }

  Eigen::Map<const RowMatrix<Scalar>> plane(Index c) const {
    require_rank3();
    return {data_.data() + c * height() * width(), height(), width()};
  }
  Eigen::Map<RowMatrix<Scalar>> plane(Index c) {
    require_rank3();
    return {data_.data() + c * height() * width(), height(), width()};
  }

  /// Rows = leading extent, columns = product of the rest.
  Eigen::Map<const RowMatrix<Scalar>> as_matrix() const {
    return {data_.data(), dim(0), size() / dim(0)};
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  void require_rank3() const {
    if (rank() != 3) throw ConfigError("expected rank-3 tensor, got " + shape_string(shape_));
  }

  Shape shape_;
  Array data_;
};

template <typename Scalar>
class BasicTape;

/// Handle to a node on a tape.
template <typename Scalar>
struct BasicVar {
  BasicTape<Scalar>* tape = nullptr;
  Index id = -1;

  const BasicTensor<Scalar>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  Index size() const { return value().size(); }
};

template <typename Scalar>
class BasicTape {
 public:
  using Tensor = BasicTensor<Scalar>;
  using Var = BasicVar<Scalar>;
  using Array = typename Tensor::Array;
  /// Receives the node's output gradient and accumulates into parents.
  using BackwardFn = std::function<void(BasicTape&, const Array&)>;

  BasicTape() = default;
  BasicTape(const BasicTape&) = delete;
  BasicTape& operator=(const BasicTape&) = delete;

  /// Leaf node. Non-finite values are rejected.
  Var leaf(Tensor value, bool requires_grad = false) {
    if (!value.all_finite()) {
      throw ConfigError("leaf tensor " + shape_string(value.shape()) + " contains NaN or Inf");
    }
    if (requires_grad && probe_.active && leaf_counter_ == probe_.leaf) {
      value[probe_.element] += probe_.delta;
    }
    if (requires_grad) ++leaf_counter_;
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    node.is_leaf = true;
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<Index>(nodes_.size()) - 1};
  }

  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends an op node. The backward closure is dropped when no parent
  /// needs a gradient.
  Var record(Tensor value, const std::vector<Var>& parents, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    for (const Var& p : parents) {
      if (p.tape != this) throw UsageError("operand belongs to a different tape");
      node.requires_grad = node.requires_grad || nodes_[p.id].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<Index>(nodes_.size()) - 1};
  }

  const Tensor& value(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)).value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool is_leaf(Var v) const { return nodes_[v.id].is_leaf; }

  /// Gradient buffer of a node; zeros when never reached.
  Array grad(Var v) const {
    const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
    if (n.grad.size() == 0) return Array::Zero(n.value.size());
    return n.grad;
  }

  void accumulate(Var v, const Array& delta) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Array::Zero(n.value.size());
    n.grad += delta;
  }

  /// Populates grad on every requires_grad leaf reachable from root.
  /// Leaf gradients accumulate across calls; intermediates are per-pass.
  void backward(Var root) {
    if (root.tape != this) throw UsageError("backward root belongs to a different tape");
    if (value(root).size() != 1) {
      throw UsageError("backward root must be a scalar, got shape " +
                       shape_string(value(root).shape()));
    }
    for (Node& n : nodes_) {
      if (!n.is_leaf) n.grad.resize(0);
    }
    accumulate(root, Array::Ones(1));
    for (Index i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.is_leaf || !n.backward || n.grad.size() == 0) continue;
      const Array g = std::move(n.grad);
      n.grad.resize(0);
      n.backward(*this, g);
    }
  }

  void zero_grad() {
    for (Node& n : nodes_) n.grad.resize(0);
  }

  Index node_count() const { return static_cast<Index>(nodes_.size()); }

  /// Perturbs element `element` of the `leaf`-th requires_grad leaf by
  /// `delta` at creation time. Used by grad_check to rebuild a graph with a
  /// single nudged input.
  void set_probe(Index leaf, Index element, Scalar delta) {
    probe_ = Probe{true, leaf, element, delta};
  }

 private:
  struct Node {
    Tensor value;
    Array grad;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn backward;
  };
  struct Probe {
    bool active = false;
    Index leaf = 0;
    Index element = 0;
    Scalar delta = 0;
  };

  std::vector<Node> nodes_;
  Probe probe_;
  Index leaf_counter_ = 0;
};

using Tensor = BasicTensor<double>;
using Tape = BasicTape<double>;
using Var = BasicVar<double>;
using Tensorf = BasicTensor<float>;
using Tapef = BasicTape<float>;
using Varf = BasicVar<float>;

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, BasicVar<Scalar> a, BasicVar<Scalar> b) {
  if (a.shape() != b.shape()) {
    throw ConfigError(std::string(op) + ": operand shapes differ, lhs " + shape_string(a.shape()) +
                      " vs rhs " + shape_string(b.shape()));
  }
}

template <typename Scalar>
void require_rank(const char* op, BasicVar<Scalar> a, Index rank) {
  if (a.value().rank() != rank) {
    throw ConfigError(std::string(op) + ": expected rank " + std::to_string(rank) + " operand, got " +
                      shape_string(a.shape()));
  }
}

template <typename Scalar>
void require_scalar(const char* op, BasicVar<Scalar> a) {
  if (a.size() != 1) {
    throw ConfigError(std::string(op) + ": expected single-element weight, got " +
                      shape_string(a.shape()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <typename Scalar>
BasicVar<Scalar> add(BasicVar<Scalar> a, BasicVar<Scalar> b) {
  detail::require_same_shape("add", a, b);
  BasicTensor<Scalar> out(a.shape(), a.value().data() + b.value().data());
  return a.tape->record(std::move(out), {a, b}, [a, b](auto& t, const auto& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
BasicVar<Scalar> sub(BasicVar<Scalar> a, BasicVar<Scalar> b) {
  detail::require_same_shape("sub", a, b);
  BasicTensor<Scalar> out(a.shape(), a.value().data() - b.value().data());
  return a.tape->record(std::move(out), {a, b}, [a, b](auto& t, const auto& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

template <typename Scalar>
BasicVar<Scalar> mul(BasicVar<Scalar> a, BasicVar<Scalar> b) {
  detail::require_same_shape("mul", a, b);
  BasicTensor<Scalar> out(a.shape(), a.value().data() * b.value().data());
  return a.tape->record(std::move(out), {a, b}, [a, b](auto& t, const auto& g) {
    t.accumulate(a, g * t.value(b).data());
    t.accumulate(b, g * t.value(a).data());
  });
}

template <typename Scalar>
BasicVar<Scalar> scale(BasicVar<Scalar> a, Scalar c) {
  BasicTensor<Scalar> out(a.shape(), a.value().data() * c);
  return a.tape->record(std::move(out), {a}, [a, c](auto& t, const auto& g) { t.accumulate(a, g * c); });
}

/// x + s with s a single-element tensor broadcast over x.
template <typename Scalar>
BasicVar<Scalar> shift(BasicVar<Scalar> x, BasicVar<Scalar> s) {
  detail::require_scalar("shift", s);
  BasicTensor<Scalar> out(x.shape(), x.value().data() + s.value()[0]);
  return x.tape->record(std::move(out), {x, s}, [x, s](auto& t, const auto& g) {
    t.accumulate(x, g);
    t.accumulate(s, BasicTensor<Scalar>::Array::Constant(1, g.sum()));
  });
}

template <typename Scalar>
BasicVar<Scalar> leaky_relu(BasicVar<Scalar> x, Scalar slope = Scalar(0.2)) {
  const auto& v = x.value().data();
  BasicTensor<Scalar> out(x.shape(), (v > 0).select(v, v * slope));
  return x.tape->record(std::move(out), {x}, [x, slope](auto& t, const auto& g) {
    const auto& xv = t.value(x).data();
    t.accumulate(x, (xv > 0).select(g, g * slope));
  });
}

/// Elementwise square root; the gradient is taken as 0 where the value is 0.
template <typename Scalar>
BasicVar<Scalar> square_root(BasicVar<Scalar> x) {
  if ((x.value().data() < 0).any()) throw UsageError("square_root: negative operand");
  BasicTensor<Scalar> out(x.shape(), x.value().data().sqrt());
  const auto root = out.data();
  return x.tape->record(std::move(out), {x}, [x, root](auto& t, const auto& g) {
    t.accumulate(x, (root > 0).select(g / (Scalar(2) * root), Scalar(0)));
  });
}

template <typename Scalar>
BasicVar<Scalar> reciprocal(BasicVar<Scalar> x) {
  if ((x.value().data() == 0).any()) throw UsageError("reciprocal: zero operand");
  BasicTensor<Scalar> out(x.shape(), x.value().data().inverse());
  return x.tape->record(std::move(out), {x}, [x](auto& t, const auto& g) {
    const auto& xv = t.value(x).data();
    t.accumulate(x, -g / xv.square());
  });
}

/// Σ weights[i] · terms[i]; every weight is a single-element tensor.
template <typename Scalar>
BasicVar<Scalar> weighted_sum(const std::vector<BasicVar<Scalar>>& terms,
                              const std::vector<BasicVar<Scalar>>& weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    throw ConfigError("weighted_sum: need equal, non-zero numbers of terms and weights (" +
                      std::to_string(terms.size()) + " vs " + std::to_string(weights.size()) + ")");
  }
  typename BasicTensor<Scalar>::Array acc = BasicTensor<Scalar>::Array::Zero(terms[0].size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    detail::require_same_shape("weighted_sum", terms[0], terms[i]);
    detail::require_scalar("weighted_sum", weights[i]);
    acc += weights[i].value()[0] * terms[i].value().data();
  }
  std::vector<BasicVar<Scalar>> parents(terms);
  parents.insert(parents.end(), weights.begin(), weights.end());
  return terms[0].tape->record(BasicTensor<Scalar>(terms[0].shape(), std::move(acc)), parents,
                               [terms, weights](auto& t, const auto& g) {
                                 for (std::size_t i = 0; i < terms.size(); ++i) {
                                   t.accumulate(terms[i], g * t.value(weights[i])[0]);
                                   t.accumulate(weights[i], BasicTensor<Scalar>::Array::Constant(
                                                                1, (g * t.value(terms[i]).data()).sum()));
                                 }
                               });
}

// ---------------------------------------------------------------------------
// Reductions to a single element

template <typename Scalar>
BasicVar<Scalar> mean(BasicVar<Scalar> x) {
  const Scalar n = static_cast<Scalar>(x.size());
  auto out = BasicTensor<Scalar>::scalar(x.value().data().sum() / n);
  return x.tape->record(std::move(out), {x}, [x, n](auto& t, const auto& g) {
    t.accumulate(x, BasicTensor<Scalar>::Array::Constant(t.value(x).size(), g[0] / n));
  });
}

template <typename Scalar>
BasicVar<Scalar> abs_sum(BasicVar<Scalar> x) {
  auto out = BasicTensor<Scalar>::scalar(x.value().data().abs().sum());
  return x.tape->record(std::move(out), {x}, [x](auto& t, const auto& g) {
    t.accumulate(x, t.value(x).data().sign() * g[0]);
  });
}

template <typename Scalar>
BasicVar<Scalar> sq_sum(BasicVar<Scalar> x) {
  auto out = BasicTensor<Scalar>::scalar(x.value().data().square().sum());
  return x.tape->record(std::move(out), {x}, [x](auto& t, const auto& g) {
    t.accumulate(x, t.value(x).data() * (Scalar(2) * g[0]));
  });
}

// ---------------------------------------------------------------------------
// Structural

/// Concatenation along `axis`; all other extents must agree.
template <typename Scalar>
BasicVar<Scalar> concat(const std::vector<BasicVar<Scalar>>& parts, Index axis) {
  if (parts.empty()) throw ConfigError("concat: no operands");
  const Shape& ref = parts[0].shape();
  if (axis < 0 || axis >= static_cast<Index>(ref.size())) {
    throw ConfigError("concat: axis " + std::to_string(axis) + " out of range for " + shape_string(ref));
  }
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == ref.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = (static_cast<Index>(d) == axis) || s[d] == ref[d];
    if (!ok) {
      throw ConfigError("concat: operand " + shape_string(s) + " incompatible with " + shape_string(ref) +
                        " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  // outer = product of extents before axis, inner = after axis.
  Index outer = 1, inner = 1;
  for (Index d = 0; d < axis; ++d) outer *= ref[d];
  for (std::size_t d = axis + 1; d < ref.size(); ++d) inner *= ref[d];
  const Index out_stride = out_shape[axis] * inner;

  BasicTensor<Scalar> out = BasicTensor<Scalar>::zeros(out_shape);
  std::vector<Index> offsets;
  Index offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const Index block = p.shape()[axis] * inner;
    const auto& src = p.value().data();
    for (Index o = 0; o < outer; ++o) {
      out.data().segment(o * out_stride + offset, block) = src.segment(o * block, block);
    }
    offset += block;
  }
  return parts[0].tape->record(
      std::move(out), parts, [parts, offsets, outer, inner, out_stride, axis](auto& t, const auto& g) {
        for (std::size_t i = 0; i < parts.size(); ++i) {
          const Index block = t.value(parts[i]).shape()[axis] * inner;
          typename BasicTensor<Scalar>::Array gi(outer * block);
          for (Index o = 0; o < outer; ++o) {
            gi.segment(o * block, block) = g.segment(o * out_stride + offsets[i], block);
          }
          t.accumulate(parts[i], gi);
        }
      });
}

template <typename Scalar>
BasicVar<Scalar> concat_depth(const std::vector<BasicVar<Scalar>>& parts) {
  for (const auto& p : parts) detail::require_rank("concat_depth", p, 3);
  return concat(parts, 0);
}

/// Elements [begin, end) along `axis`.
template <typename Scalar>
BasicVar<Scalar> slice(BasicVar<Scalar> x, Index axis, Index begin, Index end) {
  const Shape& s = x.shape();
  if (axis < 0 || axis >= static_cast<Index>(s.size()) || begin < 0 || end > s[axis] || begin >= end) {
    throw ConfigError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                      std::to_string(axis) + " invalid for " + shape_string(s));
  }
  Index outer = 1, inner = 1;
  for (Index d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  Shape out_shape = s;
  out_shape[axis] = end - begin;
  const Index in_stride = s[axis] * inner;
  const Index block = (end - begin) * inner;
  typename BasicTensor<Scalar>::Array data(outer * block);
  for (Index o = 0; o < outer; ++o) {
    data.segment(o * block, block) = x.value().data().segment(o * in_stride + begin * inner, block);
  }
  const Index total = x.size();
  return x.tape->record(BasicTensor<Scalar>(out_shape, std::move(data)), {x},
                        [=](auto& t, const auto& g) {
                          typename BasicTensor<Scalar>::Array gx =
                              BasicTensor<Scalar>::Array::Zero(total);
                          for (Index o = 0; o < outer; ++o) {
                            gx.segment(o * in_stride + begin * inner, block) = g.segment(o * block, block);
                          }
                          t.accumulate(x, gx);
                        });
}

/// Same data, new shape of equal element count.
template <typename Scalar>
BasicVar<Scalar> reshape(BasicVar<Scalar> x, Shape shape) {
  BasicTensor<Scalar> out(std::move(shape), x.value().data());
  return x.tape->record(std::move(out), {x}, [x](auto& t, const auto& g) { t.accumulate(x, g); });
}

// ---------------------------------------------------------------------------
// Spatial ops on [depth, height, width]

namespace detail {

/// Patch matrix: row (c·k + ky)·k + kx, column y·W + x.
template <typename Scalar>
RowMatrix<Scalar> im2col(const BasicTensor<Scalar>& x, Index k) {
  const Index C = x.depth(), H = x.height(), W = x.width(), pad = k / 2;
  RowMatrix<Scalar> cols = RowMatrix<Scalar>::Zero(C * k * k, H * W);
  for (Index c = 0; c < C; ++c) {
    const auto src = x.plane(c);
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        const Index y0 = std::max<Index>(0, pad - ky), y1 = std::min<Index>(H, H + pad - ky);
        const Index x0 = std::max<Index>(0, pad - kx), x1 = std::min<Index>(W, W + pad - kx);
        for (Index y = y0; y < y1; ++y) {
          Scalar* dst = cols.row(row).data() + y * W;
          const Scalar* s = src.row(y + ky - pad).data() + (kx - pad);
          for (Index xx = x0; xx < x1; ++xx) dst[xx] = s[xx];
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
void col2im(const RowMatrix<Scalar>& cols, Index C, Index H, Index W, Index k, Scalar* dx) {
  const Index pad = k / 2;
  for (Index c = 0; c < C; ++c) {
    Scalar* dst_plane = dx + c * H * W;
    for (Index ky = 0; ky < k; ++ky) {
      for (Index kx = 0; kx < k; ++kx) {
        const Index row = (c * k + ky) * k + kx;
        const Index y0 = std::max<Index>(0, pad - ky), y1 = std::min<Index>(H, H + pad - ky);
        const Index x0 = std::max<Index>(0, pad - kx), x1 = std::min<Index>(W, W + pad - kx);
        for (Index y = y0; y < y1; ++y) {
          const Scalar* src = cols.row(row).data() + y * W;
          Scalar* d = dst_plane + (y + ky - pad) * W + (kx - pad);
          for (Index xx = x0; xx < x1; ++xx) d[xx] += src[xx];
        }
      }
    }
  }
}

}  // namespace detail

/// Stride-1 convolution with zero "same" padding.
/// x: [Cin, H, W], weight: [Cout, Cin, k, k] with odd k, bias: [Cout].
template <typename Scalar>
BasicVar<Scalar> conv2d(BasicVar<Scalar> x, BasicVar<Scalar> weight, BasicVar<Scalar> bias) {
  detail::require_rank("conv2d input", x, 3);
  detail::require_rank("conv2d weight", weight, 4);
  const Shape& ws = weight.shape();
  const Index cin = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const Index cout = ws[0], k = ws[2];
  if (ws[1] != cin) {
    throw ConfigError("conv2d: input depth " + std::to_string(cin) + " does not match kernel depth " +
                      std::to_string(ws[1]) + " (input " + shape_string(x.shape()) + ", weight " +
                      shape_string(ws) + ")");
  }
  if (ws[3] != k || k % 2 == 0) {
    throw ConfigError("conv2d: kernel must be square with odd size, got " + shape_string(ws));
  }
  if (bias.shape() != Shape{cout}) {
    throw ConfigError("conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                      std::to_string(cout) + " output channels");
  }
  const RowMatrix<Scalar> cols = detail::im2col(x.value(), k);
  const Eigen::Map<const RowMatrix<Scalar>> wmat(weight.value().data().data(), cout, cin * k * k);
  BasicTensor<Scalar> out = BasicTensor<Scalar>::zeros({cout, H, W});
  Eigen::Map<RowMatrix<Scalar>> omat(out.data().data(), cout, H * W);
  omat.noalias() = wmat * cols;
  omat.colwise() += bias.value().data().matrix();

  return x.tape->record(std::move(out), {x, weight, bias},
                        [x, weight, bias, cin, cout, H, W, k](auto& t, const auto& g) {
                          const Eigen::Map<const RowMatrix<Scalar>> gmat(g.data(), cout, H * W);
                          if (t.requires_grad(weight)) {
                            const RowMatrix<Scalar> c = detail::im2col(t.value(x), k);
                            RowMatrix<Scalar> gw = gmat * c.transpose();
                            t.accumulate(weight, Eigen::Map<const typename BasicTensor<Scalar>::Array>(
                                                     gw.data(), gw.size()));
                          }
                          if (t.requires_grad(bias)) {
                            t.accumulate(bias, gmat.rowwise().sum().array());
                          }
                          if (t.requires_grad(x)) {
                            const Eigen::Map<const RowMatrix<Scalar>> wm(t.value(weight).data().data(),
                                                                         cout, cin * k * k);
                            const RowMatrix<Scalar> gcols = wm.transpose() * gmat;
                            typename BasicTensor<Scalar>::Array gx =
                                BasicTensor<Scalar>::Array::Zero(cin * H * W);
                            detail::col2im(gcols, cin, H, W, k, gx.data());
                            t.accumulate(x, gx);
                          }
                        });
}

/// Each value duplicated into a 2×2 block.
template <typename Scalar>
BasicVar<Scalar> nearest_upsample2(BasicVar<Scalar> x) {
  detail::require_rank("nearest_upsample2", x, 3);
  const Index C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  BasicTensor<Scalar> out = BasicTensor<Scalar>::zeros({C, 2 * H, 2 * W});
  for (Index c = 0; c < C; ++c) {
    const auto src = x.value().plane(c);
    auto dst = out.plane(c);
    for (Index y = 0; y < 2 * H; ++y)
      for (Index xx = 0; xx < 2 * W; ++xx) dst(y, xx) = src(y / 2, xx / 2);
  }
  return x.tape->record(std::move(out), {x}, [x, C, H, W](auto& t, const auto& g) {
    typename BasicTensor<Scalar>::Array gx = BasicTensor<Scalar>::Array::Zero(C * H * W);
    for (Index c = 0; c < C; ++c)
      for (Index y = 0; y < 2 * H; ++y)
        for (Index xx = 0; xx < 2 * W; ++xx)
          gx[(c * H + y / 2) * W + xx / 2] += g[(c * 2 * H + y) * 2 * W + xx];
    t.accumulate(x, gx);
  });
}

/// 2×2 mean pooling; height and width must be even.
template <typename Scalar>
BasicVar<Scalar> mean_pool2(BasicVar<Scalar> x) {
  detail::require_rank("mean_pool2", x, 3);
  const Index C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  if (H % 2 || W % 2) throw ConfigError("mean_pool2: odd extents " + shape_string(x.shape()));
  const Index h = H / 2, w = W / 2;
  BasicTensor<Scalar> out = BasicTensor<Scalar>::zeros({C, h, w});
  for (Index c = 0; c < C; ++c) {
    const auto src = x.value().plane(c);
    auto dst = out.plane(c);
    for (Index y = 0; y < h; ++y)
      for (Index xx = 0; xx < w; ++xx)
        dst(y, xx) = Scalar(0.25) * (src(2 * y, 2 * xx) + src(2 * y, 2 * xx + 1) + src(2 * y + 1, 2 * xx) +
                                     src(2 * y + 1, 2 * xx + 1));
  }
  return x.tape->record(std::move(out), {x}, [x, C, H, W, h, w](auto& t, const auto& g) {
    typename BasicTensor<Scalar>::Array gx(C * H * W);
    for (Index c = 0; c < C; ++c)
      for (Index y = 0; y < H; ++y)
        for (Index xx = 0; xx < W; ++xx) gx[(c * H + y) * W + xx] = Scalar(0.25) * g[(c * h + y / 2) * w + xx / 2];
    t.accumulate(x, gx);
  });
}

// ---------------------------------------------------------------------------
// Gradient checking

/// Builds a scalar root on the given tape from leaves drawn with the rng.
template <typename Scalar>
using GraphBuilder = std::function<BasicVar<Scalar>(BasicTape<Scalar>&, std::mt19937_64&)>;

/// Max over requires_grad leaf elements of |analytic − numeric| / max(1e-4, |analytic|, |numeric|),
/// numeric by central differences with the given step.
template <typename Scalar>
double grad_check(const GraphBuilder<Scalar>& builder, std::uint64_t seed, double step = 1e-5,
                  double sample_fraction = 1.0) {
  std::vector<BasicVar<Scalar>> leaves;
  std::vector<typename BasicTensor<Scalar>::Array> analytic;
  {
    BasicTape<Scalar> tape;
    std::mt19937_64 rng(seed);
    BasicVar<Scalar> root = builder(tape, rng);
    tape.backward(root);
    for (Index i = 0; i < tape.node_count(); ++i) {
      BasicVar<Scalar> v{&tape, i};
      if (tape.is_leaf(v) && tape.requires_grad(v)) analytic.push_back(tape.grad(v));
    }
  }
  auto evaluate = [&](Index leaf, Index element, Scalar delta) {
    BasicTape<Scalar> tape;
    tape.set_probe(leaf, element, delta);
    std::mt19937_64 rng(seed);
    return static_cast<double>(builder(tape, rng).value()[0]);
  };
  std::mt19937_64 pick(seed ^ 0x9e3779b97f4a7c15ULL);
  double worst = 0.0;
  for (std::size_t l = 0; l < analytic.size(); ++l) {
    for (Index e = 0; e < analytic[l].size(); ++e) {
      if (sample_fraction < 1.0 &&
          static_cast<double>(pick() >> 11) * 0x1.0p-53 >= sample_fraction) {
        continue;
      }
      const double plus = evaluate(static_cast<Index>(l), e, static_cast<Scalar>(step));
      const double minus = evaluate(static_cast<Index>(l), e, static_cast<Scalar>(-step));
      const double numeric = (plus - minus) / (2.0 * step);
      const double a = static_cast<double>(analytic[l][e]);
      const double err = std::abs(a - numeric) / std::max({1e-4, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace stegowav
