#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lift/error.hpp"

namespace lift {

using Shape = std::vector<int>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

inline void check_shape_valid(const Shape& s) {
  if (s.empty()) throw Error(ErrorCode::InvalidArgument, "rank-0 tensors are not supported");
  for (int e : s)
    if (e <= 0) throw Error(ErrorCode::InvalidArgument, "non-positive extent in shape " + shape_str(s));
}

// Row-major strides.
inline std::vector<int64_t> row_major_strides(const Shape& s) {
  std::vector<int64_t> st(s.size());
  int64_t acc = 1;
  for (int i = static_cast<int>(s.size()) - 1; i >= 0; --i) {
    st[i] = acc;
    acc *= s[i];
  }
  return st;
}

template <typename T>
class Tensor;

// Autodiff record: the op that produced a tensor, the tensors it consumed, and
// a function that pushes the output gradient back into the inputs' gradients.
template <typename T>
struct Node {
  const char* op;
  std::vector<Tensor<T>> inputs;
  std::function<void(const std::vector<T>& out_data, const std::vector<T>& out_grad)> backprop;
};

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node<T>> node;
};

// Dense row-major tensor handle with value semantics over a shared buffer.
// Computed tensors carry a Node; leaf parameters carry requires_grad.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    check_shape_valid(shape);
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->data.assign(static_cast<size_t>(shape_numel(shape)), T(0));
    impl->shape = std::move(shape);
    return Tensor(std::move(impl));
  }

  static Tensor full(Shape shape, T value) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : t.impl_->data) v = value;
    return t;
  }

  static Tensor from_data(Shape shape, std::vector<T> data) {
    check_shape_valid(shape);
    if (static_cast<int64_t>(data.size()) != shape_numel(shape))
      throw Error(ErrorCode::ShapeMismatch,
                  "data length " + std::to_string(data.size()) + " does not fill shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl<T>>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    return Tensor(std::move(impl));
  }

  // Leaf parameter: participates in backward().
  static Tensor param(Shape shape, std::vector<T> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.impl_->requires_grad = true;
    return t;
  }

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  // The handle has shared-buffer semantics: a const Tensor still exposes the
  // mutable underlying storage, like a const shared_ptr.
  const std::vector<T>& data() const { return impl_->data; }
  std::vector<T>& mutable_data() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool b) { impl_->requires_grad = b; }
  bool tracked() const { return impl_->requires_grad || impl_->node != nullptr; }

  const std::shared_ptr<Node<T>>& node() const { return impl_->node; }

  bool has_grad() const { return !impl_->grad.empty(); }
  const std::vector<T>& grad() const {
    if (impl_->grad.empty())
      throw Error(ErrorCode::MissingGradient, "tensor has no gradient (backward not run?)");
    return impl_->grad;
  }
  std::vector<T>& ensure_grad() const {
    if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
    return impl_->grad;
  }
  void zero_grad() const { impl_->grad.clear(); }

  T item() const {
    if (numel() != 1) throw Error(ErrorCode::InvalidArgument, "item() on non-scalar " + shape_str(shape()));
    return impl_->data[0];
  }

  T at(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank())
      throw Error(ErrorCode::InvalidArgument, "index rank mismatch");
    const auto st = row_major_strides(shape());
    int64_t off = 0;
    int d = 0;
    for (int i : idx) {
      if (i < 0 || i >= shape()[d]) throw Error(ErrorCode::InvalidArgument, "index out of range");
      off += st[d++] * i;
    }
    return impl_->data[static_cast<size_t>(off)];
  }

  TensorImpl<T>* impl() const { return impl_.get(); }

  explicit Tensor(std::shared_ptr<TensorImpl<T>> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<TensorImpl<T>> impl_;
};

namespace detail {
inline thread_local bool no_grad_flag = false;
}

// Suppresses graph construction for its scope (inference-only passes).
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::no_grad_flag) { detail::no_grad_flag = true; }
  ~NoGradGuard() { detail::no_grad_flag = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds the result of an op, attaching an autodiff node only when some input
// is tracked.
template <typename T>
Tensor<T> make_op_result(Shape shape, std::vector<T> data, const char* op, std::vector<Tensor<T>> inputs,
                         std::function<void(const std::vector<T>&, const std::vector<T>&)> backprop) {
  auto impl = std::make_shared<TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool tracked = false;
  if (!detail::no_grad_flag)
    for (const auto& in : inputs) tracked = tracked || in.tracked();
  if (tracked) {
    impl->node = std::make_shared<Node<T>>(Node<T>{op, std::move(inputs), std::move(backprop)});
  }
  return Tensor<T>(std::move(impl));
}

namespace detail {

template <typename T>
using EMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<EMat<T>>;
template <typename T>
using CMatMap = Eigen::Map<const EMat<T>>;

template <typename T>
inline void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw Error(ErrorCode::ShapeMismatch,
                std::string(op) + ": shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Adds src into the tensor's gradient buffer.
template <typename T>
inline void accumulate(Tensor<T> t, const std::vector<T>& src) {
  if (!t.tracked()) return;
  auto& g = t.ensure_grad();
  for (size_t i = 0; i < g.size(); ++i) g[i] += src[i];
}

}  // namespace detail

// ---- elementwise ----

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "add");
  std::vector<T> out(a.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] += b.data()[i];
  return make_op_result<T>(
      a.shape(), std::move(out), "add", {a, b},
      [a, b](const std::vector<T>&, const std::vector<T>& g) mutable {
        detail::accumulate(a, g);
        detail::accumulate(b, g);
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "sub");
  std::vector<T> out(a.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] -= b.data()[i];
  return make_op_result<T>(
      a.shape(), std::move(out), "sub", {a, b},
      [a, b](const std::vector<T>&, const std::vector<T>& g) mutable {
        detail::accumulate(a, g);
        if (b.tracked()) {
          auto& gb = b.ensure_grad();
          for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
        }
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a, b, "mul");
  std::vector<T> out(a.data());
  for (size_t i = 0; i < out.size(); ++i) out[i] *= b.data()[i];
  return make_op_result<T>(
      a.shape(), std::move(out), "mul", {a, b},
      [a, b](const std::vector<T>&, const std::vector<T>& g) mutable {
        if (a.tracked()) {
          auto& ga = a.ensure_grad();
          for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * b.data()[i];
        }
        if (b.tracked()) {
          auto& gb = b.ensure_grad();
          for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * a.data()[i];
        }
      });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.data());
  for (auto& v : out) v *= s;
  return make_op_result<T>(
      a.shape(), std::move(out), "scale", {a},
      [a, s](const std::vector<T>&, const std::vector<T>& g) mutable {
        if (a.tracked()) {
          auto& ga = a.ensure_grad();
          for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * s;
        }
      });
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }

// ---- matmul (2-D) ----

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    throw Error(ErrorCode::ShapeMismatch,
                "matmul: shapes " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<T> out(static_cast<size_t>(m) * n);
  detail::CMatMap<T> A(a.data().data(), m, k), B(b.data().data(), k, n);
  detail::MatMap<T>(out.data(), m, n).noalias() = A * B;
  return make_op_result<T>(
      {m, n}, std::move(out), "matmul", {a, b},
      [a, b, m, k, n](const std::vector<T>&, const std::vector<T>& g) mutable {
        detail::CMatMap<T> A(a.data().data(), m, k), B(b.data().data(), k, n), G(g.data(), m, n);
        if (a.tracked()) detail::MatMap<T>(a.ensure_grad().data(), m, k).noalias() += G * B.transpose();
        if (b.tracked()) detail::MatMap<T>(b.ensure_grad().data(), k, n).noalias() += A.transpose() * G;
      });
}

// ---- shape ops ----

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
  check_shape_valid(new_shape);
  if (shape_numel(new_shape) != a.numel())
    throw Error(ErrorCode::ShapeMismatch,
                "reshape: " + shape_str(a.shape()) + " to " + shape_str(new_shape));
  return make_op_result<T>(
      std::move(new_shape), std::vector<T>(a.data()), "reshape", {a},
      [a](const std::vector<T>&, const std::vector<T>& g) mutable { detail::accumulate(a, g); });
}

namespace detail {

// dst[perm-reordered index] = src[index]; shape is the source shape.
template <typename T>
void permute_raw(const Shape& shape, const std::vector<int>& perm, const std::vector<T>& src,
                 std::vector<T>& dst) {
  const int r = static_cast<int>(shape.size());
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = shape[perm[i]];
  const auto in_strides = row_major_strides(shape);
  std::vector<int64_t> mapped(r);
  for (int i = 0; i < r; ++i) mapped[i] = in_strides[perm[i]];
  std::vector<int> idx(r, 0);
  const int64_t n = shape_numel(shape);
  int64_t src_off = 0;
  for (int64_t o = 0; o < n; ++o) {
    dst[o] = src[src_off];
    for (int d = r - 1; d >= 0; --d) {
      if (++idx[d] < out_shape[d]) {
        src_off += mapped[d];
        break;
      }
      idx[d] = 0;
      src_off -= mapped[d] * (out_shape[d] - 1);
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> permute(const Tensor<T>& a, std::vector<int> perm) {
  const int r = a.rank();
  if (static_cast<int>(perm.size()) != r)
    throw Error(ErrorCode::InvalidArgument, "permute: axis list rank mismatch");
  std::vector<bool> seen(r, false);
  for (int p : perm) {
    if (p < 0 || p >= r || seen[p]) throw Error(ErrorCode::InvalidArgument, "permute: invalid axis list");
    seen[p] = true;
  }
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) out_shape[i] = a.shape()[perm[i]];
  std::vector<T> out(a.data().size());
  detail::permute_raw(a.shape(), perm, a.data(), out);
  std::vector<int> inv(r);
  for (int i = 0; i < r; ++i) inv[perm[i]] = i;
  Shape fwd_out_shape = out_shape;
  return make_op_result<T>(
      std::move(out_shape), std::move(out), "permute", {a},
      [a, inv, fwd_out_shape](const std::vector<T>&, const std::vector<T>& g) mutable {
        if (!a.tracked()) return;
        std::vector<T> gi(g.size());
        detail::permute_raw(fwd_out_shape, inv, g, gi);
        detail::accumulate(a, gi);
      });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  return permute(a, {1, 0});
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) throw Error(ErrorCode::InvalidArgument, "concat: no inputs");
  const int r = parts[0].rank();
  if (axis < 0 || axis >= r) throw Error(ErrorCode::InvalidArgument, "concat: axis out of range");
  Shape out_shape = parts[0].shape();
  for (size_t p = 1; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    if (static_cast<int>(s.size()) != r)
      throw Error(ErrorCode::ShapeMismatch, "concat: rank mismatch " + shape_str(s));
    for (int d = 0; d < r; ++d)
      if (d != axis && s[d] != out_shape[d])
        throw Error(ErrorCode::ShapeMismatch,
                    "concat: shapes " + shape_str(out_shape) + " vs " + shape_str(s));
    out_shape[axis] += s[axis];
  }
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= out_shape[d];
  for (int d = axis + 1; d < r; ++d) inner *= out_shape[d];
  std::vector<T> out(static_cast<size_t>(shape_numel(out_shape)));
  const int64_t out_row = static_cast<int64_t>(out_shape[axis]) * inner;
  int64_t off = 0;
  for (const auto& part : parts) {
    const int64_t blk = static_cast<int64_t>(part.shape()[axis]) * inner;
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(part.data().data() + o * blk, blk, out.data() + o * out_row + off);
    off += blk;
  }
  std::vector<int64_t> blocks;
  for (const auto& part : parts) blocks.push_back(static_cast<int64_t>(part.shape()[axis]) * inner);
  std::vector<Tensor<T>> inputs(parts);
  return make_op_result<T>(
      out_shape, std::move(out), "concat", std::move(inputs),
      [parts, blocks, outer, out_row](const std::vector<T>&, const std::vector<T>& g) mutable {
        int64_t off = 0;
        for (size_t p = 0; p < parts.size(); ++p) {
          const int64_t blk = blocks[p];
          if (parts[p].tracked()) {
            auto& gp = parts[p].ensure_grad();
            for (int64_t o = 0; o < outer; ++o)
              for (int64_t i = 0; i < blk; ++i) gp[o * blk + i] += g[o * out_row + off + i];
          }
          off += blk;
        }
      });
}

// Split along an axis into explicitly sized parts.
template <typename T>
std::vector<Tensor<T>> split_sizes(const Tensor<T>& a, int axis, const std::vector<int>& sizes) {
  const int r = a.rank();
  if (axis < 0 || axis >= r) throw Error(ErrorCode::InvalidArgument, "split: axis out of range");
  int total = 0;
  for (int s : sizes) {
    if (s <= 0) throw Error(ErrorCode::InvalidArgument, "split: non-positive part size");
    total += s;
  }
  if (total != a.shape()[axis])
    throw Error(ErrorCode::ShapeMismatch, "split: part sizes sum to " + std::to_string(total) +
                                              " but axis extent is " + std::to_string(a.shape()[axis]));
  int64_t outer = 1, inner = 1;
  for (int d = 0; d < axis; ++d) outer *= a.shape()[d];
  for (int d = axis + 1; d < r; ++d) inner *= a.shape()[d];
  const int64_t in_row = static_cast<int64_t>(a.shape()[axis]) * inner;
  std::vector<Tensor<T>> outs;
  int64_t off = 0;
  for (int s : sizes) {
    Shape out_shape = a.shape();
    out_shape[axis] = s;
    const int64_t blk = static_cast<int64_t>(s) * inner;
    std::vector<T> out(static_cast<size_t>(outer * blk));
    for (int64_t o = 0; o < outer; ++o)
      std::copy_n(a.data().data() + o * in_row + off, blk, out.data() + o * blk);
    const int64_t part_off = off;
    outs.push_back(make_op_result<T>(
        std::move(out_shape), std::move(out), "split", {a},
        [a, outer, inner, in_row, blk, part_off](const std::vector<T>&, const std::vector<T>& g) mutable {
          if (!a.tracked()) return;
          auto& ga = a.ensure_grad();
          for (int64_t o = 0; o < outer; ++o)
            for (int64_t i = 0; i < blk; ++i) ga[o * in_row + part_off + i] += g[o * blk + i];
        }));
    off += blk;
  }
  return outs;
}

// Split into `parts` equal slices; the extent must divide evenly.
template <typename T>
std::vector<Tensor<T>> split(const Tensor<T>& a, int axis, int parts) {
  if (parts <= 0) throw Error(ErrorCode::InvalidArgument, "split: parts must be positive");
  if (axis < 0 || axis >= a.rank()) throw Error(ErrorCode::InvalidArgument, "split: axis out of range");
  if (a.shape()[axis] % parts != 0)
    throw Error(ErrorCode::ShapeMismatch,
                "split: extent " + std::to_string(a.shape()[axis]) + " not divisible into " +
                    std::to_string(parts) + " parts (pass explicit sizes)");
  return split_sizes(a, axis, std::vector<int>(parts, a.shape()[axis] / parts));
}

// ---- reductions ----

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T acc = 0;
  for (T v : a.data()) acc += v;
  return make_op_result<T>(
      {1}, {acc}, "sum", {a},
      [a](const std::vector<T>&, const std::vector<T>& g) mutable {
        if (!a.tracked()) return;
        auto& ga = a.ensure_grad();
        for (auto& v : ga) v += g[0];
      });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.numel()));
}

// Adds a length-C vector to every slice along the leading axis
// (per-channel bias for matrices C x T and feature maps C x H x W).
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& b) {
  if (b.rank() != 1 || b.shape()[0] != x.shape()[0])
    throw Error(ErrorCode::ShapeMismatch,
                "add_bias: bias " + shape_str(b.shape()) + " vs input " + shape_str(x.shape()));
  const int c = x.shape()[0];
  const int64_t inner = x.numel() / c;
  std::vector<T> out(x.data());
  for (int ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < inner; ++i) out[ch * inner + i] += b.data()[ch];
  return make_op_result<T>(
      x.shape(), std::move(out), "add_bias", {x, b},
      [x, b, c, inner](const std::vector<T>&, const std::vector<T>& g) mutable {
        detail::accumulate(x, g);
        if (b.tracked()) {
          auto& gb = b.ensure_grad();
          for (int ch = 0; ch < c; ++ch) {
            T acc = 0;
            for (int64_t i = 0; i < inner; ++i) acc += g[ch * inner + i];
            gb[ch] += acc;
          }
        }
      });
}

// ---- reverse-mode sweep ----

// Populates gradients of every tracked tensor reachable from a scalar loss.
// Gradients accumulate across repeated calls until zeroed.
template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    throw Error(ErrorCode::InvalidArgument, "backward requires a scalar loss, got " + shape_str(loss.shape()));
  if (!loss.node())
    throw Error(ErrorCode::InvalidArgument, "backward through an untracked graph");

  // Post-order over the op DAG; reversed it is a valid topological order.
  std::vector<TensorImpl<T>*> order;
  std::unordered_set<TensorImpl<T>*> visited;
  struct Frame {
    TensorImpl<T>* impl;
    size_t next;
  };
  std::vector<Frame> stack{{loss.impl(), 0}};
  visited.insert(loss.impl());
  while (!stack.empty()) {
    Frame& f = stack.back();
    Node<T>* node = f.impl->node.get();
    if (node && f.next < node->inputs.size()) {
      TensorImpl<T>* in = node->inputs[f.next++].impl();
      if (in->node && !visited.count(in)) {
        visited.insert(in);
        stack.push_back({in, 0});
      }
    } else {
      order.push_back(f.impl);
      stack.pop_back();
    }
  }

  // Intermediate gradients are sweep-local; leaf parameter gradients persist
  // and accumulate across calls.
  for (TensorImpl<T>* impl : order) impl->grad.clear();
  loss.impl()->grad.assign(1, T(1));

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl<T>* impl = *it;
    if (impl->grad.empty()) continue;  // did not contribute to the loss
    impl->node->backprop(impl->data, impl->grad);
  }
}

}  // namespace lift
