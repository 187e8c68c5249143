#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dsnet/error.hpp"
#include "dsnet/parallel.hpp"
#include "dsnet/rng.hpp"

namespace dsnet {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

// Product of extents; throws SizeError when it does not fit in size_t.
std::size_t checked_element_count(const Shape& shape);

// Row-major strides; the last axis always has stride 1.
Shape row_major_strides(const Shape& shape);

/// Dense row-major N-dimensional array. Layout is always contiguous, so a
/// tensor is fully described by its shape and its flat data buffer.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), data_(checked_element_count(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_element_count(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + to_string(shape_));
    }
  }

  BasicTensor(Shape shape, std::initializer_list<T> values)
      : BasicTensor(std::move(shape), std::vector<T>(values)) {}

  // Elements drawn independently from normal(mean, stddev).
  static BasicTensor normal(Shape shape, Rng& rng, double mean = 0.0, double stddev = 1.0) {
    BasicTensor t(std::move(shape));
    for (auto& x : t.data_) x = static_cast<T>(rng.normal(mean, stddev));
    return t;
  }

  static BasicTensor uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
    BasicTensor t(std::move(shape));
    for (auto& x : t.data_) x = static_cast<T>(rng.uniform(lo, hi));
    return t;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  Shape strides() const { return row_major_strides(shape_); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  template <typename... Idx>
  T& at(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  const T& at(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  // Same data, new shape with an equal element count.
  BasicTensor reshape(Shape shape) const& {
    BasicTensor t(*this);
    t.reshape_in_place(std::move(shape));
    return t;
  }
  BasicTensor reshape(Shape shape) && {
    reshape_in_place(std::move(shape));
    return std::move(*this);
  }

  void fill(T value) noexcept { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](T x) { return std::isfinite(x); });
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void reshape_in_place(Shape shape) {
    if (checked_element_count(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    shape_ = std::move(shape);
  }

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != shape_.size()) {
      throw ShapeError("index rank " + std::to_string(idx.size()) + " for tensor of shape " +
                       to_string(shape_));
    }
    std::size_t off = 0;
    std::size_t axis = 0;
    for (std::size_t i : idx) {
      if (i >= shape_[axis]) throw ShapeError("index out of range on axis " + std::to_string(axis));
      off = off * shape_[axis] + i;
      ++axis;
    }
    return off;
  }

  Shape shape_;
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

namespace detail {

inline void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

template <typename T, typename Fn>
BasicTensor<T> zip(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op, Fn fn) {
  require_same_shape(a.shape(), b.shape(), op);
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return out;
}

}  // namespace detail

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return detail::zip(a, b, "add", [](T x, T y) { return x + y; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return detail::zip(a, b, "sub", [](T x, T y) { return x - y; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return detail::zip(a, b, "mul", [](T x, T y) { return x * y; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

template <typename T>
BasicTensor<T> max_scalar(const BasicTensor<T>& a, T s) {
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::max(a[i], s);
  return out;
}

// The one permitted broadcast: a [C] vector added along axis 1 of [N, C, ...].
template <typename T>
BasicTensor<T> add_channel(const BasicTensor<T>& a, const BasicTensor<T>& per_channel) {
  if (a.rank() < 2 || per_channel.rank() != 1 || per_channel.dim(0) != a.dim(1)) {
    throw ShapeError("add_channel: cannot broadcast " + to_string(per_channel.shape()) + " over " +
                     to_string(a.shape()));
  }
  const std::size_t n = a.dim(0);
  const std::size_t c = a.dim(1);
  const std::size_t inner = c == 0 || n == 0 ? 0 : a.size() / (n * c);
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (i * c + ch) * inner;
      for (std::size_t k = 0; k < inner; ++k) out[base + k] = a[base + k] + per_channel[ch];
    }
  }
  return out;
}

// c = a * b for a[M,K], b[K,N]. Rows of c are computed independently.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + to_string(a.shape()) + " x " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  BasicTensor<T> c({m, n});
  const T* pa = a.raw();
  const T* pb = b.raw();
  T* pc = c.raw();
  parallel_for(static_cast<std::int64_t>(m), [&](std::int64_t i) {
    T* row = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = pa[i * k + p];
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  });
  return c;
}

// c = a * b^T for a[M,K], b[N,K].
template <typename T>
BasicTensor<T> matmul_bt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_bt: incompatible shapes " + to_string(a.shape()) + " x " +
                     to_string(b.shape()) + "^T");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  BasicTensor<T> c({m, n});
  const T* pa = a.raw();
  const T* pb = b.raw();
  T* pc = c.raw();
  parallel_for(static_cast<std::int64_t>(m * n), [&](std::int64_t idx) {
    const std::size_t i = static_cast<std::size_t>(idx) / n;
    const std::size_t j = static_cast<std::size_t>(idx) % n;
    const T* arow = pa + i * k;
    const T* brow = pb + j * k;
    T acc{0};
    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
    pc[idx] = acc;
  });
  return c;
}

// c = a^T * b for a[K,M], b[K,N].
template <typename T>
BasicTensor<T> matmul_at(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul_at: incompatible shapes " + to_string(a.shape()) + "^T x " +
                     to_string(b.shape()));
  }
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  BasicTensor<T> c({m, n});
  const T* pa = a.raw();
  const T* pb = b.raw();
  T* pc = c.raw();
  parallel_for(static_cast<std::int64_t>(m), [&](std::int64_t i) {
    T* row = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = pa[p * m + i];
      const T* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  });
  return c;
}

template <typename T>
BasicTensor<T> transpose(const BasicTensor<T>& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + to_string(a.shape()));
  const std::size_t m = a.dim(0), n = a.dim(1);
  BasicTensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  return out;
}

enum class ReduceOp { sum, mean, max, argmax };

/// Reduces over `axes` (any order, no duplicates). Reduced axes are dropped
/// unless `keep_dims`, in which case they remain with extent 1. argmax takes
/// exactly one axis and returns indices (first maximum wins) as values of T.
template <typename T>
BasicTensor<T> reduce(const BasicTensor<T>& a, ReduceOp op, std::vector<std::size_t> axes,
                      bool keep_dims = false) {
  std::sort(axes.begin(), axes.end());
  if (std::adjacent_find(axes.begin(), axes.end()) != axes.end()) {
    throw ShapeError("reduce: duplicate axis");
  }
  for (std::size_t ax : axes) {
    if (ax >= a.rank()) {
      throw ShapeError("reduce: axis " + std::to_string(ax) + " invalid for " + to_string(a.shape()));
    }
  }
  if (op == ReduceOp::argmax && axes.size() != 1) {
    throw ShapeError("reduce: argmax needs exactly one axis");
  }

  std::vector<bool> reduced(a.rank(), false);
  std::size_t count = 1;
  for (std::size_t ax : axes) {
    reduced[ax] = true;
    count *= a.dim(ax);
  }
  if (count == 0) throw DomainError("reduce: empty reduction extent over " + to_string(a.shape()));

  Shape out_shape;
  for (std::size_t ax = 0; ax < a.rank(); ++ax) {
    if (!reduced[ax]) {
      out_shape.push_back(a.dim(ax));
    } else if (keep_dims) {
      out_shape.push_back(1);
    }
  }
  BasicTensor<T> out(out_shape);
  const std::size_t out_count = out.size();
  std::vector<bool> seen(out_count, false);
  std::vector<std::size_t> best_pos(op == ReduceOp::argmax ? out_count : 0, 0);

  // Walk the input once in row-major order, mapping each element to its
  // output slot; first-encountered ties therefore win for max/argmax.
  std::vector<std::size_t> idx(a.rank(), 0);
  const std::size_t argmax_axis = op == ReduceOp::argmax ? axes.front() : 0;
  for (std::size_t flat = 0; flat < a.size(); ++flat) {
    std::size_t o = 0;
    for (std::size_t ax = 0; ax < a.rank(); ++ax) {
      if (!reduced[ax]) o = o * a.dim(ax) + idx[ax];
    }
    const T v = a[flat];
    switch (op) {
      case ReduceOp::sum:
      case ReduceOp::mean:
        out[o] += v;
        break;
      case ReduceOp::max:
        if (!seen[o] || v > out[o]) out[o] = v;
        break;
      case ReduceOp::argmax:
        if (!seen[o] || v > out[o]) {
          out[o] = v;
          best_pos[o] = idx[argmax_axis];
        }
        break;
    }
    seen[o] = true;
    for (std::size_t ax = a.rank(); ax-- > 0;) {
      if (++idx[ax] < a.dim(ax)) break;
      idx[ax] = 0;
    }
  }
  if (op == ReduceOp::mean) {
    for (std::size_t i = 0; i < out_count; ++i) out[i] /= static_cast<T>(count);
  } else if (op == ReduceOp::argmax) {
    for (std::size_t i = 0; i < out_count; ++i) out[i] = static_cast<T>(best_pos[i]);
  }
  return out;
}

template <typename T>
BasicTensor<T> reduce_all(const BasicTensor<T>& a, ReduceOp op) {
  std::vector<std::size_t> axes(a.rank());
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  return reduce(a, op, axes);
}

// Index of the first maximum of a flat range.
template <typename T>
std::size_t argmax(std::span<const T> values) {
  if (values.empty()) throw DomainError("argmax of empty range");
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

template <typename T>
T max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  detail::require_same_shape(a.shape(), b.shape(), "max_abs_diff");
  T worst{0};
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace dsnet
