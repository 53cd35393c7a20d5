#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mric/error.hpp"

namespace mric {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

namespace detail {
inline std::uint64_t next_tensor_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("invalid shape: no dimensions");
  for (auto d : shape) {
    if (d == 0) throw ShapeError("invalid shape: zero dimension in " + to_string(shape));
  }
}
}  // namespace detail

/// Dense row-major tensor with an optional gradient buffer.
///
/// A BasicTensor is a handle: copies share storage, `clone()` makes a deep
/// copy. Values are only mutated in place by optimizers and weight loaders
/// through `data()`. Every tensor carries a process-unique id that the
/// gradient tape uses to key gradients.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  BasicTensor(Shape shape, T fill) {
    detail::check_shape(shape);
    const auto n = mric::numel(shape);
    impl_ = std::make_shared<Impl>(std::move(shape), std::vector<T>(n, fill));
  }

  BasicTensor(Shape shape, std::vector<T> values) {
    detail::check_shape(shape);
    if (values.size() != mric::numel(shape)) {
      throw ShapeError("dimension mismatch: " + std::to_string(values.size()) +
                       " values for shape " + to_string(shape));
    }
    impl_ = std::make_shared<Impl>(std::move(shape), std::move(values));
  }

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape), T{0}); }

  bool defined() const noexcept { return impl_ != nullptr; }
  std::uint64_t id() const noexcept { return impl_ ? impl_->id : 0; }

  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const { return impl_->shape.at(i); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  const std::vector<T>& values() const { return impl_->data; }

  T& operator[](std::size_t i) { return impl_->data[i]; }
  const T& operator[](std::size_t i) const { return impl_->data[i]; }

  /// Row-major element access; the index count must equal rank().
  T& at(std::initializer_list<std::size_t> idx) { return impl_->data[offset(idx)]; }
  const T& at(std::initializer_list<std::size_t> idx) const {
    return impl_->data[offset(idx)];
  }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool on) {
    impl_->requires_grad = on;
    return *this;
  }

  /// True for tensors created directly, false for results of recorded ops.
  bool is_leaf() const { return impl_->leaf; }
  void mark_non_leaf() { impl_->leaf = false; }

  const std::optional<std::vector<T>>& grad() const { return impl_->grad; }
  void set_grad(std::vector<T> g) {
    if (g.size() != numel()) throw ShapeError("gradient length mismatch");
    impl_->grad = std::move(g);
  }
  void zero_grad() { impl_->grad = std::vector<T>(numel(), T{0}); }
  void clear_grad() { impl_->grad.reset(); }

  BasicTensor clone() const {
    BasicTensor out(impl_->shape, impl_->data);
    out.impl_->requires_grad = impl_->requires_grad;
    return out;
  }

  bool all_finite() const {
    return std::all_of(impl_->data.begin(), impl_->data.end(),
                       [](T v) { return std::isfinite(v); });
  }

 private:
  struct Impl {
    Impl(Shape s, std::vector<T> d)
        : id(detail::next_tensor_id()), shape(std::move(s)), data(std::move(d)) {}
    std::uint64_t id;
    Shape shape;
    std::vector<T> data;
    bool requires_grad = false;
    bool leaf = true;
    std::optional<std::vector<T>> grad;
  };

  std::size_t offset(std::initializer_list<std::size_t> idx) const {
    const auto& s = impl_->shape;
    if (idx.size() != s.size()) throw ShapeError("index rank mismatch");
    std::size_t off = 0;
    std::size_t d = 0;
    for (auto i : idx) {
      if (i >= s[d]) throw ShapeError("index out of range");
      off = off * s[d] + i;
      ++d;
    }
    return off;
  }

  std::shared_ptr<Impl> impl_;
};

using Tensor = BasicTensor<float>;

}  // namespace mric
