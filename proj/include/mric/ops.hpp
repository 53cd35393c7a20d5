#pragma once

#include "mric/gemm.hpp"
#include "mric/tape.hpp"
#include "mric/tensor.hpp"

namespace mric {

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b,
                      GradTape<T>* tape = nullptr) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("matmul expects rank-2 operands");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul inner dimension mismatch: " + to_string(a.shape()) + " by " +
                     to_string(b.shape()));
  }
  auto out = BasicTensor<T>::zeros({m, n});
  gemm::nn(m, n, k, a.data().data(), b.data().data(), out.data().data(), false);
  if (should_record(tape, {&a, &b})) {
    tape->record({a, b}, out, [a, b, m, n, k](std::span<const T> g, Gradients<T>& grads) {
      if (a.requires_grad()) {
        auto& ga = grads.slot_for(a);
        // dA[m,k] += dC[m,n] * B[k,n]^T
        gemm::nt(m, k, n, g.data(), b.data().data(), ga.data(), true);
      }
      if (b.requires_grad()) {
        auto& gb = grads.slot_for(b);
        // dB[k,n] += A[m,k]^T * dC[m,n]
        gemm::tn(k, n, m, a.data().data(), g.data(), gb.data(), true);
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b,
                   GradTape<T>* tape = nullptr) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add shape mismatch: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  auto out = BasicTensor<T>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
  if (should_record(tape, {&a, &b})) {
    tape->record({a, b}, out, [a, b](std::span<const T> g, Gradients<T>& grads) {
      if (a.requires_grad()) grads.accumulate(a, g);
      if (b.requires_grad()) grads.accumulate(b, g);
    });
  }
  return out;
}

/// x[m,n] + bias[n] broadcast over rows.
template <typename T>
BasicTensor<T> add_row_bias(const BasicTensor<T>& x, const BasicTensor<T>& bias,
                            GradTape<T>* tape = nullptr) {
  if (x.rank() != 2 || bias.numel() != x.dim(1)) {
    throw ShapeError("bias length " + std::to_string(bias.numel()) +
                     " does not match rows of " + to_string(x.shape()));
  }
  const std::size_t m = x.dim(0), n = x.dim(1);
  auto out = BasicTensor<T>::zeros(x.shape());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + bias[j];
  }
  if (should_record(tape, {&x, &bias})) {
    tape->record({x, bias}, out, [x, bias, m, n](std::span<const T> g, Gradients<T>& grads) {
      if (x.requires_grad()) grads.accumulate(x, g);
      if (bias.requires_grad()) {
        auto& gb = grads.slot_for(bias);
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
        }
      }
    });
  }
  return out;
}

/// Elementwise product.
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b,
                   GradTape<T>* tape = nullptr) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul shape mismatch: " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
  auto out = BasicTensor<T>::zeros(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * b[i];
  if (should_record(tape, {&a, &b})) {
    tape->record({a, b}, out, [a, b](std::span<const T> g, Gradients<T>& grads) {
      if (a.requires_grad()) {
        auto& ga = grads.slot_for(a);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (b.requires_grad()) {
        auto& gb = grads.slot_for(b);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor, GradTape<T>* tape = nullptr) {
  auto out = BasicTensor<T>::zeros(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x[i] * factor;
  if (should_record(tape, {&x})) {
    tape->record({x}, out, [x, factor](std::span<const T> g, Gradients<T>& grads) {
      auto& gx = grads.slot_for(x);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
    });
  }
  return out;
}

/// Sum of all elements as a [1] tensor. Accumulates in double.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x, GradTape<T>* tape = nullptr) {
  double acc = 0.0;
  for (auto v : x.data()) acc += static_cast<double>(v);
  BasicTensor<T> out({1}, static_cast<T>(acc));
  if (should_record(tape, {&x})) {
    tape->record({x}, out, [x](std::span<const T> g, Gradients<T>& grads) {
      auto& gx = grads.slot_for(x);
      for (auto& v : gx) v += g[0];
    });
  }
  return out;
}

/// Same values under a new shape with equal element count.
template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape, GradTape<T>* tape = nullptr) {
  if (mric::numel(shape) != x.numel()) {
    throw ShapeError("cannot reshape " + to_string(x.shape()) + " to " + to_string(shape));
  }
  BasicTensor<T> out(std::move(shape), x.values());
  if (should_record(tape, {&x})) {
    tape->record({x}, out, [x](std::span<const T> g, Gradients<T>& grads) {
      grads.accumulate(x, g);
    });
  }
  return out;
}

/// Central-difference gradient estimate of a scalar function at `x`.
/// `x` is perturbed in place and restored; f must not keep references.
template <typename T, typename F>
std::vector<double> finite_diff_grad(F&& f, BasicTensor<T>& x, double h) {
  if (!(h > 0)) throw ValueError("finite difference step must be positive");
  std::vector<double> grad(x.numel());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T orig = x[i];
    // Divide by the step actually taken after rounding to T.
    x[i] = static_cast<T>(orig + h);
    const double hi = static_cast<double>(x[i]);
    const double up = static_cast<double>(f(x));
    x[i] = static_cast<T>(orig - h);
    const double lo = static_cast<double>(x[i]);
    const double down = static_cast<double>(f(x));
    x[i] = orig;
    grad[i] = (up - down) / (hi - lo);
  }
  return grad;
}

}  // namespace mric
