#pragma once

// Row-major single-threaded-per-row matrix kernels. Every output element is
// reduced in a fixed order, so results are bit-identical for any worker
// count.

#include <cstddef>

#include "mric/parallel.hpp"

namespace mric::gemm {

namespace detail {

template <typename T>
inline T dot(const T* a, const T* b, std::size_t n) {
  constexpr std::size_t kLanes = 16;
  T acc[kLanes] = {};
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += a[k + l] * b[k + l];
  }
  T tail{0};
  for (; k < n; ++k) tail += a[k] * b[k];
  for (std::size_t w = kLanes / 2; w > 0; w /= 2) {
    for (std::size_t l = 0; l < w; ++l) acc[l] += acc[l + w];
  }
  return acc[0] + tail;
}

template <typename T>
inline void dot4(const T* a, const T* b0, const T* b1, const T* b2, const T* b3,
                 std::size_t n, T* out) {
  constexpr std::size_t kLanes = 16;
  T c0[kLanes] = {}, c1[kLanes] = {}, c2[kLanes] = {}, c3[kLanes] = {};
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    for (std::size_t l = 0; l < kLanes; ++l) {
      const T av = a[k + l];
      c0[l] += av * b0[k + l];
      c1[l] += av * b1[k + l];
      c2[l] += av * b2[k + l];
      c3[l] += av * b3[k + l];
    }
  }
  T t0{0}, t1{0}, t2{0}, t3{0};
  for (; k < n; ++k) {
    t0 += a[k] * b0[k];
    t1 += a[k] * b1[k];
    t2 += a[k] * b2[k];
    t3 += a[k] * b3[k];
  }
  for (std::size_t w = kLanes / 2; w > 0; w /= 2) {
    for (std::size_t l = 0; l < w; ++l) {
      c0[l] += c0[l + w];
      c1[l] += c1[l + w];
      c2[l] += c2[l + w];
      c3[l] += c3[l + w];
    }
  }
  out[0] = c0[0] + t0;
  out[1] = c1[0] + t1;
  out[2] = c2[0] + t2;
  out[3] = c3[0] + t3;
}

}  // namespace detail

/// C[m,n] (+)= A[m,k] * B[n,k]^T. Rows of both operands are contiguous,
/// which makes this the fast path when k is large.
template <typename T>
void nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
        bool accumulate) {
  parallel_for(m, 16, [=](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      const T* ai = a + i * k;
      T* ci = c + i * n;
      std::size_t j = 0;
      T tmp[4];
      for (; j + 4 <= n; j += 4) {
        detail::dot4(ai, b + j * k, b + (j + 1) * k, b + (j + 2) * k, b + (j + 3) * k, k, tmp);
        for (int q = 0; q < 4; ++q) ci[j + q] = accumulate ? ci[j + q] + tmp[q] : tmp[q];
      }
      for (; j < n; ++j) {
        const T v = detail::dot(ai, b + j * k, k);
        ci[j] = accumulate ? ci[j] + v : v;
      }
    }
  });
}

/// C[m,n] (+)= A[m,k] * B[k,n]. Vectorizes along n.
template <typename T>
void nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
        bool accumulate) {
  parallel_for(m, 4, [=](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      T* ci = c + i * n;
      if (!accumulate) {
        for (std::size_t j = 0; j < n; ++j) ci[j] = T{0};
      }
      const T* ai = a + i * k;
      for (std::size_t t = 0; t < k; ++t) {
        const T av = ai[t];
        if (av == T{0}) continue;
        const T* bt = b + t * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
      }
    }
  });
}

/// C[m,n] (+)= A[k,m]^T * B[k,n]. Parallel over rows of C.
template <typename T>
void tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
        bool accumulate) {
  parallel_for(m, 4, [=](std::size_t r0, std::size_t r1) {
    if (!accumulate) {
      for (std::size_t i = r0; i < r1; ++i) {
        for (std::size_t j = 0; j < n; ++j) c[i * n + j] = T{0};
      }
    }
    for (std::size_t i = r0; i < r1; ++i) {
      T* ci = c + i * n;
      for (std::size_t t = 0; t < k; ++t) {
        const T av = a[t * m + i];
        if (av == T{0}) continue;
        const T* bt = b + t * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bt[j];
      }
    }
  });
}

}  // namespace mric::gemm
