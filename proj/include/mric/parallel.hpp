#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace mric {

/// Worker cap: MRI_CLASSIFY_THREADS if set and positive, else the hardware
/// concurrency.
inline std::size_t worker_count() {
  static const std::size_t count = [] {
    if (const char* env = std::getenv("MRI_CLASSIFY_THREADS")) {
      try {
        long v = std::stol(env);
        if (v > 0) return static_cast<std::size_t>(v);
      } catch (...) {
      }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
  }();
  return count;
}

/// Runs fn(begin, end) over contiguous chunks of [0, n). Each index is
/// handled by exactly one call, so results never depend on the worker count
/// as long as fn writes disjoint outputs per index.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t grain, Fn&& fn) {
  const std::size_t workers =
      std::min(worker_count(), std::max<std::size_t>(1, n / std::max<std::size_t>(grain, 1)));
  if (workers <= 1) {
    if (n) fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::size_t{0}, std::min(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace mric
