#pragma once

// Shared test helpers: scratch directories, synthetic images and a
// finite-difference gradient checker.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "mric.hpp"

namespace mric::fixtures {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "mric-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Gray image with a bright square in the upper-left (tumor) or lower-right
/// (healthy) quadrant over low noise. Values are raw 0..255.
inline Tensor blob_image(std::size_t size, bool tumor, std::uint64_t seed) {
  Tensor img({size, size, 1}, 0.0f);
  Rng rng(seed);
  const std::size_t q = size / 2;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const bool inside = tumor ? (y < q && x < q) : (y >= q && x >= q);
      img[y * size + x] = static_cast<float>((inside ? 200.0 : 20.0) + 30.0 * rng.uniform());
    }
  }
  return img;
}

/// Writes `per_class` PNGs per label under root/{tumor,healthy}.
inline void write_dataset(const fs::path& root, std::size_t per_class, std::size_t size = 64,
                          std::uint64_t seed = 1) {
  for (bool tumor : {true, false}) {
    const fs::path dir = root / (tumor ? "tumor" : "healthy");
    fs::create_directories(dir);
    for (std::size_t i = 0; i < per_class; ++i) {
      write_png(dir / ("img" + std::to_string(i) + ".png"), blob_image(size, tumor, seed * 1000 + i * 2 + tumor));
    }
  }
}

/// Same scene as blob_image but already scaled to [0, 1] with 3 channels.
inline Tensor model_input(std::size_t size, bool tumor, std::uint64_t seed) {
  const Tensor gray = blob_image(size, tumor, seed);
  Tensor out({size, size, 3}, 0.0f);
  for (std::size_t i = 0; i < size * size; ++i) {
    for (std::size_t c = 0; c < 3; ++c) out[i * 3 + c] = gray[i] / 255.0f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient checking

/// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are zero
/// up to rounding from producing huge ratios.
inline double relative_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

using LossFn = std::function<BasicTensor<double>(GradTape<double>*)>;

/// Largest relative error between tape gradients and central differences
/// over every element of every tensor in `wrt`.
inline double gradient_check(const LossFn& loss_fn, std::vector<BasicTensor<double>> wrt,
                             double h = 1e-6) {
  for (auto& t : wrt) t.set_requires_grad(true);
  GradTape<double> tape;
  const auto loss = loss_fn(&tape);
  backward(loss, tape);
  double worst = 0.0;
  for (auto& t : wrt) {
    const std::vector<double> analytic = *t.grad();
    const auto numeric = finite_diff_grad([&](const BasicTensor<double>&) { return loss_fn(nullptr).item(); },
                                          t, h);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      worst = std::max(worst, relative_error(analytic[i], numeric[i]));
    }
  }
  return worst;
}

inline BasicTensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  BasicTensor<double> t(std::move(shape), 0.0);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Weighted sum sum(out * r) with fixed random r, so every output element
/// gets a distinct upstream gradient.
inline BasicTensor<double> probe_loss(const BasicTensor<double>& out, const BasicTensor<double>& r,
                                      GradTape<double>* tape) {
  return sum(mul(out, r, tape), tape);
}

/// Smallest |v| over the tensor; instances too close to a ReLU kink are
/// re-drawn because central differences straddle the kink there.
inline double min_abs(const BasicTensor<double>& t) {
  double m = INFINITY;
  for (auto v : t.data()) m = std::min(m, std::abs(v));
  return m;
}

/// Smallest gap between the largest and second-largest value of any 2x2
/// pooling window.
inline double min_pool_gap(const BasicTensor<double>& t) {
  const std::size_t h = t.dim(0), w = t.dim(1), c = t.dim(2);
  double gap = INFINITY;
  for (std::size_t y = 0; y + 1 < h; y += 2) {
    for (std::size_t x = 0; x + 1 < w; x += 2) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::vector<double> v;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) v.push_back(t[((y + dy) * w + x + dx) * c + ch]);
        }
        std::sort(v.begin(), v.end());
        gap = std::min(gap, v[3] - v[2]);
      }
    }
  }
  return gap;
}

}  // namespace mric::fixtures
