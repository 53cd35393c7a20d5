#pragma once

// Shift and rotation augmentation with zero fill. Each output draws one
// transform from a seed derived from (seed, output index), so the recorded
// parameters fully reproduce the image.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "mric/random.hpp"
#include "mric/tensor.hpp"

namespace mric {

enum class AugmentKind { kHorizontalShift, kVerticalShift, kRotation };

inline const char* to_string(AugmentKind k) {
  switch (k) {
    case AugmentKind::kHorizontalShift: return "hshift";
    case AugmentKind::kVerticalShift: return "vshift";
    case AugmentKind::kRotation: return "rotate";
  }
  return "?";
}

inline AugmentKind parse_augment_kind(const std::string& s) {
  if (s == "hshift") return AugmentKind::kHorizontalShift;
  if (s == "vshift") return AugmentKind::kVerticalShift;
  if (s == "rotate") return AugmentKind::kRotation;
  throw ValueError("unknown augmentation kind: " + s);
}

struct AugmentParams {
  AugmentKind kind = AugmentKind::kHorizontalShift;
  int dx = 0;          // columns, positive moves content right
  int dy = 0;          // rows, positive moves content down
  double angle = 0.0;  // degrees, positive turns content clockwise on screen
  std::uint64_t seed = 0;

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

struct AugmentOptions {
  int max_shift_px = 24;
  double max_angle_deg = 15.0;
};

struct AugmentedImage {
  Tensor image;
  AugmentParams params;
};

/// out(r, c) = in(r - dy, c - dx) where in bounds, zero elsewhere.
inline Tensor shift_image(const Tensor& image, int dx, int dy) {
  const auto h = static_cast<std::ptrdiff_t>(image.dim(0));
  const auto w = static_cast<std::ptrdiff_t>(image.dim(1));
  const std::size_t c = image.dim(2);
  Tensor out(image.shape(), 0.0f);
  for (std::ptrdiff_t r = 0; r < h; ++r) {
    const std::ptrdiff_t sr = r - dy;
    if (sr < 0 || sr >= h) continue;
    for (std::ptrdiff_t col = 0; col < w; ++col) {
      const std::ptrdiff_t sc = col - dx;
      if (sc < 0 || sc >= w) continue;
      for (std::size_t ch = 0; ch < c; ++ch) {
        out[(static_cast<std::size_t>(r * w + col)) * c + ch] =
            image[(static_cast<std::size_t>(sr * w + sc)) * c + ch];
      }
    }
  }
  return out;
}

/// Rotation about the image center with bilinear sampling; samples that
/// fall outside the source are zero.
inline Tensor rotate_image(const Tensor& image, double angle_deg) {
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  Tensor out(image.shape(), 0.0f);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t col = 0; col < w; ++col) {
      const double ox = static_cast<double>(col) - cx;
      const double oy = static_cast<double>(r) - cy;
      const double sx = cs * ox + sn * oy + cx;
      const double sy = -sn * ox + cs * oy + cy;
      if (sx < 0.0 || sy < 0.0 || sx > static_cast<double>(w - 1) ||
          sy > static_cast<double>(h - 1)) {
        continue;
      }
      const auto x0 = static_cast<std::size_t>(sx);
      const auto y0 = static_cast<std::size_t>(sy);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const std::size_t y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - static_cast<double>(x0);
      const double fy = sy - static_cast<double>(y0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double a = image[(y0 * w + x0) * c + ch];
        const double b = image[(y0 * w + x1) * c + ch];
        const double d = image[(y1 * w + x0) * c + ch];
        const double e = image[(y1 * w + x1) * c + ch];
        const double top = a + (b - a) * fx;
        const double bottom = d + (e - d) * fx;
        out[(r * w + col) * c + ch] = static_cast<float>(top + (bottom - top) * fy);
      }
    }
  }
  return out;
}

inline Tensor apply_augmentation(const Tensor& image, const AugmentParams& p) {
  switch (p.kind) {
    case AugmentKind::kHorizontalShift:
    case AugmentKind::kVerticalShift:
      return shift_image(image, p.dx, p.dy);
    case AugmentKind::kRotation:
      return rotate_image(image, p.angle);
  }
  return image;
}

/// Parameters of output `index` for a given seed.
inline AugmentParams draw_augmentation(std::uint64_t seed, std::size_t index,
                                       const AugmentOptions& opts = {}) {
  AugmentParams p;
  p.seed = derive_seed(seed, "augment", index);
  Rng rng(p.seed);
  auto signed_shift = [&] {
    const int mag = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.max_shift_px)));
    return rng.below(2) ? mag : -mag;
  };
  switch (rng.below(3)) {
    case 0:
      p.kind = AugmentKind::kHorizontalShift;
      p.dx = signed_shift();
      break;
    case 1:
      p.kind = AugmentKind::kVerticalShift;
      p.dy = signed_shift();
      break;
    default:
      p.kind = AugmentKind::kRotation;
      p.angle = rng.uniform(-opts.max_angle_deg, opts.max_angle_deg);
      break;
  }
  return p;
}

/// k augmented copies of `image`, each with its parameter record.
inline std::vector<AugmentedImage> augment(const Tensor& image, std::size_t k, std::uint64_t seed,
                                           const AugmentOptions& opts = {}) {
  std::vector<AugmentedImage> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    auto params = draw_augmentation(seed, j, opts);
    out.push_back({apply_augmentation(image, params), params});
  }
  return out;
}

}  // namespace mric
