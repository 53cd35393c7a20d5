#pragma once

// Layer vocabulary of the VGG-19 classifier. Activations are channel-last
// [H, W, C]; dense activations are row vectors [1, features].

#include <cmath>
#include <cstdint>

#include "mric/gemm.hpp"
#include "mric/ops.hpp"
#include "mric/random.hpp"

namespace mric {

enum class Mode { kTraining, kInference };

/// 3x3 kernels, stride 1, zero padding 1: spatial size is preserved.
template <typename T>
struct Conv2dParams {
  BasicTensor<T> kernels;  // [out_channels, in_channels, 3, 3]
  BasicTensor<T> bias;     // [out_channels]

  std::size_t in_channels() const { return kernels.dim(1); }
  std::size_t out_channels() const { return kernels.dim(0); }
};

template <typename T>
struct DenseParams {
  BasicTensor<T> weights;  // [in_features, out_features]
  BasicTensor<T> bias;     // [out_features]

  std::size_t in_features() const { return weights.dim(0); }
  std::size_t out_features() const { return weights.dim(1); }
};

struct DropoutState {
  double rate = 0.0;  // in [0, 1)
  Mode mode = Mode::kInference;
  std::uint64_t rng_seed = 0;
};

namespace detail {

// col[(y*W + x), (ky*3 + kx)*C + c] = in[y+ky-1, x+kx-1, c], zero outside.
template <typename T>
std::vector<T> im2col3x3(const T* in, std::size_t h, std::size_t w, std::size_t c) {
  const std::size_t row = 9 * c;
  std::vector<T> col(h * w * row, T{0});
  parallel_for(h, 8, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        T* dst = col.data() + (y * w + x) * row;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
            const T* src = in + (static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)) * c;
            std::copy(src, src + c, dst + (ky * 3 + kx) * c);
          }
        }
      }
    }
  });
  return col;
}

template <typename T>
void col2im3x3(const T* col, std::size_t h, std::size_t w, std::size_t c, T* out) {
  const std::size_t row = 9 * c;
  // Each output row only gathers from three col rows, so split by output row.
  parallel_for(h, 8, [&](std::size_t y0, std::size_t y1) {
    for (std::size_t y = y0; y < y1; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        T* dst = out + (y * w + x) * c;
        // Source pixel (py, px) used tap (ky, kx) with py + ky - 1 == y.
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const std::ptrdiff_t py = static_cast<std::ptrdiff_t>(y) + 1 - static_cast<std::ptrdiff_t>(ky);
          if (py < 0 || py >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const std::ptrdiff_t px = static_cast<std::ptrdiff_t>(x) + 1 - static_cast<std::ptrdiff_t>(kx);
            if (px < 0 || px >= static_cast<std::ptrdiff_t>(w)) continue;
            const T* src = col + (static_cast<std::size_t>(py) * w + static_cast<std::size_t>(px)) * row +
                           (ky * 3 + kx) * c;
            for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
          }
        }
      }
    }
  });
}

// Kernel [O, C, 3, 3] -> row-per-output [O, (ky*3+kx)*C + c].
template <typename T>
std::vector<T> kernel_rows(const BasicTensor<T>& k) {
  const std::size_t o = k.dim(0), c = k.dim(1);
  std::vector<T> rows(o * 9 * c);
  for (std::size_t oi = 0; oi < o; ++oi) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      for (std::size_t t = 0; t < 9; ++t) {
        rows[oi * 9 * c + t * c + ci] = k[(oi * c + ci) * 9 + t];
      }
    }
  }
  return rows;
}

}  // namespace detail

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const Conv2dParams<T>& params,
                      GradTape<T>* tape = nullptr) {
  const auto& k = params.kernels;
  if (k.rank() != 4 || k.dim(2) != 3 || k.dim(3) != 3) {
    throw ShapeError("conv kernels must be [out, in, 3, 3], got " + to_string(k.shape()));
  }
  if (params.bias.numel() != k.dim(0)) throw ShapeError("conv bias length mismatch");
  if (input.rank() != 3) throw ShapeError("conv input must be [H, W, C]");
  const std::size_t h = input.dim(0), w = input.dim(1), cin = input.dim(2);
  const std::size_t cout = k.dim(0);
  if (cin != k.dim(1)) {
    throw ShapeError("conv channel mismatch: input has " + std::to_string(cin) +
                     " channels, kernels expect " + std::to_string(k.dim(1)));
  }

  auto out = BasicTensor<T>::zeros({h, w, cout});
  {
    const auto col = detail::im2col3x3(input.data().data(), h, w, cin);
    const auto rows = detail::kernel_rows(k);
    gemm::nt(h * w, cout, 9 * cin, col.data(), rows.data(), out.data().data(), false);
  }
  auto* o = out.data().data();
  for (std::size_t p = 0; p < h * w; ++p) {
    for (std::size_t oc = 0; oc < cout; ++oc) o[p * cout + oc] += params.bias[oc];
  }

  const auto kernels = params.kernels;
  const auto bias = params.bias;
  if (should_record(tape, {&input, &kernels, &bias})) {
    tape->record({input, kernels, bias}, out,
                 [input, kernels, bias, h, w, cin, cout](std::span<const T> g, Gradients<T>& grads) {
      const std::size_t hw = h * w;
      if (bias.requires_grad()) {
        auto& gb = grads.slot_for(bias);
        for (std::size_t p = 0; p < hw; ++p) {
          for (std::size_t oc = 0; oc < cout; ++oc) gb[oc] += g[p * cout + oc];
        }
      }
      if (kernels.requires_grad()) {
        const auto col = detail::im2col3x3(input.data().data(), h, w, cin);
        std::vector<T> grows(cout * 9 * cin, T{0});
        gemm::tn(cout, 9 * cin, hw, g.data(), col.data(), grows.data(), false);
        auto& gk = grads.slot_for(kernels);
        for (std::size_t oc = 0; oc < cout; ++oc) {
          for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t t = 0; t < 9; ++t) {
              gk[(oc * cin + ci) * 9 + t] += grows[oc * 9 * cin + t * cin + ci];
            }
          }
        }
      }
      if (input.requires_grad()) {
        const auto rows = detail::kernel_rows(kernels);
        std::vector<T> gcol(hw * 9 * cin, T{0});
        gemm::nn(hw, 9 * cin, cout, g.data(), rows.data(), gcol.data(), false);
        auto& gi = grads.slot_for(input);
        detail::col2im3x3(gcol.data(), h, w, cin, gi.data());
      }
    });
  }
  return out;
}

/// 2x2 max pooling, stride 2. Ties resolve to the first cell in row-major
/// window order, and backward routes the whole gradient there.
template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, GradTape<T>* tape = nullptr) {
  if (input.rank() != 3) throw ShapeError("maxpool input must be [H, W, C]");
  const std::size_t h = input.dim(0), w = input.dim(1), c = input.dim(2);
  if (h % 2 || w % 2) {
    throw ShapeError("maxpool needs even spatial dims, got " + to_string(input.shape()));
  }
  const std::size_t oh = h / 2, ow = w / 2;
  auto out = BasicTensor<T>::zeros({oh, ow, c});
  std::vector<std::uint32_t> argmax(out.numel());
  const T* in = input.data().data();
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((2 * y) * w + 2 * x) * c + ch;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = ((2 * y + dy) * w + 2 * x + dx) * c + ch;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (y * ow + x) * c + ch;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  if (should_record(tape, {&input})) {
    tape->record({input}, out,
                 [input, argmax = std::move(argmax)](std::span<const T> g, Gradients<T>& grads) {
      auto& gi = grads.slot_for(input);
      for (std::size_t o = 0; o < g.size(); ++o) gi[argmax[o]] += g[o];
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input, GradTape<T>* tape = nullptr) {
  auto out = BasicTensor<T>::zeros(input.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = input[i] > T{0} || std::isnan(input[i]) ? input[i] : T{0};  // NaN propagates
  if (should_record(tape, {&input})) {
    tape->record({input}, out, [input](std::span<const T> g, Gradients<T>& grads) {
      auto& gi = grads.slot_for(input);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (input[i] > T{0}) gi[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input, GradTape<T>* tape = nullptr) {
  auto out = BasicTensor<T>::zeros(input.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const T x = input[i];
    if (x >= T{0}) {
      out[i] = T{1} / (T{1} + std::exp(-x));
    } else {
      const T e = std::exp(x);
      out[i] = e / (T{1} + e);
    }
  }
  if (should_record(tape, {&input})) {
    tape->record({input}, out, [input, out](std::span<const T> g, Gradients<T>& grads) {
      auto& gi = grads.slot_for(input);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * out[i] * (T{1} - out[i]);
    });
  }
  return out;
}

/// Inverted dropout: in training each element is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate); inference is the identity.
template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& input, const DropoutState& state,
                       GradTape<T>* tape = nullptr) {
  if (!(state.rate >= 0.0 && state.rate < 1.0)) {
    throw ValueError("dropout rate must be in [0, 1)");
  }
  if (state.mode == Mode::kInference || state.rate == 0.0) return input;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - state.rate));
  std::vector<T> mask(input.numel());
  Rng rng(state.rng_seed);
  for (auto& m : mask) m = rng.uniform() < state.rate ? T{0} : keep_scale;
  auto out = BasicTensor<T>::zeros(input.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = input[i] * mask[i];
  if (should_record(tape, {&input})) {
    tape->record({input}, out, [input, mask = std::move(mask)](std::span<const T> g, Gradients<T>& grads) {
      auto& gi = grads.slot_for(input);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i] * mask[i];
    });
  }
  return out;
}

/// out = input * W + bias for input [rows, in_features].
template <typename T>
BasicTensor<T> dense(const BasicTensor<T>& input, const DenseParams<T>& params,
                     GradTape<T>* tape = nullptr) {
  if (input.rank() != 2 || input.dim(1) != params.in_features()) {
    throw ShapeError("dense expects [rows, " + std::to_string(params.in_features()) +
                     "], got " + to_string(input.shape()));
  }
  return add_row_bias(matmul(input, params.weights, tape), params.bias, tape);
}

/// Row vector [1, numel] view of any activation.
template <typename T>
BasicTensor<T> flatten(const BasicTensor<T>& input, GradTape<T>* tape = nullptr) {
  return reshape(input, Shape{1, input.numel()}, tape);
}

}  // namespace mric
