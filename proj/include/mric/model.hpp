#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mric/layers.hpp"
#include "mric/random.hpp"

namespace mric {

enum class LayerKind { kInput, kConv, kRelu, kMaxPool, kDense, kDropout, kOutput };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kInput: return "input";
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kDense: return "dense";
    case LayerKind::kDropout: return "dropout";
    case LayerKind::kOutput: return "output";
  }
  return "?";
}

/// Size knobs. The defaults give the full-size network; `scaled` divides
/// every width by a common factor for desk-scale experiments while keeping
/// the layer sequence intact.
struct ModelConfig {
  std::size_t input_size = 224;
  std::size_t width_divisor = 1;
  double base_dropout = 0.5;  // Drop6, Drop7
  double head_dropout = 0.1;  // Dropout_9, Dropout_11, Dropout_13

  static ModelConfig full() { return {}; }
  static ModelConfig scaled(std::size_t divisor, std::size_t input_size = 224) {
    ModelConfig c;
    c.width_divisor = divisor;
    c.input_size = input_size;
    return c;
  }

  std::size_t width(std::size_t full_width) const {
    return std::max<std::size_t>(1, full_width / std::max<std::size_t>(1, width_divisor));
  }
  std::array<std::size_t, 5> block_channels() const {
    return {width(64), width(128), width(256), width(512), width(512)};
  }
  std::size_t fc_width() const { return width(4096); }
  std::size_t class_width() const { return width(1000); }
  std::size_t head_width() const { return width(1000); }
};

/// Where base weights came from. The domains are free text; the frozen list
/// mirrors the last set_trainable call.
struct WeightProvenance {
  std::string source_domain = "random-init";
  std::string target_domain = "brain-mri-binary";
  std::vector<std::string> frozen_layer_names;
};

struct Layer {
  std::string name;
  LayerKind kind = LayerKind::kInput;
  Shape output_shape;
  std::optional<Conv2dParams<float>> conv = std::nullopt;
  std::optional<DenseParams<float>> dense = std::nullopt;
  double dropout_rate = 0.0;
  bool sigmoid_output = false;  // prediction unit

  bool has_params() const { return conv.has_value() || dense.has_value(); }
  Tensor weight() const { return conv ? conv->kernels : dense->weights; }
  Tensor bias() const { return conv ? conv->bias : dense->bias; }
};

struct NamedParameter {
  std::string layer;
  std::string name;  // "<layer>.weight" or "<layer>.bias"
  Tensor tensor;
};

class ModelGraph {
 public:
  ModelConfig config;
  std::vector<Layer> layers;
  std::size_t head_start_index = 0;  // index of Dropout_9
  WeightProvenance provenance;

  const Layer* find(const std::string& name) const {
    for (const auto& l : layers) {
      if (l.name == name) return &l;
    }
    return nullptr;
  }

  /// Weight and bias of every parameterized layer, in layer order.
  std::vector<NamedParameter> parameters() const {
    std::vector<NamedParameter> out;
    for (const auto& l : layers) {
      if (!l.has_params()) continue;
      out.push_back({l.name, l.name + ".weight", l.weight()});
      out.push_back({l.name, l.name + ".bias", l.bias()});
    }
    return out;
  }

  std::vector<std::string> parameterized_layer_names() const {
    std::vector<std::string> out;
    for (const auto& l : layers) {
      if (l.has_params()) out.push_back(l.name);
    }
    return out;
  }

  /// Parameterized layers that precede the custom head.
  std::vector<std::string> base_layer_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < head_start_index; ++i) {
      if (layers[i].has_params()) out.push_back(layers[i].name);
    }
    return out;
  }

  std::vector<std::string> conv_layer_names() const {
    std::vector<std::string> out;
    for (const auto& l : layers) {
      if (l.kind == LayerKind::kConv) out.push_back(l.name);
    }
    return out;
  }

  bool is_head_layer(const std::string& name) const {
    for (std::size_t i = head_start_index; i < layers.size(); ++i) {
      if (layers[i].name == name) return true;
    }
    return false;
  }

  std::size_t parameter_count(std::size_t from = 0) const {
    std::size_t n = 0;
    for (std::size_t i = from; i < layers.size(); ++i) {
      if (layers[i].has_params()) n += layers[i].weight().numel() + layers[i].bias().numel();
    }
    return n;
  }
};

namespace detail {

inline Tensor he_uniform(Shape shape, std::size_t fan_in, std::uint64_t seed) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor t(std::move(shape), 0.0f);
  Rng rng(seed);
  for (auto& v : t.data()) v = static_cast<float>(limit * (2.0 * rng.uniform() - 1.0));
  return t;
}

}  // namespace detail

/// Builds VGG-19 (16 conv, 5 max-pool, Dense6/7/8) followed by the custom
/// binary head. Weights are He-uniform from `seed`, biases zero. Every
/// parameter starts trainable.
inline ModelGraph build_model(std::uint64_t seed, const ModelConfig& config = ModelConfig::full()) {
  if (config.input_size == 0 || config.input_size % 32 != 0) {
    throw ValueError("input size must be a positive multiple of 32");
  }
  ModelGraph g;
  g.config = config;
  std::size_t s = config.input_size;
  std::size_t channels = 3;

  auto push = [&g](Layer l) { g.layers.push_back(std::move(l)); };
  auto param_seed = [&g, seed] { return derive_seed(seed, "init", g.layers.size()); };

  push({.name = "Input", .kind = LayerKind::kInput, .output_shape = {s, s, 3}});

  constexpr std::array<std::size_t, 5> kConvsPerBlock = {2, 2, 4, 4, 4};
  // Table naming is irregular for the first two pools.
  const std::array<std::string, 5> pool_names = {"Maxpool_1", "Maxpool_2", "Maxpool3",
                                                 "Maxpool4", "Maxpool5"};
  const auto widths = config.block_channels();
  for (std::size_t b = 0; b < 5; ++b) {
    for (std::size_t i = 0; i < kConvsPerBlock[b]; ++i) {
      const std::string suffix = std::to_string(b + 1) + "_" + std::to_string(i + 1);
      const std::size_t out_c = widths[b];
      Layer conv{.name = "Conv" + suffix, .kind = LayerKind::kConv, .output_shape = {s, s, out_c}};
      conv.conv = Conv2dParams<float>{
          detail::he_uniform({out_c, channels, 3, 3}, channels * 9, param_seed()),
          Tensor({out_c}, 0.0f)};
      push(std::move(conv));
      push({.name = "Relu" + suffix, .kind = LayerKind::kRelu, .output_shape = {s, s, out_c}});
      channels = out_c;
    }
    s /= 2;
    push({.name = pool_names[b], .kind = LayerKind::kMaxPool, .output_shape = {s, s, channels}});
  }

  std::size_t features = s * s * channels;
  auto add_dense = [&](const std::string& name, std::size_t out, bool sigmoid_out) {
    Layer d{.name = name, .kind = LayerKind::kDense, .output_shape = {1, out}};
    d.dense = DenseParams<float>{detail::he_uniform({features, out}, features, param_seed()),
                                 Tensor({out}, 0.0f)};
    d.sigmoid_output = sigmoid_out;
    push(std::move(d));
    features = out;
  };
  auto add_dropout = [&](const std::string& name, double rate) {
    push({.name = name, .kind = LayerKind::kDropout, .output_shape = {1, features},
          .dropout_rate = rate});
  };

  add_dense("Dense6", config.fc_width(), false);
  push({.name = "Relu6", .kind = LayerKind::kRelu, .output_shape = {1, features}});
  add_dropout("Drop6", config.base_dropout);
  add_dense("Dense7", config.fc_width(), false);
  push({.name = "Relu7", .kind = LayerKind::kRelu, .output_shape = {1, features}});
  add_dropout("Drop7", config.base_dropout);
  add_dense("Dense8", config.class_width(), false);
  // The 1000-way logits pass through unchanged; no softmax before the head.
  push({.name = "Output", .kind = LayerKind::kOutput, .output_shape = {1, features}});

  g.head_start_index = g.layers.size();
  add_dropout("Dropout_9", config.head_dropout);
  add_dense("Dense_10", config.head_width(), false);
  add_dropout("Dropout_11", config.head_dropout);
  add_dense("Dense_12", config.head_width(), false);
  add_dropout("Dropout_13", config.head_dropout);
  add_dense("Dense_14", 1, true);

  for (auto& p : g.parameters()) p.tensor.set_requires_grad(true);
  return g;
}

/// Called after each layer with its output; used for shape traces.
using LayerObserver = std::function<void(const Layer&, const Tensor&)>;

/// Runs the network on one [S, S, 3] image and returns the [1, 1] tumor
/// probability. With a tape, operations touching trainable parameters are
/// recorded. Dropout masks derive from `dropout_seed` and the layer index.
inline Tensor forward(const ModelGraph& model, const Tensor& image, Mode mode,
                      GradTape<float>* tape = nullptr, std::uint64_t dropout_seed = 0,
                      const LayerObserver& observer = nullptr) {
  const std::size_t s = model.config.input_size;
  if (image.rank() != 3 || image.dim(0) != s || image.dim(1) != s || image.dim(2) != 3) {
    throw ShapeError("model input must be " + std::to_string(s) + "x" + std::to_string(s) +
                     "x3, got " + to_string(image.shape()));
  }
  Tensor x = image;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    switch (layer.kind) {
      case LayerKind::kInput:
      case LayerKind::kOutput:
        break;
      case LayerKind::kConv:
        x = conv2d(x, *layer.conv, tape);
        break;
      case LayerKind::kRelu:
        x = relu(x, tape);
        break;
      case LayerKind::kMaxPool:
        x = maxpool2d(x, tape);
        break;
      case LayerKind::kDense:
        if (x.rank() != 2) x = flatten(x, tape);
        x = dense(x, *layer.dense, tape);
        if (layer.sigmoid_output) x = sigmoid(x, tape);
        break;
      case LayerKind::kDropout:
        x = dropout(x, DropoutState{layer.dropout_rate, mode, derive_seed(dropout_seed, "dropout", i)},
                    tape);
        break;
    }
    if (observer) observer(layer, x);
  }
  return x;
}

/// Freezes exactly the named layers; every other parameter becomes
/// trainable. Names must exist in the model.
inline void set_trainable(ModelGraph& model, const std::vector<std::string>& frozen_layer_names) {
  std::set<std::string> frozen;
  for (const auto& n : frozen_layer_names) {
    if (!model.find(n)) throw ValueError("unknown layer: " + n);
    frozen.insert(n);
  }
  for (auto& p : model.parameters()) p.tensor.set_requires_grad(frozen.count(p.layer) == 0);
  model.provenance.frozen_layer_names = frozen_layer_names;
}

/// Parameters that currently receive updates.
inline std::vector<NamedParameter> trainable_parameters(const ModelGraph& model) {
  std::vector<NamedParameter> out;
  for (auto& p : model.parameters()) {
    if (p.tensor.requires_grad()) out.push_back(p);
  }
  return out;
}

}  // namespace mric
