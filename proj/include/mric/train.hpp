#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "mric/dataset.hpp"
#include "mric/metrics.hpp"
#include "mric/model.hpp"

namespace mric {

enum class OptimizerKind { kSgd, kAdam };

inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ValueError("unknown optimizer: " + s);
}

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
  // Layer names or the groups "conv", "base", "head", "all", "none".
  std::vector<std::string> freeze = {"conv"};

  void validate() const {
    if (epochs < 1) throw ValueError("epochs must be at least 1");
    if (batch_size < 1) throw ValueError("batch size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ValueError("learning rate must be positive");
    }
  }
};

/// Expands group keywords into concrete layer names.
inline std::vector<std::string> resolve_freeze(const ModelGraph& model,
                                               const std::vector<std::string>& tokens) {
  std::vector<std::string> out;
  auto append = [&out](const std::vector<std::string>& names) {
    out.insert(out.end(), names.begin(), names.end());
  };
  for (const auto& t : tokens) {
    if (t == "none" || t.empty()) continue;
    if (t == "conv") {
      append(model.conv_layer_names());
    } else if (t == "base") {
      append(model.base_layer_names());
    } else if (t == "all") {
      append(model.parameterized_layer_names());
    } else if (t == "head") {
      for (const auto& n : model.parameterized_layer_names()) {
        if (model.is_head_layer(n)) out.push_back(n);
      }
    } else {
      if (!model.find(t)) throw ValueError("unknown layer: " + t);
      out.push_back(t);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline constexpr double kBceEpsilon = 1e-7;

/// Binary cross-entropy of one probability against a 0/1 label, with the
/// probability clamped to [eps, 1 - eps].
template <typename T>
BasicTensor<T> bce_loss(const BasicTensor<T>& p, int label, GradTape<T>* tape = nullptr) {
  if (p.numel() != 1) throw ShapeError("bce_loss expects a single probability");
  if (label != 0 && label != 1) throw ValueError("label must be 0 or 1");
  const double raw = static_cast<double>(p[0]);
  const double q = std::clamp(raw, kBceEpsilon, 1.0 - kBceEpsilon);
  const double loss = label == 1 ? -std::log(q) : -std::log(1.0 - q);
  BasicTensor<T> out({1}, static_cast<T>(loss));
  if (should_record(tape, {&p})) {
    const bool clamped = q != raw;
    tape->record({p}, out, [p, label, q, clamped](std::span<const T> g, Gradients<T>& grads) {
      auto& gp = grads.slot_for(p);
      if (clamped) return;
      const double d = label == 1 ? -1.0 / q : 1.0 / (1.0 - q);
      gp[0] += static_cast<T>(static_cast<double>(g[0]) * d);
    });
  }
  return out;
}

inline double bce(double p, int label) {
  const double q = std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon);
  return label == 1 ? -std::log(q) : -std::log(1.0 - q);
}

// ---------------------------------------------------------------------------
// Optimizers

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  /// Applies one update. grads[i] must have params[i].numel() entries.
  virtual void step(std::vector<Tensor>& params, const std::vector<std::vector<float>>& grads) = 0;

 protected:
  static void check(const std::vector<Tensor>& params, const std::vector<std::vector<float>>& grads) {
    if (params.size() != grads.size()) throw ShapeError("optimizer: parameter/gradient count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i].numel() != grads[i].size()) {
        throw ShapeError("optimizer: gradient shape mismatch for parameter " + std::to_string(i));
      }
    }
  }
};

class Sgd final : public Optimizer {
 public:
  explicit Sgd(double lr) : lr_(lr) {}

  void step(std::vector<Tensor>& params, const std::vector<std::vector<float>>& grads) override {
    check(params, grads);
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto w = params[i].data();
      for (std::size_t j = 0; j < w.size(); ++j) {
        w[j] = static_cast<float>(w[j] - lr_ * grads[i][j]);
      }
    }
  }

 private:
  double lr_;
};

/// Adam with bias-corrected moments.
class Adam final : public Optimizer {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Tensor>& params, const std::vector<std::vector<float>>& grads) override {
    check(params, grads);
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& st = state_[params[i].id()];
      if (st.m.empty()) {
        st.m.assign(params[i].numel(), 0.0f);
        st.v.assign(params[i].numel(), 0.0f);
      }
      auto w = params[i].data();
      const auto& g = grads[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        const double gj = g[j];
        const double m = beta1_ * st.m[j] + (1.0 - beta1_) * gj;
        const double v = beta2_ * st.v[j] + (1.0 - beta2_) * gj * gj;
        st.m[j] = static_cast<float>(m);
        st.v[j] = static_cast<float>(v);
        const double update = lr_ * (m / c1) / (std::sqrt(v / c2) + eps_);
        w[j] = static_cast<float>(w[j] - update);
      }
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  struct State {
    std::vector<float> m, v;
  };
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::unordered_map<std::uint64_t, State> state_;
};

inline std::unique_ptr<Optimizer> make_optimizer(const TrainConfig& c) {
  if (c.optimizer == OptimizerKind::kSgd) return std::make_unique<Sgd>(c.learning_rate);
  return std::make_unique<Adam>(c.learning_rate);
}

// ---------------------------------------------------------------------------
// Data sources

/// Random-access labelled images already sized for the model.
class ImageSource {
 public:
  virtual ~ImageSource() = default;
  virtual std::size_t size() const = 0;
  virtual Tensor image(std::size_t i) const = 0;
  virtual int label(std::size_t i) const = 0;
};

class InMemoryImages final : public ImageSource {
 public:
  InMemoryImages() = default;
  InMemoryImages(std::vector<Tensor> images, std::vector<int> labels)
      : images_(std::move(images)), labels_(std::move(labels)) {
    if (images_.size() != labels_.size()) throw ValueError("image/label count mismatch");
  }
  void add(Tensor image, int label) {
    images_.push_back(std::move(image));
    labels_.push_back(label);
  }
  std::size_t size() const override { return images_.size(); }
  Tensor image(std::size_t i) const override { return images_.at(i); }
  int label(std::size_t i) const override { return labels_.at(i); }

 private:
  std::vector<Tensor> images_;
  std::vector<int> labels_;
};

/// Decodes manifest records lazily.
class ManifestImages final : public ImageSource {
 public:
  ManifestImages(std::vector<SampleRecord> records, std::size_t input_size)
      : records_(std::move(records)), input_size_(input_size) {}

  /// Records of one split; originals optionally excluded.
  static ManifestImages from_split(const DatasetManifest& m, Split split, std::size_t input_size,
                                   bool include_originals = true) {
    std::vector<SampleRecord> rs;
    for (const auto& r : m.records) {
      if (r.split != split) continue;
      if (!include_originals && !r.is_augmented()) continue;
      rs.push_back(r);
    }
    return ManifestImages(std::move(rs), input_size);
  }

  std::size_t size() const override { return records_.size(); }
  Tensor image(std::size_t i) const override { return load_sample(records_.at(i), input_size_); }
  int label(std::size_t i) const override { return to_int(records_.at(i).label); }
  const std::vector<SampleRecord>& records() const { return records_; }

 private:
  std::vector<SampleRecord> records_;
  std::size_t input_size_;
};

// ---------------------------------------------------------------------------
// Fit / evaluate

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0, train_acc = 0, val_loss = 0, val_acc = 0;
};

/// Inference-mode predictions for every image in `source`.
inline std::vector<Prediction> predict_all(const ModelGraph& model, const ImageSource& source) {
  std::vector<Prediction> out(source.size());
  for (std::size_t i = 0; i < source.size(); ++i) {
    out[i] = {static_cast<double>(forward(model, source.image(i), Mode::kInference).item()),
              source.label(i)};
  }
  return out;
}

/// Mean BCE and accuracy at threshold 0.5.
inline std::pair<double, double> loss_and_accuracy(const std::vector<Prediction>& preds) {
  double loss = 0.0;
  std::size_t correct = 0;
  for (const auto& p : preds) {
    loss += bce(p.probability, p.label);
    if ((p.probability >= 0.5) == (p.label == 1)) ++correct;
  }
  const auto n = static_cast<double>(std::max<std::size_t>(1, preds.size()));
  return {loss / n, static_cast<double>(correct) / n};
}

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch training. Per-sample gradients are averaged over the batch
/// before each optimizer step; the batch order is reshuffled every epoch
/// from the seed. After each epoch both splits are scored in inference
/// mode, which is what the returned curves hold.
inline std::vector<EpochStats> fit(ModelGraph& model, const ImageSource& train, const ImageSource& val,
                                   const TrainConfig& config, const EpochCallback& on_epoch = nullptr) {
  config.validate();
  if (train.size() == 0) throw ValueError("empty training split");
  if (val.size() == 0) throw ValueError("empty validation split");
  set_trainable(model, resolve_freeze(model, config.freeze));

  std::vector<Tensor> params;
  for (auto& p : trainable_parameters(model)) params.push_back(p.tensor);
  auto optimizer = make_optimizer(config);

  std::vector<std::size_t> order(train.size());
  std::vector<EpochStats> curves;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(derive_seed(config.seed, "shuffle", epoch)).shuffle(order);

    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<std::vector<float>> accum;
      accum.reserve(params.size());
      for (const auto& p : params) accum.emplace_back(p.numel(), 0.0f);

      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const Tensor image = train.image(idx);
        if (!image.all_finite()) {
          throw NumericError("non-finite input at epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(batch_index));
        }
        GradTape<float> tape;
        const Tensor prob = forward(model, image, Mode::kTraining, &tape,
                                    derive_seed(config.seed, "dropout", epoch, idx));
        const Tensor loss = bce_loss(prob, train.label(idx), &tape);
        if (!std::isfinite(loss.item())) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                             std::to_string(batch_index));
        }
        if (params.empty() || tape.size() == 0) continue;
        const auto grads = backward(loss, tape);
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (const auto* g = grads.find(params[i].id())) {
            for (std::size_t j = 0; j < g->size(); ++j) accum[i][j] += (*g)[j];
          }
          params[i].clear_grad();
        }
      }
      if (params.empty()) continue;
      const float inv = 1.0f / static_cast<float>(end - start);
      for (auto& a : accum) {
        for (auto& v : a) {
          v *= inv;
          if (!std::isfinite(v)) {
            throw NumericError("non-finite gradient at epoch " + std::to_string(epoch) + " batch " +
                               std::to_string(batch_index));
          }
        }
      }
      optimizer->step(params, accum);
    }

    EpochStats s;
    s.epoch = epoch;
    std::tie(s.train_loss, s.train_acc) = loss_and_accuracy(predict_all(model, train));
    std::tie(s.val_loss, s.val_acc) = loss_and_accuracy(predict_all(model, val));
    if (!std::isfinite(s.train_loss) || !std::isfinite(s.val_loss)) {
      throw NumericError("non-finite loss after epoch " + std::to_string(epoch));
    }
    curves.push_back(s);
    if (on_epoch) on_epoch(s);
  }
  return curves;
}

}  // namespace mric
