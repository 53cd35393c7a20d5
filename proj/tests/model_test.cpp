#include <gtest/gtest.h>

#include "support.hpp"

using namespace mric;

namespace {

const ModelGraph& full_model() {
  static const ModelGraph m = build_model(0);
  return m;
}

std::size_t conv_params(std::size_t cin, std::size_t cout) { return 9 * cin * cout + cout; }
std::size_t dense_params(std::size_t in, std::size_t out) { return in * out + out; }

}  // namespace

TEST(Model, LayerSequence) {
  const auto& m = full_model();
  ASSERT_EQ(m.layers.size(), 52u);
  EXPECT_EQ(m.layers.front().name, "Input");
  EXPECT_EQ(m.layers.back().name, "Dense_14");
  EXPECT_EQ(m.layers[m.head_start_index].name, "Dropout_9");
  EXPECT_EQ(m.conv_layer_names().size(), 16u);
  EXPECT_EQ(m.parameterized_layer_names().size(), 22u);
  EXPECT_EQ(m.find("Maxpool3")->output_shape, (Shape{28, 28, 256}));
  EXPECT_EQ(m.find("Maxpool5")->output_shape, (Shape{7, 7, 512}));
  EXPECT_EQ(m.find("Dense6")->output_shape, (Shape{1, 4096}));
  EXPECT_EQ(m.find("Output")->output_shape, (Shape{1, 1000}));
  EXPECT_EQ(m.find("Dense_14")->output_shape, (Shape{1, 1}));
  EXPECT_TRUE(m.find("Dense_14")->sigmoid_output);
}

TEST(Model, DropoutRates) {
  const auto& m = full_model();
  EXPECT_DOUBLE_EQ(m.find("Drop6")->dropout_rate, 0.5);
  EXPECT_DOUBLE_EQ(m.find("Drop7")->dropout_rate, 0.5);
  for (const char* n : {"Dropout_9", "Dropout_11", "Dropout_13"}) EXPECT_DOUBLE_EQ(m.find(n)->dropout_rate, 0.1);
}

TEST(Model, ParameterCountsFromArithmetic) {
  const auto& m = full_model();
  const std::size_t head = 2 * dense_params(1000, 1000) + dense_params(1000, 1);
  EXPECT_EQ(head, 2003001u);
  EXPECT_EQ(m.parameter_count(m.head_start_index), head);

  std::size_t conv = 0, cin = 3;
  const std::size_t widths[] = {64, 64, 128, 128, 256, 256, 256, 256, 512, 512, 512, 512, 512, 512, 512, 512};
  for (auto w : widths) {
    conv += conv_params(cin, w);
    cin = w;
  }
  const std::size_t base = conv + dense_params(7 * 7 * 512, 4096) + dense_params(4096, 4096) + dense_params(4096, 1000);
  EXPECT_EQ(m.parameter_count(), base + head);
}

TEST(Model, InitIsDeterministicAndBiasesZero) {
  const auto a = build_model(3, ModelConfig::scaled(16, 32));
  const auto b = build_model(3, ModelConfig::scaled(16, 32));
  const auto c = build_model(4, ModelConfig::scaled(16, 32));
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].tensor.values(), pb[i].tensor.values());
    any_diff |= pa[i].tensor.values() != pc[i].tensor.values();
  }
  EXPECT_TRUE(any_diff);
  for (const auto& l : a.layers) {
    if (!l.has_params()) continue;
    for (auto v : l.bias().data()) EXPECT_EQ(v, 0.0f);
    // He-uniform bound
    const double fan_in = static_cast<double>(l.weight().numel() / l.bias().numel());
    const double limit = std::sqrt(6.0 / fan_in);
    for (auto v : l.weight().data()) EXPECT_LE(std::abs(v), limit);
  }
}

TEST(Model, ScaledForwardProducesProbability) {
  const auto m = build_model(1, ModelConfig::scaled(16, 64));
  std::vector<std::string> seen;
  const Tensor p = forward(m, fixtures::model_input(64, true, 1), Mode::kInference, nullptr, 0,
                           [&](const Layer& l, const Tensor& out) {
                             seen.push_back(l.name);
                             if (l.kind == LayerKind::kConv || l.kind == LayerKind::kMaxPool) {
                               EXPECT_EQ(out.shape(), l.output_shape) << l.name;
                             } else if (l.kind != LayerKind::kInput) {
                               EXPECT_EQ(out.numel(), numel(l.output_shape)) << l.name;
                             }
                           });
  EXPECT_EQ(seen.size(), m.layers.size());
  EXPECT_EQ(p.shape(), (Shape{1, 1}));
  EXPECT_GT(p.item(), 0.0f);
  EXPECT_LT(p.item(), 1.0f);
  // Inference ignores the dropout seed.
  EXPECT_EQ(forward(m, fixtures::model_input(64, true, 1), Mode::kInference, nullptr, 77).item(), p.item());
}

TEST(Model, RejectsBadInput) {
  const auto m = build_model(1, ModelConfig::scaled(16, 32));
  EXPECT_THROW(forward(m, Tensor({64, 64, 3}, 0.0f), Mode::kInference), ShapeError);
  EXPECT_THROW(forward(m, Tensor({32, 32, 1}, 0.0f), Mode::kInference), ShapeError);
  EXPECT_THROW(build_model(0, ModelConfig::scaled(16, 48)), ValueError);
}

TEST(Model, SetTrainable) {
  auto m = build_model(1, ModelConfig::scaled(16, 32));
  set_trainable(m, m.conv_layer_names());
  EXPECT_EQ(trainable_parameters(m).size(), 12u);  // Dense6/7/8 + 3 head dense layers
  EXPECT_EQ(m.provenance.frozen_layer_names.size(), 16u);
  EXPECT_FALSE(m.find("Conv1_1")->weight().requires_grad());
  EXPECT_TRUE(m.find("Dense6")->weight().requires_grad());
  EXPECT_THROW(set_trainable(m, {"Conv9_9"}), ValueError);
}

TEST(Model, FreezeGroups) {
  const auto m = build_model(1, ModelConfig::scaled(16, 32));
  EXPECT_EQ(resolve_freeze(m, {"conv"}).size(), 16u);
  EXPECT_EQ(resolve_freeze(m, {"base"}).size(), 19u);
  EXPECT_EQ(resolve_freeze(m, {"head"}).size(), 3u);
  EXPECT_EQ(resolve_freeze(m, {"all"}).size(), 22u);
  EXPECT_TRUE(resolve_freeze(m, {"none"}).empty());
  EXPECT_EQ(resolve_freeze(m, {"conv", "Dense6"}).size(), 17u);
  EXPECT_THROW(resolve_freeze(m, {"bogus"}), ValueError);
}

TEST(Model, GradientsReachOnlyTrainableLayers) {
  auto m = build_model(2, ModelConfig::scaled(16, 32));
  set_trainable(m, m.base_layer_names());
  GradTape<float> tape;
  const Tensor p = forward(m, fixtures::model_input(32, true, 2), Mode::kTraining, &tape, 5);
  backward(bce_loss(p, 1, &tape), tape);
  for (const auto& np : m.parameters()) {
    if (m.is_head_layer(np.layer)) {
      EXPECT_TRUE(np.tensor.grad().has_value()) << np.name;
    } else {
      EXPECT_FALSE(np.tensor.grad().has_value()) << np.name;
    }
  }
}
