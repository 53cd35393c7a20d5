#include <gtest/gtest.h>

#include "support.hpp"

using namespace mric;

namespace {

Tensor ramp(std::size_t h, std::size_t w) {
  Tensor t({h, w, 1}, 0.0f);
  for (std::size_t i = 0; i < h * w; ++i) t[i] = static_cast<float>(i + 1);
  return t;
}

}  // namespace

TEST(Shift, MovesContentAndZeroFills) {
  const Tensor img = ramp(3, 3);
  EXPECT_EQ(shift_image(img, 1, 0).values(), (std::vector<float>{0, 1, 2, 0, 4, 5, 0, 7, 8}));
  EXPECT_EQ(shift_image(img, 0, -1).values(), (std::vector<float>{4, 5, 6, 7, 8, 9, 0, 0, 0}));
  EXPECT_EQ(shift_image(img, 5, 0).values(), std::vector<float>(9, 0.0f));
}

TEST(Rotate, ZeroAngleIsIdentity) {
  const Tensor img = ramp(5, 6);
  const Tensor out = rotate_image(img, 0.0);
  for (std::size_t i = 0; i < img.numel(); ++i) EXPECT_NEAR(out[i], img[i], 1e-4);
}

TEST(Rotate, QuarterTurnIsClockwise) {
  // A lone pixel right of center moves below center for a clockwise turn.
  Tensor img({5, 5, 1}, 0.0f);
  img.at({2, 4, 0}) = 1.0f;
  const Tensor out = rotate_image(img, 90.0);
  EXPECT_NEAR(out.at({4, 2, 0}), 1.0f, 1e-6);
  EXPECT_NEAR(out.at({2, 4, 0}), 0.0f, 1e-6);
}

TEST(Rotate, CornersFillWithZero) {
  const Tensor img({32, 32, 1}, 255.0f);
  const Tensor out = rotate_image(img, 15.0);
  EXPECT_EQ(out.at({0, 0, 0}), 0.0f);
  EXPECT_NEAR(out.at({16, 16, 0}), 255.0f, 1e-3);
}

TEST(Draw, ParametersWithinBounds) {
  std::size_t kinds[3] = {};
  for (std::size_t j = 0; j < 3000; ++j) {
    const auto p = draw_augmentation(17, j);
    kinds[static_cast<int>(p.kind)]++;
    switch (p.kind) {
      case AugmentKind::kHorizontalShift:
        EXPECT_EQ(p.dy, 0);
        EXPECT_GE(std::abs(p.dx), 1);
        EXPECT_LE(std::abs(p.dx), 24);
        break;
      case AugmentKind::kVerticalShift:
        EXPECT_EQ(p.dx, 0);
        EXPECT_GE(std::abs(p.dy), 1);
        EXPECT_LE(std::abs(p.dy), 24);
        break;
      case AugmentKind::kRotation:
        EXPECT_LE(std::abs(p.angle), 15.0);
        EXPECT_EQ(p.dx, 0);
        EXPECT_EQ(p.dy, 0);
        break;
    }
  }
  for (auto k : kinds) EXPECT_GT(k, 800u);
}

TEST(Augment, ReplayFromParametersIsExact) {
  const Tensor img = fixtures::blob_image(48, true, 3);
  const auto out = augment(img, 9, 123);
  ASSERT_EQ(out.size(), 9u);
  for (std::size_t j = 0; j < out.size(); ++j) {
    EXPECT_EQ(out[j].params, draw_augmentation(123, j));
    EXPECT_EQ(apply_augmentation(img, out[j].params).values(), out[j].image.values());
  }
}

TEST(Augment, OutputsVaryWithSeed) {
  EXPECT_NE(draw_augmentation(1, 0), draw_augmentation(2, 0));
  const auto a = augment(fixtures::blob_image(32, false, 1), 4, 5);
  const auto b = augment(fixtures::blob_image(32, false, 1), 4, 5);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(a[j].image.values(), b[j].image.values());
}

TEST(Augment, KindNames) {
  for (auto k : {AugmentKind::kHorizontalShift, AugmentKind::kVerticalShift, AugmentKind::kRotation}) {
    EXPECT_EQ(parse_augment_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_augment_kind("flip"), ValueError);
}
