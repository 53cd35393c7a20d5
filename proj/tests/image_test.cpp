#include <gtest/gtest.h>

#include "support.hpp"

using namespace mric;
using mric::fixtures::TempDir;

TEST(Image, PngRoundTripRgbAndGray) {
  TempDir dir;
  Tensor rgb({3, 4, 3}, 0.0f);
  for (std::size_t i = 0; i < rgb.numel(); ++i) rgb[i] = static_cast<float>((i * 37) % 256);
  write_png(dir / "rgb.png", rgb);
  EXPECT_EQ(decode_image(dir / "rgb.png").values(), rgb.values());

  Tensor gray({2, 2, 1}, {0, 50, 100, 255});
  write_png(dir / "gray.png", gray);
  const Tensor g = decode_image(dir / "gray.png");
  ASSERT_EQ(g.shape(), (Shape{2, 2, 3}));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(g[i * 3 + c], gray[i]);
  }
}

TEST(Image, JpegDecodesApproximately) {
  TempDir dir;
  Tensor flat({16, 16, 3}, 128.0f);
  write_jpeg(dir / "a.jpg", flat, 95);
  const Tensor d = decode_image(dir / "a.jpg");
  ASSERT_EQ(d.shape(), (Shape{16, 16, 3}));
  for (auto v : d.data()) EXPECT_NEAR(v, 128.0f, 3.0f);
}

TEST(Image, ErrorsMapToCategories) {
  TempDir dir;
  EXPECT_THROW(decode_image(dir / "missing.png"), IoError);
  {
    std::ofstream(dir / "text.png") << "not an image at all";
  }
  EXPECT_THROW(decode_image(dir / "text.png"), UnsupportedFormatError);
  {
    std::ofstream out(dir / "trunc.png", std::ios::binary);
    const unsigned char sig[] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a, 0, 0, 0};
    out.write(reinterpret_cast<const char*>(sig), sizeof sig);
  }
  EXPECT_THROW(decode_image(dir / "trunc.png"), CorruptImageError);
  {
    std::ofstream out(dir / "trunc.jpg", std::ios::binary);
    const unsigned char sig[] = {0xff, 0xd8, 0xff, 0xe0, 0, 0x10};
    out.write(reinterpret_cast<const char*>(sig), sizeof sig);
  }
  EXPECT_THROW(decode_image(dir / "trunc.jpg"), CorruptImageError);

  // Valid header, scan data cut short.
  Rng rng(4);
  Tensor noisy({64, 64, 3}, 0.0f);
  for (auto& v : noisy.data()) v = static_cast<float>(rng.uniform(0, 255));
  write_jpeg(dir / "cut.jpg", noisy, 90);
  fs::resize_file(dir / "cut.jpg", fs::file_size(dir / "cut.jpg") / 2);
  EXPECT_THROW(decode_image(dir / "cut.jpg"), CorruptImageError);
}

TEST(Resize, IdentityWhenSizeUnchanged) {
  Rng rng(1);
  Tensor img({5, 7, 3}, 0.0f);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform(0, 255));
  EXPECT_EQ(resize_bilinear(img, 5, 7).values(), img.values());
}

TEST(Resize, ConstantStaysConstant) {
  Tensor img({9, 9, 1}, 42.0f);
  const Tensor out = resize_bilinear(img, 4, 13);
  for (auto v : out.data()) EXPECT_EQ(v, 42.0f);
}

TEST(Resize, HalfPixelDownscaleAveragesPairs) {
  // 4 -> 2: output samples sit exactly between input pixels 0,1 and 2,3.
  Tensor img({2, 4, 1}, {0, 10, 20, 30, 0, 10, 20, 30});
  const Tensor out = resize_bilinear(img, 2, 2);
  EXPECT_EQ(out.values(), (std::vector<float>{5, 25, 5, 25}));
}

TEST(Resize, UpscaleKnownValues) {
  // 2 -> 4: positions -0.25 (clamped to 0), 0.25, 0.75, 1.25 (clamped to 1).
  Tensor img({2, 2, 1}, {0, 100, 0, 100});
  const Tensor out = resize_bilinear(img, 2, 4);
  EXPECT_EQ(out.values(), (std::vector<float>{0, 25, 75, 100, 0, 25, 75, 100}));
}

TEST(Resize, OutputWithinInputRange) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor img({2 + rng.below(30), 2 + rng.below(30), 1}, 0.0f);
    for (auto& v : img.data()) v = static_cast<float>(rng.uniform(0, 255));
    const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
    const Tensor out = resize_bilinear(img, 1 + rng.below(40), 1 + rng.below(40));
    for (auto v : out.data()) {
      EXPECT_GE(v, *lo);
      EXPECT_LE(v, *hi);
    }
  }
}

TEST(Resize, DegenerateInputRejected) {
  EXPECT_THROW(resize_bilinear(Tensor({1, 5, 3}, 0.0f), 4, 4), ShapeError);
}

TEST(Normalize, ScalesAndValidates) {
  Tensor img({1, 1, 3}, {0, 127.5f, 255});
  EXPECT_EQ(normalize(img).values(), (std::vector<float>{0, 0.5f, 1}));
  EXPECT_THROW(normalize(Tensor({1}, 256.0f)), ValueError);
  EXPECT_THROW(normalize(Tensor({1}, -1.0f)), ValueError);
}
