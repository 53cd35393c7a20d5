#pragma once

// Image decoding (PNG via libpng, JPEG via libjpeg) into channel-last
// float tensors holding raw 0..255 values, plus resizing and scaling.

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>
#include <vector>

#include "mric/tensor.hpp"

namespace mric {

namespace fs = std::filesystem;

enum class ImageFormat { kPng, kJpeg, kUnknown };

inline ImageFormat sniff_format(const std::vector<unsigned char>& bytes) {
  static constexpr unsigned char kPng[] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (bytes.size() >= 8 && std::equal(std::begin(kPng), std::end(kPng), bytes.begin())) {
    return ImageFormat::kPng;
  }
  if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff) {
    return ImageFormat::kJpeg;
  }
  return ImageFormat::kUnknown;
}

namespace detail {

inline std::vector<unsigned char> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Tensor rgb_bytes_to_tensor(const unsigned char* px, std::size_t h, std::size_t w,
                                  std::size_t channels) {
  Tensor out({h, w, 3}, 0.0f);
  for (std::size_t i = 0; i < h * w; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      out[i * 3 + c] = static_cast<float>(px[i * channels + (channels == 1 ? 0 : c)]);
    }
  }
  return out;
}

inline Tensor decode_png(const std::vector<unsigned char>& bytes, const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw CorruptImageError("corrupt PNG " + path.string() + ": " + img.message);
  }
  const bool gray = (img.format & PNG_FORMAT_FLAG_COLOR) == 0;
  img.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<unsigned char> px(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw CorruptImageError("corrupt PNG " + path.string() + ": " + msg);
  }
  return rgb_bytes_to_tensor(px.data(), img.height, img.width, gray ? 1 : 3);
}

struct JpegErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" inline void jpeg_error_exit_to_jump(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Warnings (level -1) such as premature end of data mean the decoder padded
// missing scanlines, so they are treated as corruption too.
extern "C" inline void jpeg_warning_to_jump(j_common_ptr cinfo, int level) {
  if (level < 0) jpeg_error_exit_to_jump(cinfo);
}

inline Tensor decode_jpeg(const std::vector<unsigned char>& bytes, const fs::path& path) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  std::vector<unsigned char> px;
  std::size_t h = 0, w = 0, channels = 0;
  cinfo.err = jpeg_std_error(&err.pub);
  err.pub.error_exit = jpeg_error_exit_to_jump;
  err.pub.emit_message = jpeg_warning_to_jump;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw CorruptImageError("corrupt JPEG " + path.string() + ": " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space != JCS_GRAYSCALE) cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = cinfo.output_height;
  w = cinfo.output_width;
  channels = static_cast<std::size_t>(cinfo.output_components);
  px.resize(h * w * channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = px.data() + static_cast<std::size_t>(cinfo.output_scanline) * w * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  if (channels != 1 && channels != 3) {
    throw UnsupportedFormatError("unsupported JPEG channel count in " + path.string());
  }
  return rgb_bytes_to_tensor(px.data(), h, w, channels);
}

inline std::vector<unsigned char> to_bytes(const Tensor& image) {
  std::vector<unsigned char> px(image.numel());
  for (std::size_t i = 0; i < px.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 255.0f);
    px[i] = static_cast<unsigned char>(std::lround(v));
  }
  return px;
}

}  // namespace detail

/// Decodes a PNG or JPEG file into [H, W, 3] raw 8-bit values. Grayscale
/// input is replicated across the three channels.
inline Tensor decode_image(const fs::path& path) {
  const auto bytes = detail::read_file(path);
  switch (sniff_format(bytes)) {
    case ImageFormat::kPng: return detail::decode_png(bytes, path);
    case ImageFormat::kJpeg: return detail::decode_jpeg(bytes, path);
    case ImageFormat::kUnknown: break;
  }
  throw UnsupportedFormatError("unsupported image format: " + path.string());
}

/// Writes [H, W, 1] or [H, W, 3] values (rounded, clamped to 0..255) as PNG.
inline void write_png(const fs::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw ShapeError("write_png expects [H, W, 1|3], got " + to_string(image.shape()));
  }
  const auto px = detail::to_bytes(image);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.dim(1));
  img.height = static_cast<png_uint_32>(image.dim(0));
  img.format = image.dim(2) == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, px.data(), 0, nullptr)) {
    throw IoError("cannot write " + path.string() + ": " + img.message);
  }
}

/// Writes [H, W, 1] or [H, W, 3] values as baseline JPEG.
inline void write_jpeg(const fs::path& path, const Tensor& image, int quality = 95) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw ShapeError("write_jpeg expects [H, W, 1|3], got " + to_string(image.shape()));
  }
  const auto px = detail::to_bytes(image);
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.string().c_str(), "wb"),
                                                       &std::fclose);
  if (!file) throw IoError("cannot write " + path.string());
  jpeg_compress_struct cinfo{};
  jpeg_error_mgr jerr{};
  cinfo.err = jpeg_std_error(&jerr);
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, file.get());
  cinfo.image_width = static_cast<JDIMENSION>(image.dim(1));
  cinfo.image_height = static_cast<JDIMENSION>(image.dim(0));
  cinfo.input_components = static_cast<int>(image.dim(2));
  cinfo.in_color_space = image.dim(2) == 1 ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = image.dim(1) * image.dim(2);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<unsigned char*>(px.data()) + cinfo.next_scanline * stride;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
}

/// Bilinear resize with half-pixel centers: output pixel i samples the input
/// at (i + 0.5) * in/out - 0.5, clamped to the valid range. Every output is
/// a convex combination of inputs.
inline Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw ShapeError("resize expects [H, W, C]");
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);
  if (h < 2 || w < 2) {
    throw ShapeError("cannot resize degenerate image of shape " + to_string(image.shape()));
  }
  if (out_h == 0 || out_w == 0) throw ShapeError("resize target must be non-empty");

  struct Tap {
    std::size_t lo, hi;
    float frac;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(src);
      const std::size_t hi = std::min(lo + 1, in - 1);
      t[i] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
    }
    return t;
  };
  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);

  Tensor out({out_h, out_w, c}, 0.0f);
  const float* in = image.data().data();
  for (std::size_t y = 0; y < out_h; ++y) {
    const auto& vy = ty[y];
    for (std::size_t x = 0; x < out_w; ++x) {
      const auto& vx = tx[x];
      for (std::size_t ch = 0; ch < c; ++ch) {
        const float a = in[(vy.lo * w + vx.lo) * c + ch];
        const float b = in[(vy.lo * w + vx.hi) * c + ch];
        const float d = in[(vy.hi * w + vx.lo) * c + ch];
        const float e = in[(vy.hi * w + vx.hi) * c + ch];
        const float top = a + (b - a) * vx.frac;
        const float bottom = d + (e - d) * vx.frac;
        float v = top + (bottom - top) * vy.frac;
        // Guard against rounding drifting outside the sample hull.
        const float lo = std::min({a, b, d, e});
        const float hi = std::max({a, b, d, e});
        out[(y * out_w + x) * c + ch] = std::clamp(v, lo, hi);
      }
    }
  }
  return out;
}

/// Maps raw 0..255 values onto [0, 1].
inline Tensor normalize(const Tensor& image) {
  Tensor out(image.shape(), 0.0f);
  for (std::size_t i = 0; i < image.numel(); ++i) {
    const float v = image[i];
    if (!(v >= 0.0f && v <= 255.0f)) {
      throw ValueError("pixel value out of 0..255 range: " + std::to_string(v));
    }
    out[i] = v / 255.0f;
  }
  return out;
}

}  // namespace mric
