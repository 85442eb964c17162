#include "lphom/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "lphom/errors.hpp"

namespace lphom {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::filesystem::path& path, int width, int height, int color_type,
               const std::uint8_t* pixels, int channels) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw MissingArtifactError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw MissingArtifactError("libpng initialisation failed for " + path.string());
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw MissingArtifactError("failed writing PNG " + path.string());
  }
  png_init_io(png, f.get());
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + static_cast<std::size_t>(y) * width * channels));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

std::uint8_t quantize_unit(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

Tensor quantize_8bit(const Tensor& image) {
  Tensor out = image;
  for (auto& v : out.storage()) v = static_cast<float>(quantize_unit(v)) / 255.0f;
  return out;
}

void write_png_gray(const std::filesystem::path& path, const Tensor& image) {
  const int r = image.rank();
  if (!(r == 2 || (r == 3 && image.dim(0) == 1))) {
    throw ShapeError("write_png_gray expects (1,H,W) or (H,W), got " + shape_str(image.shape()));
  }
  const int h = image.dim(r - 2), w = image.dim(r - 1);
  std::vector<std::uint8_t> px(image.size());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = quantize_unit(image[i]);
  write_png(path, w, h, PNG_COLOR_TYPE_GRAY, px.data(), 1);
}

void write_png_rgb(const std::filesystem::path& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw ShapeError("write_png_rgb buffer size does not match " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
  write_png(path, width, height, PNG_COLOR_TYPE_RGB, rgb.data(), 3);
}

Tensor read_png_gray(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw MissingArtifactError("image file not found: " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw MissingArtifactError("corrupt image (not a PNG): " + path.string());
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw MissingArtifactError("libpng initialisation failed for " + path.string());
  }
  std::vector<std::uint8_t> pixels;
  png_uint_32 width = 0, height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw MissingArtifactError("corrupt image: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw MissingArtifactError("expected 8-bit grayscale PNG: " + path.string());
  }
  pixels.resize(static_cast<std::size_t>(width) * height);
  for (png_uint_32 y = 0; y < height; ++y) png_read_row(png, pixels.data() + static_cast<std::size_t>(y) * width, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  Tensor out({1, static_cast<int>(height), static_cast<int>(width)});
  for (std::size_t i = 0; i < pixels.size(); ++i) out[i] = static_cast<float>(pixels[i]) / 255.0f;
  return out;
}

}  // namespace lphom
