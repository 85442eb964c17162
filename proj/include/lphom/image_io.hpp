#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "lphom/tensor.hpp"

namespace lphom {

// 8-bit grayscale PNG from a (1,H,W) or (H,W) tensor with values in [0,1].
void write_png_gray(const std::filesystem::path& path, const Tensor& image);

// Interleaved 8-bit RGB PNG.
void write_png_rgb(const std::filesystem::path& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb);

// Decodes an 8-bit grayscale PNG to a (1,H,W) tensor in [0,1].
// Throws MissingArtifactError for absent or undecodable files.
Tensor read_png_gray(const std::filesystem::path& path);

// Rounds to the nearest of the 256 levels a PNG can store.
std::uint8_t quantize_unit(float v);
Tensor quantize_8bit(const Tensor& image);

}  // namespace lphom
