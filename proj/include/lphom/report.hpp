#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lphom/labels.hpp"
#include "lphom/tensor.hpp"

namespace lphom {

// One optional entry per cell of the pathology x modality grid; absent cells
// print as "-".
using CellTable = std::array<std::optional<std::string>, kNumCells>;

// Header "pathology,T1w,...,PD" then one row per pathology.
std::string table_csv(const CellTable& table);
// Column-aligned text with a title line.
std::string table_text(const std::string& title, const CellTable& table);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// Writes <stem>.csv and <stem>.txt under dir.
void write_table(const std::filesystem::path& dir, const std::string& stem, const std::string& title,
                 const CellTable& table);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

inline constexpr std::array<std::uint8_t, 3> kHeldOutBorder = {255, 140, 0};
inline constexpr std::array<std::uint8_t, 3> kTrainedBorder = {64, 64, 64};

// 4 x 5 montage of one image per cell, row-major by cell index. Held-out cells
// get an orange frame, trained cells a gray one.
RgbImage grid_montage(const std::vector<Tensor>& cell_images, const std::array<bool, kNumCells>& held_out,
                      int border = 3, int gap = 2);

}  // namespace lphom
