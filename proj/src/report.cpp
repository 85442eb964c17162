#include "lphom/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "lphom/errors.hpp"
#include "lphom/image_io.hpp"

namespace lphom {

std::string table_csv(const CellTable& table) {
  std::ostringstream os;
  os << "pathology";
  for (Modality m : kAllModalities) os << ',' << to_string(m);
  os << '\n';
  for (Pathology p : kAllPathologies) {
    os << to_string(p);
    for (Modality m : kAllModalities) {
      const auto& v = table[static_cast<std::size_t>(ConditionLabel{p, m}.cell())];
      os << ',' << (v ? *v : "-");
    }
    os << '\n';
  }
  return os.str();
}

namespace {

// Display width, counting each UTF-8 code point once.
std::size_t display_width(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
}

std::string pad(const std::string& s, std::size_t w) { return s + std::string(w - std::min(w, display_width(s)), ' '); }

}  // namespace

std::string table_text(const std::string& title, const CellTable& table) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({""});
  for (Modality m : kAllModalities) rows[0].emplace_back(to_string(m));
  for (Pathology p : kAllPathologies) {
    std::vector<std::string> row{std::string(to_string(p))};
    for (Modality m : kAllModalities) {
      const auto& v = table[static_cast<std::size_t>(ConditionLabel{p, m}.cell())];
      row.push_back(v ? *v : "-");
    }
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], display_width(r[c]));
  std::ostringstream os;
  os << title << '\n';
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) line += pad(r[c], width[c]) + (c + 1 < r.size() ? "  " : "");
    line.erase(line.find_last_not_of(' ') + 1);
    os << line << '\n';
  }
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw MissingArtifactError("cannot write " + path.string());
  out << text;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("missing file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_table(const std::filesystem::path& dir, const std::string& stem, const std::string& title,
                 const CellTable& table) {
  write_text_file(dir / (stem + ".csv"), table_csv(table));
  write_text_file(dir / (stem + ".txt"), table_text(title, table));
}

RgbImage grid_montage(const std::vector<Tensor>& cell_images, const std::array<bool, kNumCells>& held_out, int border,
                      int gap) {
  if (cell_images.size() != static_cast<std::size_t>(kNumCells)) {
    throw ShapeError("grid_montage needs " + std::to_string(kNumCells) + " images, got " +
                     std::to_string(cell_images.size()));
  }
  const Tensor& first = cell_images[0];
  const int s = first.dim(first.rank() - 1);
  const int tile = s + 2 * border;
  RgbImage img;
  img.width = kNumModalities * tile + (kNumModalities + 1) * gap;
  img.height = kNumPathologies * tile + (kNumPathologies + 1) * gap;
  img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 255);
  auto put = [&](int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t o = (static_cast<std::size_t>(y) * img.width + x) * 3;
    img.rgb[o] = r;
    img.rgb[o + 1] = g;
    img.rgb[o + 2] = b;
  };
  for (int cell = 0; cell < kNumCells; ++cell) {
    const Tensor& im = cell_images[static_cast<std::size_t>(cell)];
    if (im.size() != static_cast<std::size_t>(s) * s) throw ShapeError("grid_montage: cell images differ in size");
    const int row = cell / kNumModalities, col = cell % kNumModalities;
    const int x0 = gap + col * (tile + gap), y0 = gap + row * (tile + gap);
    const auto& frame = held_out[static_cast<std::size_t>(cell)] ? kHeldOutBorder : kTrainedBorder;
    for (int y = 0; y < tile; ++y)
      for (int x = 0; x < tile; ++x) {
        const int ix = x - border, iy = y - border;
        if (ix < 0 || iy < 0 || ix >= s || iy >= s) {
          put(x0 + x, y0 + y, frame[0], frame[1], frame[2]);
        } else {
          const std::uint8_t v = quantize_unit(im[static_cast<std::size_t>(iy) * s + ix]);
          put(x0 + x, y0 + y, v, v, v);
        }
      }
  }
  return img;
}

}  // namespace lphom
