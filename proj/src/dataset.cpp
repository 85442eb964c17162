#include "lphom/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lphom/errors.hpp"
#include "lphom/image_io.hpp"
#include "lphom/phantom.hpp"
#include "lphom/rng.hpp"

namespace lphom {

namespace fs = std::filesystem;

std::string_view to_string(Split s) { return s == Split::kTrain ? "train" : "val"; }

Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  throw ConfigError("unknown split '" + std::string(s) + "'");
}

const CoverageMatrix& reference_counts() {
  static const CoverageMatrix m = {{
      {957, 0, 578, 0, 578},
      {887, 887, 887, 887, 0},
      {49, 30, 49, 49, 19},
      {139, 0, 0, 0, 0},
  }};
  return m;
}

CoverageMatrix scaled_counts(double scale) {
  if (!(scale >= 0.0)) throw ConfigError("dataset scale must be >= 0");
  CoverageMatrix out{};
  const auto& ref = reference_counts();
  for (int p = 0; p < kNumPathologies; ++p)
    for (int m = 0; m < kNumModalities; ++m) {
      // The epsilon keeps exact products such as 30 * 0.1 from rounding up.
      const double v = ref[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)] * scale;
      out[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)] = static_cast<int>(std::ceil(v - 1e-9));
    }
  return out;
}

int total(const CoverageMatrix& m) {
  int n = 0;
  for (const auto& row : m)
    for (int v : row) n += v;
  return n;
}

CoverageMatrix DatasetManifest::coverage() const {
  CoverageMatrix c{};
  for (const auto& r : records) {
    ++c[static_cast<std::size_t>(r.label.pathology)][static_cast<std::size_t>(r.label.modality)];
  }
  return c;
}

DatasetConfig DatasetConfig::with_scale(double scale, std::uint64_t master_seed) {
  DatasetConfig c;
  c.counts = scaled_counts(scale);
  c.master_seed = master_seed;
  return c;
}

int val_count(int cell_count) {
  if (cell_count <= 0) return 0;
  return std::max(1, static_cast<int>(std::lround(0.1 * cell_count)));
}

DatasetManifest plan_dataset(const DatasetConfig& config) {
  DatasetManifest manifest;
  for (int p = 0; p < kNumPathologies; ++p) {
    for (int m = 0; m < kNumModalities; ++m) {
      const int n = config.counts[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)];
      const ConditionLabel label{static_cast<Pathology>(p), static_cast<Modality>(m)};
      if (n < 0) {
        throw ConfigError("negative image count " + std::to_string(n) + " for " + to_string(label));
      }
      const int n_val = val_count(n);
      for (int i = 0; i < n; ++i) {
        ManifestRecord r;
        r.label = label;
        r.seed = mix_seed(config.master_seed, static_cast<std::uint64_t>(p) * 1000003ULL + static_cast<std::uint64_t>(i));
        r.split = i >= n - n_val ? Split::kVal : Split::kTrain;
        char name[64];
        std::snprintf(name, sizeof(name), "%s_%04d.png", cell_slug(label).c_str(), i);
        r.path = std::string("images/") + name;
        manifest.records.push_back(std::move(r));
      }
    }
  }
  return manifest;
}

DatasetManifest generate_dataset(const DatasetConfig& config, const fs::path& out_dir) {
  DatasetManifest manifest = plan_dataset(config);
  fs::create_directories(out_dir / "images");
  for (const auto& r : manifest.records) {
    write_png_gray(out_dir / r.path, generate_phantom(r.seed, r.label, config.image_size));
  }
  write_manifest(manifest, out_dir / kManifestName);
  return manifest;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw MissingArtifactError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records) {
    out << r.path << '\t' << to_string(r.label.pathology) << '\t' << to_string(r.label.modality) << '\t'
        << to_string(r.split) << '\t' << r.seed << '\n';
  }
}

DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("manifest not found: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) {
    throw ConfigError("manifest " + path.string() + " lacks header '" + kManifestHeader + "'");
  }
  DatasetManifest manifest;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 5) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected 5 tab-separated fields");
    }
    ManifestRecord r;
    r.path = fields[0];
    try {
      r.label = {parse_pathology(fields[1]), parse_modality(fields[2])};
      r.split = parse_split(fields[3]);
      r.seed = std::stoull(fields[4]);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": bad seed '" + fields[4] + "'");
    }
    manifest.records.push_back(std::move(r));
  }
  return manifest;
}

std::vector<LabeledImage> load_dataset(const fs::path& manifest_path, std::optional<Split> split,
                                       std::optional<std::uint64_t> shuffle_seed) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const fs::path root = manifest_path.parent_path();
  std::vector<LabeledImage> out;
  for (const auto& r : manifest.records) {
    if (split && r.split != *split) continue;
    out.push_back({read_png_gray(root / r.path), r.label, r.split, r.seed});
  }
  if (shuffle_seed) {
    Rng rng(*shuffle_seed);
    for (std::size_t i = out.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(out[i - 1], out[j]);
    }
  }
  return out;
}

}  // namespace lphom
