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

enum class Split { kTrain, kVal };
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

// Per-cell image counts, rows = pathology, columns = modality.
using CoverageMatrix = std::array<std::array<int, kNumModalities>, kNumPathologies>;

// Image counts of the reference clinical collection; zero marks a combination
// that has no data at all.
const CoverageMatrix& reference_counts();
// reference_counts() scaled and rounded up per cell.
CoverageMatrix scaled_counts(double scale);
int total(const CoverageMatrix& m);

struct ManifestRecord {
  std::string path;  // relative to the manifest's directory
  ConditionLabel label;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  CoverageMatrix coverage() const;
};

struct DatasetConfig {
  CoverageMatrix counts{};
  std::uint64_t master_seed = 0;
  int image_size = 64;

  static DatasetConfig with_scale(double scale, std::uint64_t master_seed);
};

// Validation images per cell: 10%, at least one when the cell is non-empty.
int val_count(int cell_count);

// Records the generator would write, without touching disk. Anatomy seeds are
// shared across modalities of the same pathology and subject index, mirroring
// multi-contrast acquisitions of one subject.
DatasetManifest plan_dataset(const DatasetConfig& config);

// Writes images/ and manifest.tsv under out_dir. Throws ConfigError on
// negative counts.
DatasetManifest generate_dataset(const DatasetConfig& config, const std::filesystem::path& out_dir);

inline constexpr const char* kManifestHeader = "# phantom-manifest v1";
inline constexpr const char* kManifestName = "manifest.tsv";

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest read_manifest(const std::filesystem::path& path);

struct LabeledImage {
  Tensor image;  // (1, S, S)
  ConditionLabel label;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
};

// Decodes every record (optionally one split) in manifest order, or in a
// seeded shuffled order when shuffle_seed is given.
std::vector<LabeledImage> load_dataset(const std::filesystem::path& manifest_path,
                                       std::optional<Split> split = std::nullopt,
                                       std::optional<std::uint64_t> shuffle_seed = std::nullopt);

}  // namespace lphom
