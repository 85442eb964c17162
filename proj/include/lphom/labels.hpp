#pragma once

#include <array>
#include <string>
#include <string_view>

namespace lphom {

enum class Pathology { kHealthy = 0, kGlioblastoma = 1, kSclerosis = 2, kDementia = 3 };
enum class Modality { kT1w = 0, kT1ce = 1, kT2w = 2, kFlair = 3, kPd = 4 };

inline constexpr int kNumPathologies = 4;
inline constexpr int kNumModalities = 5;
inline constexpr int kNumCells = kNumPathologies * kNumModalities;

inline constexpr std::array<Pathology, kNumPathologies> kAllPathologies = {
    Pathology::kHealthy, Pathology::kGlioblastoma, Pathology::kSclerosis, Pathology::kDementia};
inline constexpr std::array<Modality, kNumModalities> kAllModalities = {
    Modality::kT1w, Modality::kT1ce, Modality::kT2w, Modality::kFlair, Modality::kPd};

struct ConditionLabel {
  Pathology pathology = Pathology::kHealthy;
  Modality modality = Modality::kT1w;

  // Row-major index into the 4x5 pathology x modality grid.
  int cell() const { return static_cast<int>(pathology) * kNumModalities + static_cast<int>(modality); }
  static ConditionLabel from_cell(int cell);

  bool operator==(const ConditionLabel&) const = default;
};

std::string_view to_string(Pathology p);
std::string_view to_string(Modality m);
// "Pathology/Modality", e.g. "Healthy/T1w".
std::string to_string(const ConditionLabel& label);
// Lower-case, filesystem-friendly form, e.g. "healthy_t1w".
std::string cell_slug(const ConditionLabel& label);

// Case-insensitive; throws ConfigError on unknown names.
Pathology parse_pathology(std::string_view s);
Modality parse_modality(std::string_view s);
ConditionLabel parse_label(std::string_view s);

}  // namespace lphom
