#include "lphom/labels.hpp"

#include <algorithm>
#include <cctype>

#include "lphom/errors.hpp"

namespace lphom {
namespace {

constexpr std::array<std::string_view, kNumPathologies> kPathologyNames = {
    "Healthy", "Glioblastoma", "Sclerosis", "Dementia"};
constexpr std::array<std::string_view, kNumModalities> kModalityNames = {"T1w", "T1ce", "T2w", "FLAIR",
                                                                         "PD"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

ConditionLabel ConditionLabel::from_cell(int cell) {
  if (cell < 0 || cell >= kNumCells) throw ConfigError("cell index out of range: " + std::to_string(cell));
  return {static_cast<Pathology>(cell / kNumModalities), static_cast<Modality>(cell % kNumModalities)};
}

std::string_view to_string(Pathology p) { return kPathologyNames.at(static_cast<std::size_t>(p)); }
std::string_view to_string(Modality m) { return kModalityNames.at(static_cast<std::size_t>(m)); }

std::string to_string(const ConditionLabel& label) {
  return std::string(to_string(label.pathology)) + "/" + std::string(to_string(label.modality));
}

std::string cell_slug(const ConditionLabel& label) {
  return lower(to_string(label.pathology)) + "_" + lower(to_string(label.modality));
}

Pathology parse_pathology(std::string_view s) {
  for (std::size_t i = 0; i < kPathologyNames.size(); ++i) {
    if (iequals(s, kPathologyNames[i])) return static_cast<Pathology>(i);
  }
  throw ConfigError("unknown pathology '" + std::string(s) + "'");
}

Modality parse_modality(std::string_view s) {
  for (std::size_t i = 0; i < kModalityNames.size(); ++i) {
    if (iequals(s, kModalityNames[i])) return static_cast<Modality>(i);
  }
  throw ConfigError("unknown modality '" + std::string(s) + "'");
}

ConditionLabel parse_label(std::string_view s) {
  const auto slash = s.find('/');
  if (slash == std::string_view::npos) {
    throw ConfigError("label '" + std::string(s) + "' is not of the form Pathology/Modality");
  }
  return {parse_pathology(s.substr(0, slash)), parse_modality(s.substr(slash + 1))};
}

}  // namespace lphom
