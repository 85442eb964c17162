#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lphom/labels.hpp"
#include "lphom/tensor.hpp"

namespace lphom {

enum class Tissue : std::uint8_t {
  kBackground = 0,
  kSkull,
  kCsf,
  kGray,
  kWhite,
  kVentricle,
  kLesion,
  kTumorCore,
  kTumorRim,
  kEdema,
};
inline constexpr int kNumTissues = 10;

// Mean intensity of each tissue class under a modality's contrast.
const std::array<float, kNumTissues>& tissue_intensities(Modality modality);

struct PhantomSlice {
  Tensor image;                     // (1, size, size), values in [0, 1]
  std::vector<Tissue> tissue;       // row-major size*size label map
  int size = 0;
  int lesion_count = 0;             // placed sclerosis lesions
  int tumor_count = 0;              // placed glioblastoma masses

  std::size_t area(Tissue t) const;
};

// Renders a brain-like axial slice. Geometry is a pure function of
// (anatomy_seed, pathology); the modality only selects the intensity mapping,
// so two modalities of the same seed and pathology share a tissue map.
// Throws ShapeError unless size >= 32 and size % 4 == 0.
PhantomSlice render_phantom(std::uint64_t anatomy_seed, const ConditionLabel& label, int size = 64);

// Image part of render_phantom.
Tensor generate_phantom(std::uint64_t anatomy_seed, const ConditionLabel& label, int size = 64);

// Number of 4-connected components of tissue t in the map.
int count_components(const std::vector<Tissue>& tissue, int size, Tissue t);

}  // namespace lphom
