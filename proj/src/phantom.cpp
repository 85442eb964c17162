#include "lphom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lphom/errors.hpp"
#include "lphom/rng.hpp"

namespace lphom {
namespace {

constexpr double kPi = std::numbers::pi;

// Columns: background, skull, csf, gray, white, ventricle, lesion, tumor core, tumor rim, edema.
constexpr std::array<std::array<float, kNumTissues>, kNumModalities> kIntensity = {{
    {0.00f, 0.30f, 0.12f, 0.50f, 0.80f, 0.12f, 0.32f, 0.18f, 0.45f, 0.38f},  // T1w
    {0.00f, 0.66f, 0.20f, 0.55f, 0.72f, 0.20f, 0.42f, 0.20f, 0.97f, 0.40f},  // T1ce
    {0.00f, 0.20f, 0.95f, 0.62f, 0.42f, 0.95f, 0.82f, 0.88f, 0.60f, 0.78f},  // T2w
    {0.00f, 0.18f, 0.06f, 0.58f, 0.42f, 0.06f, 0.96f, 0.30f, 0.72f, 0.88f},  // FLAIR
    {0.00f, 0.38f, 0.68f, 0.62f, 0.52f, 0.68f, 0.72f, 0.66f, 0.60f, 0.66f},  // PD
}};

struct Ellipse {
  double cx, cy, ax, ay, angle;

  // Normalized radius; <= 1 inside.
  double radius(double x, double y) const {
    const double c = std::cos(angle), s = std::sin(angle);
    const double dx = x - cx, dy = y - cy;
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return std::sqrt((u / ax) * (u / ax) + (v / ay) * (v / ay));
  }
};

struct Anatomy {
  Ellipse head;
  double skull = 0.1;       // radial fraction taken by skull
  double csf = 0.04;        // radial fraction of subarachnoid CSF
  double gray = 0.14;       // mean cortical thickness
  std::array<double, 4> gyri{};  // amplitudes/phases of the gray-white boundary
  int gyri_freq1 = 8, gyri_freq2 = 4;
  double falx = 0.025;
  std::array<Ellipse, 2> ventricles{};
};

struct Lesion {
  Ellipse shape;
};

struct Tumor {
  double cx = 0, cy = 0, r = 0;
  double a1 = 0, p1 = 0, a2 = 0, p2 = 0;

  // Distance normalized by the lobulated radius at this bearing.
  double rel(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    const double phi = std::atan2(dy, dx);
    const double rr = r * (1.0 + a1 * std::sin(3 * phi + p1) + a2 * std::sin(5 * phi + p2));
    return std::sqrt(dx * dx + dy * dy) / rr;
  }
};

Anatomy make_anatomy(std::uint64_t seed, Pathology pathology) {
  Rng rng(mix_seed(seed, 0xA7A7));
  Anatomy a;
  a.head = {rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(0.70, 0.80),
            rng.uniform(0.84, 0.93), rng.uniform(-0.12, 0.12)};
  a.skull = rng.uniform(0.08, 0.11);
  a.csf = rng.uniform(0.03, 0.05);
  a.gray = rng.uniform(0.12, 0.16);
  a.gyri = {rng.uniform(0.25, 0.40), rng.uniform(0, 2 * kPi), rng.uniform(0.10, 0.20),
            rng.uniform(0, 2 * kPi)};
  a.gyri_freq1 = rng.uniform_int(7, 11);
  a.gyri_freq2 = rng.uniform_int(3, 5);
  const double vx = rng.uniform(0.07, 0.10);
  const double vy = rng.uniform(-0.12, -0.02);
  const double vw = rng.uniform(0.05, 0.07);
  const double vh = rng.uniform(0.16, 0.22);
  const double tilt = rng.uniform(0.25, 0.40);
  double grow = 1.0, shift = 1.0;
  if (pathology == Pathology::kDementia) {
    grow = 1.5;
    shift = 1.15;
    a.csf += 0.04;
  }
  // Ventricles live in head-aligned coordinates; rotate them with the head.
  const double c = std::cos(a.head.angle), s = std::sin(a.head.angle);
  for (int side = 0; side < 2; ++side) {
    const double sign = side == 0 ? -1.0 : 1.0;
    const double lx = sign * vx * shift, ly = vy;
    a.ventricles[static_cast<std::size_t>(side)] = {a.head.cx + c * lx - s * ly, a.head.cy + s * lx + c * ly,
                                                    vw * grow, vh * grow, a.head.angle - sign * tilt};
  }
  return a;
}

Tissue base_tissue(const Anatomy& a, double x, double y) {
  const double r = a.head.radius(x, y);
  if (r > 1.0) return Tissue::kBackground;
  const double brain_edge = 1.0 - a.skull;
  if (r > brain_edge) return Tissue::kSkull;
  const double cortex_edge = brain_edge - a.csf;
  if (r > cortex_edge) return Tissue::kCsf;
  // Head-aligned coordinates for the falx and gyral bearing.
  const double c = std::cos(a.head.angle), s = std::sin(a.head.angle);
  const double dx = x - a.head.cx, dy = y - a.head.cy;
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  if (std::abs(u) < a.falx && v < 0.0 && r > 0.35) return Tissue::kCsf;
  for (const auto& ve : a.ventricles) {
    if (ve.radius(x, y) <= 1.0) return Tissue::kVentricle;
  }
  const double phi = std::atan2(v, u);
  const double thickness =
      a.gray * (1.0 + a.gyri[0] * std::sin(a.gyri_freq1 * phi + a.gyri[1]) +
                a.gyri[2] * std::sin(a.gyri_freq2 * phi + a.gyri[3]));
  if (r > cortex_edge - thickness) return Tissue::kGray;
  return Tissue::kWhite;
}

bool is_brain(Tissue t) {
  return t == Tissue::kGray || t == Tissue::kWhite || t == Tissue::kVentricle;
}

std::vector<Lesion> place_lesions(const Anatomy& a, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x5C1E));
  const int want = rng.uniform_int(3, 8);
  std::vector<Lesion> out;
  for (int attempt = 0; attempt < 4000 && static_cast<int>(out.size()) < want; ++attempt) {
    const double rad = rng.uniform(0.065, 0.09);
    Lesion l{{rng.uniform(-0.6, 0.6), rng.uniform(-0.7, 0.6), rad, rad * rng.uniform(0.7, 0.9),
              rng.uniform(0, kPi)}};
    bool ok = base_tissue(a, l.shape.cx, l.shape.cy) == Tissue::kWhite;
    // Whole ovoid plus a margin must sit in white matter.
    for (int ring = 1; ok && ring <= 3; ++ring) {
      const double m = (rad + 0.04) * ring / 3;
      for (int k = 0; ok && k < 32; ++k) {
        const double t = 2 * kPi * k / 32;
        ok = base_tissue(a, l.shape.cx + m * std::cos(t), l.shape.cy + m * std::sin(t)) == Tissue::kWhite;
      }
    }
    for (const auto& o : out) {
      if (!ok) break;
      const double d = std::hypot(o.shape.cx - l.shape.cx, o.shape.cy - l.shape.cy);
      ok = d > o.shape.ax + l.shape.ax + 0.07;
    }
    if (ok) out.push_back(l);
  }
  return out;
}

Tumor place_tumor(const Anatomy& a, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x6B1A));
  Tumor t;
  for (int attempt = 0; attempt < 4000; ++attempt) {
    t.r = rng.uniform(0.16, 0.22);
    const double ang = rng.uniform(0, 2 * kPi);
    const double dist = rng.uniform(0.18, 0.42);
    t.cx = a.head.cx + dist * std::cos(ang);
    t.cy = a.head.cy + dist * std::sin(ang);
    t.a1 = rng.uniform(0.05, 0.12);
    t.p1 = rng.uniform(0, 2 * kPi);
    t.a2 = rng.uniform(0.03, 0.08);
    t.p2 = rng.uniform(0, 2 * kPi);
    bool ok = true;
    for (int k = 0; ok && k < 16; ++k) {
      const double th = 2 * kPi * k / 16;
      const double m = 1.15 * t.r;
      ok = is_brain(base_tissue(a, t.cx + m * std::cos(th), t.cy + m * std::sin(th)));
    }
    if (ok) return t;
  }
  // Fallback: a small central mass always fits.
  t.cx = a.head.cx + 0.2;
  t.cy = a.head.cy;
  t.r = 0.14;
  return t;
}

}  // namespace

const std::array<float, kNumTissues>& tissue_intensities(Modality modality) {
  return kIntensity.at(static_cast<std::size_t>(modality));
}

std::size_t PhantomSlice::area(Tissue t) const {
  return static_cast<std::size_t>(std::count(tissue.begin(), tissue.end(), t));
}

int count_components(const std::vector<Tissue>& tissue, int size, Tissue t) {
  std::vector<char> seen(tissue.size(), 0);
  std::vector<int> stack;
  int count = 0;
  for (int i = 0; i < size * size; ++i) {
    if (tissue[static_cast<std::size_t>(i)] != t || seen[static_cast<std::size_t>(i)]) continue;
    ++count;
    stack.push_back(i);
    seen[static_cast<std::size_t>(i)] = 1;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      const int py = p / size, px = p % size;
      const int nbr[4][2] = {{py - 1, px}, {py + 1, px}, {py, px - 1}, {py, px + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[0] >= size || q[1] < 0 || q[1] >= size) continue;
        const int qi = q[0] * size + q[1];
        if (tissue[static_cast<std::size_t>(qi)] == t && !seen[static_cast<std::size_t>(qi)]) {
          seen[static_cast<std::size_t>(qi)] = 1;
          stack.push_back(qi);
        }
      }
    }
  }
  return count;
}

PhantomSlice render_phantom(std::uint64_t anatomy_seed, const ConditionLabel& label, int size) {
  if (size < 32 || size % 4 != 0) {
    throw ShapeError("phantom size must be >= 32 and a multiple of 4, got " + std::to_string(size));
  }
  const Anatomy anatomy = make_anatomy(anatomy_seed, label.pathology);
  std::vector<Lesion> lesions;
  std::vector<Tumor> tumors;
  if (label.pathology == Pathology::kSclerosis) lesions = place_lesions(anatomy, anatomy_seed);
  if (label.pathology == Pathology::kGlioblastoma) tumors.push_back(place_tumor(anatomy, anatomy_seed));

  auto classify = [&](double x, double y) {
    Tissue t = base_tissue(anatomy, x, y);
    for (const auto& tu : tumors) {
      const double d = tu.rel(x, y);
      // The mass displaces fluid too, so a falx strand cannot split it.
      const bool displaced = is_brain(t) || t == Tissue::kCsf;
      if (d < 0.6 && displaced) return Tissue::kTumorCore;
      if (d < 1.0 && displaced) return Tissue::kTumorRim;
      if (d < 1.5 && (t == Tissue::kWhite || t == Tissue::kGray)) return Tissue::kEdema;
    }
    if (t == Tissue::kWhite) {
      for (const auto& l : lesions) {
        if (l.shape.radius(x, y) <= 1.0) return Tissue::kLesion;
      }
    }
    return t;
  };

  const auto& lut = tissue_intensities(label.modality);
  // Texture and noise depend on the anatomy seed only, so paired modalities
  // differ purely in contrast.
  Rng tex(mix_seed(anatomy_seed, 0x7E47));
  const double f1 = tex.uniform(3.0, 6.0), f2 = tex.uniform(3.0, 6.0);
  const double p1 = tex.uniform(0, 2 * kPi), p2 = tex.uniform(0, 2 * kPi);
  const double gain = tex.uniform(0.97, 1.03);

  PhantomSlice out;
  out.size = size;
  out.tissue.resize(static_cast<std::size_t>(size) * size);
  out.image = Tensor({1, size, size});
  out.lesion_count = static_cast<int>(lesions.size());
  out.tumor_count = static_cast<int>(tumors.size());
  const double px = 2.0 / size;
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const double y = -1.0 + (i + 0.5) * px;
      const double x = -1.0 + (j + 0.5) * px;
      const std::size_t idx = static_cast<std::size_t>(i) * size + j;
      out.tissue[idx] = classify(x, y);
      // 2x2 supersampling softens boundaries like partial-volume averaging.
      double acc = 0;
      for (int si = 0; si < 2; ++si)
        for (int sj = 0; sj < 2; ++sj) {
          const Tissue t = classify(x + (sj - 0.5) * 0.5 * px, y + (si - 0.5) * 0.5 * px);
          acc += lut[static_cast<std::size_t>(t)];
        }
      double v = 0.25 * acc;
      if (out.tissue[idx] != Tissue::kBackground) {
        v *= gain * (1.0 + 0.03 * std::sin(f1 * x + p1) * std::sin(f2 * y + p2));
        v += 0.008 * tex.normal();
      }
      out.image[idx] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

Tensor generate_phantom(std::uint64_t anatomy_seed, const ConditionLabel& label, int size) {
  return render_phantom(anatomy_seed, label, size).image;
}

}  // namespace lphom
