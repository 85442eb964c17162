#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lphom/tensor.hpp"

namespace lphom {

using Image64 = Eigen::MatrixXd;

struct SsimParams {
  int window = 7;
  double sigma = 1.5;
  double dynamic_range = 1.0;
  double k1 = 0.01;
  double k2 = 0.03;
  // One weight per scale; the default is the first three standard MS-SSIM
  // weights renormalized to sum to 1.
  std::vector<double> weights = default_weights();

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  int scales() const { return static_cast<int>(weights.size()); }

  static std::vector<double> default_weights();
};

// Normalized Gaussian window of side p.window.
Image64 gaussian_window(const SsimParams& p);

// Single-channel image (1,S,S), (1,1,S,S) or (S,S) as a double matrix.
Image64 to_image(const Tensor& t);

// Mean of the SSIM map over all fully-contained window positions.
double ssim(const Image64& x, const Image64& y, const SsimParams& p = {});
// Product of per-scale SSIM^weight with 2x average-pool downsampling between scales.
double ms_ssim(const Image64& x, const Image64& y, const SsimParams& p = {});

struct DiversityStats {
  double mean = 0;
  double stddev = 0;
  int pairs = 0;

  // "0.700 ± 0.073"
  std::string format() const;
};

// MS-SSIM over n_pairs random pairs of distinct indices drawn from `seed`.
// The spread is the population standard deviation.
DiversityStats diversity_report(const std::vector<Tensor>& images, const SsimParams& p, int n_pairs,
                                std::uint64_t seed);

}  // namespace lphom
