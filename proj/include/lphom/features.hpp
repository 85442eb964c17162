#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "lphom/layers.hpp"
#include "lphom/vae.hpp"

namespace lphom {

enum class FeatureKind { kRandomConv, kVaeEncoder };

inline constexpr std::uint64_t kFeatureSeed = 0xF1D5EED;

// Maps single-channel images to fixed-length feature vectors, computed in
// double precision.
class FeatureExtractor {
 public:
  // Three conv(3x3) + ReLU + 2x2 average-pool stages (1 -> 16 -> 32 -> 64
  // channels) with fixed random weights, then global average pooling.
  static FeatureExtractor random_conv(std::uint64_t seed = kFeatureSeed);
  // Posterior means of a trained VAE, average-pooled to a 4x4 grid.
  static FeatureExtractor vae_encoder(const Vae<float>& vae);

  FeatureKind kind() const { return kind_; }
  int dim() const { return dim_; }

  // One row per image. Images are (1,S,S) or (1,1,S,S).
  Eigen::MatrixXd extract(const std::vector<Tensor>& images) const;

 private:
  FeatureExtractor() = default;
  Eigen::MatrixXd extract_batch(const Tensor64& x) const;

  FeatureKind kind_ = FeatureKind::kRandomConv;
  int dim_ = 0;
  std::shared_ptr<const ParameterSet<double>> conv_params_;
  std::vector<layers::Conv2d<double>> convs_;
  std::shared_ptr<const Vae<double>> vae_;
};

const char* to_string(FeatureKind kind);

}  // namespace lphom
