#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "lphom/layers.hpp"

namespace lphom {

struct VaeConfig {
  int image_size = 64;
  int latent_channels = 4;
  int base_channels = 16;

  int latent_size() const { return image_size / 4; }
};

// Diagonal Gaussian posterior q(z|x) with log-variance parameterization.
template <typename T>
struct LatentDistribution {
  BasicTensor<T> mu;
  BasicTensor<T> logvar;
};

// Closed-form KL(q || N(0, I)), averaged over the batch.
template <typename T>
double kl_divergence(const LatentDistribution<T>& dist);

// Convolutional VAE compressing (N,1,S,S) images to (N,C,S/4,S/4) latents.
template <typename T>
class Vae {
 public:
  static constexpr double kLogvarMin = -30.0;
  static constexpr double kLogvarMax = 20.0;

  Vae(VaeConfig config, std::uint64_t seed);

  struct Posterior {
    Var mu;
    Var logvar;
  };

  Posterior encode(Tape<T>& tape, Var x) const;
  Var decode(Tape<T>& tape, Var z) const;
  // z = mu + exp(logvar / 2) * eps
  Var reparameterize(Tape<T>& tape, const Posterior& q, Var eps) const;

  LatentDistribution<T> encode(const BasicTensor<T>& x) const;
  BasicTensor<T> decode(const BasicTensor<T>& z) const;

  const VaeConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // Multiplier applied to posterior means before diffusion: 1 / std of the
  // training latents. 1.0 until measured.
  double latent_scale() const { return latent_scale_; }
  void set_latent_scale(double s) { latent_scale_ = s; }

  void check_image_shape(const Shape& s) const;
  void check_latent_shape(const Shape& s) const;

 private:
  VaeConfig config_;
  ParameterSet<T> params_;
  double latent_scale_ = 1.0;

  layers::Conv2d<T> enc_in_, enc_down1_, enc_down2_, enc_mid_, enc_out_;
  layers::GroupNorm<T> enc_gn0_, enc_gn1_, enc_gn2_, enc_gn3_;
  layers::Conv2d<T> dec_in_, dec_mid_, dec_out_;
  layers::ConvTranspose2d<T> dec_up1_, dec_up2_;
  layers::GroupNorm<T> dec_gn0_, dec_gn1_, dec_gn2_, dec_gn3_;
};

// Reconstruction MSE plus kl_weight * KL for one batch; eps drives the
// reparameterized sample.
struct VaeLoss {
  Var total;
  Var reconstruction;
  Var kl;
};

template <typename T>
VaeLoss vae_loss(Tape<T>& tape, const Vae<T>& vae, Var x, Var eps, double kl_weight);

struct VaeTrainConfig {
  int steps = 3000;
  int batch_size = 16;
  double lr = 1e-3;
  double kl_weight = 1e-6;
  std::uint64_t seed = 0;
};

struct VaeTrainResult {
  Vae<float> model;
  std::vector<double> loss_history;
};

using ProgressFn = std::function<void(int step, double loss)>;

// Throws ShapeError on an empty training set.
VaeTrainResult train_vae(const std::vector<Tensor>& train_images, const VaeConfig& model_config,
                         const VaeTrainConfig& config, const ProgressFn& progress = {});

// Mean squared error of decode(encode(x).mu) over the images.
double reconstruction_mse(const Vae<float>& vae, const std::vector<Tensor>& images, int batch_size = 32);

// Posterior means of the images, stacked (N,C,h,w).
Tensor encode_means(const Vae<float>& vae, const std::vector<Tensor>& images, int batch_size = 32);

// 1 / standard deviation over every element of the latents.
double latent_scale_for(const Tensor& latents);

// Trailing moving average with the given window (shorter at the start).
std::vector<double> smooth(const std::vector<double>& values, int window);

}  // namespace lphom
