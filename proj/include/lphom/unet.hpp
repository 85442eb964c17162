#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lphom/diffusion.hpp"
#include "lphom/layers.hpp"
#include "lphom/vae.hpp"

namespace lphom {

// Sinusoidal embedding of t / T: d/2 geometric frequencies from 1 to 1e4,
// sines in the first half and cosines in the second. Throws on t outside [1, T]
// or odd d.
std::vector<double> embed_timestep(int t, int T, int d);

struct UNetConfig {
  int latent_channels = 4;
  int latent_size = 16;
  std::vector<int> channels = {32, 64, 128};
  int blocks_per_level = 2;
  int embed_dim = 64;
  int schedule_T = 1000;
};

// Conditional noise predictor eps(z_t, t, pathology, modality).
template <typename T>
class CondUNet {
 public:
  CondUNet(UNetConfig config, std::uint64_t seed);

  // z_t (N,C,h,w) with one timestep and label per item.
  Var forward(Tape<T>& tape, Var z_t, std::span<const int> t, std::span<const ConditionLabel> labels) const;
  // Inference on a batch that shares t and label.
  BasicTensor<T> predict_noise(const BasicTensor<T>& z_t, int t, const ConditionLabel& label) const;

  NoiseModel<T> as_model() const;
  EpsPredictor<T> as_predictor() const;

  const UNetConfig& config() const { return config_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }

  // Parameter indices of the per-block embedding projections.
  std::vector<int> embedding_projection_weights() const;

  void check_latent_shape(const Shape& s) const;

 private:
  struct ResBlock {
    layers::GroupNorm<T> gn1, gn2;
    layers::Conv2d<T> conv1, conv2;
    layers::Linear<T> emb_proj;
    bool has_skip = false;
    layers::Conv2d<T> skip;
  };

  ResBlock make_block(const std::string& name, int in, int out, Rng& rng);
  Var run_block(Tape<T>& tape, const ResBlock& b, Var x, Var emb) const;

  UNetConfig config_;
  ParameterSet<T> params_;

  int pathology_table_ = -1;
  int modality_table_ = -1;
  layers::Linear<T> time_fc1_, time_fc2_;
  layers::Conv2d<T> conv_in_;
  std::vector<std::vector<ResBlock>> down_blocks_;
  std::vector<layers::Conv2d<T>> downsamplers_;
  std::vector<std::vector<ResBlock>> up_blocks_;
  layers::GroupNorm<T> out_gn_;
  layers::Conv2d<T> conv_out_;
};

struct LdmTrainConfig {
  int steps = 6000;
  int batch_size = 16;
  double lr = 1e-3;
  // Draw each batch item from a uniformly chosen label cell instead of
  // uniformly over latents, so rare cells are seen as often as common ones.
  bool balance_cells = true;
  // Half-cosine learning-rate decay to 0 over the run instead of a constant rate.
  bool cosine_decay = true;
  std::uint64_t seed = 0;
};

struct LdmTrainResult {
  CondUNet<float> model;
  std::vector<double> loss_history;
  // Label of every training item drawn, in order.
  std::vector<ConditionLabel> label_stream;
};

// latents (N,C,h,w) already scaled; labels has one entry per item.
LdmTrainResult train_ldm(const Tensor& latents, const std::vector<ConditionLabel>& labels,
                         const UNetConfig& model_config, const NoiseSchedule& sched, const LdmTrainConfig& config,
                         const ProgressFn& progress = {});

// Mean epsilon-prediction loss over `repeats` seeded passes through the latents.
double eval_eps_loss(const CondUNet<float>& model, const Tensor& latents, const std::vector<ConditionLabel>& labels,
                     const NoiseSchedule& sched, std::uint64_t seed, int repeats = 4, int batch_size = 64);

}  // namespace lphom
