#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lphom/labels.hpp"
#include "lphom/tape.hpp"

namespace lphom {

enum class ScheduleKind { kLinear };

// Tables indexed by timestep t = 1..T. alpha_bar(0) is 1 by convention.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar_table;

  double beta_at(int t) const;
  double alpha_at(int t) const;
  double alpha_bar(int t) const;
  // Posterior variance beta_t (1 - abar_{t-1}) / (1 - abar_t).
  double beta_tilde(int t) const;
};

// Throws ConfigError on T < 1 or bounds outside 0 < start <= end < 1.
NoiseSchedule make_schedule(ScheduleKind kind, int T, double beta_start, double beta_end);

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
template <typename T>
BasicTensor<T> forward_marginal(const BasicTensor<T>& z0, int t, const BasicTensor<T>& eps,
                                const NoiseSchedule& sched);

// One forward step: z_t = sqrt(alpha_t) z_{t-1} + sqrt(beta_t) eps
template <typename T>
BasicTensor<T> forward_step(const BasicTensor<T>& z_prev, int t, const BasicTensor<T>& eps,
                            const NoiseSchedule& sched);

// Differentiable noise predictor used during training. t and labels hold one
// entry per batch item.
template <typename T>
using NoiseModel =
    std::function<Var(Tape<T>&, Var z_t, std::span<const int> t, std::span<const ConditionLabel> labels)>;

// Inference-only predictor: the whole batch shares one timestep and label.
template <typename T>
using EpsPredictor = std::function<BasicTensor<T>(const BasicTensor<T>& z_t, int t, const ConditionLabel& label)>;

struct TrainingLossTerms {
  Var loss;
  std::vector<int> t;
};

// Draws t ~ U{1..T} per item and eps ~ N(0, I), and records mse(eps, model(z_t)).
template <typename T>
TrainingLossTerms training_loss(Tape<T>& tape, const NoiseModel<T>& model, const BasicTensor<T>& z0,
                                std::span<const ConditionLabel> labels, const NoiseSchedule& sched, Rng& rng);

// Ancestral step with fixed variance beta_tilde; no noise at t = 1.
template <typename T>
BasicTensor<T> ddpm_step(const EpsPredictor<T>& model, const BasicTensor<T>& z_t, int t,
                         const ConditionLabel& label, const NoiseSchedule& sched, Rng& rng);

enum class SigmaMode { kDeterministic, kDdpm };

struct SamplerConfig {
  int num_steps = 50;
  SigmaMode sigma_mode = SigmaMode::kDeterministic;
};

// Strictly decreasing timesteps visited by the sampler; the last step goes
// from the smallest entry to t = 0.
std::vector<int> ddim_timesteps(int T, int num_steps);

// Runs the sampler from a given z_T.
template <typename T>
BasicTensor<T> ddim_sample_from(const EpsPredictor<T>& model, BasicTensor<T> z_T, const ConditionLabel& label,
                                const SamplerConfig& cfg, const NoiseSchedule& sched, Rng& rng);

// Draws z_T ~ N(0, I) of the given shape from `seed`, then samples.
template <typename T>
BasicTensor<T> ddim_sample(const EpsPredictor<T>& model, const ConditionLabel& label, const SamplerConfig& cfg,
                           const NoiseSchedule& sched, std::uint64_t seed, const Shape& latent_shape);

}  // namespace lphom
