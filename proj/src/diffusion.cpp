#include "lphom/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lphom/errors.hpp"
#include "lphom/ops.hpp"

namespace lphom {

namespace {

void check_t(const NoiseSchedule& s, int t, const char* where) {
  if (t < 1 || t > s.T) {
    throw ShapeError(std::string(where) + ": timestep " + std::to_string(t) + " outside [1, " +
                     std::to_string(s.T) + "]");
  }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* where) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(where) + ": shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
}

// a * x + b * y elementwise, accumulated in double.
template <typename T>
BasicTensor<T> axpby(double a, const BasicTensor<T>& x, double b, const BasicTensor<T>& y) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = static_cast<T>(a * static_cast<double>(x[i]) + b * static_cast<double>(y[i]));
  }
  return out;
}

}  // namespace

double NoiseSchedule::beta_at(int t) const {
  check_t(*this, t, "beta");
  return beta[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_at(int t) const {
  check_t(*this, t, "alpha");
  return alpha[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  check_t(*this, t, "alpha_bar");
  return alpha_bar_table[static_cast<std::size_t>(t - 1)];
}

double NoiseSchedule::beta_tilde(int t) const {
  return beta_at(t) * (1.0 - alpha_bar(t - 1)) / (1.0 - alpha_bar(t));
}

NoiseSchedule make_schedule(ScheduleKind kind, int T, double beta_start, double beta_end) {
  if (kind != ScheduleKind::kLinear) throw ConfigError("unsupported schedule kind");
  if (T < 1) throw ConfigError("schedule horizon T must be >= 1, got " + std::to_string(T));
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1, got [" + std::to_string(beta_start) +
                      ", " + std::to_string(beta_end) + "]");
  }
  NoiseSchedule s;
  s.T = T;
  double prod = 1.0;
  for (int i = 0; i < T; ++i) {
    const double b = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (T - 1);
    s.beta.push_back(b);
    s.alpha.push_back(1.0 - b);
    prod *= 1.0 - b;
    s.alpha_bar_table.push_back(prod);
  }
  return s;
}

template <typename T>
BasicTensor<T> forward_marginal(const BasicTensor<T>& z0, int t, const BasicTensor<T>& eps,
                                const NoiseSchedule& sched) {
  check_t(sched, t, "forward_marginal");
  require_same_shape(z0, eps, "forward_marginal");
  const double ab = sched.alpha_bar(t);
  return axpby(std::sqrt(ab), z0, std::sqrt(1.0 - ab), eps);
}

template <typename T>
BasicTensor<T> forward_step(const BasicTensor<T>& z_prev, int t, const BasicTensor<T>& eps,
                            const NoiseSchedule& sched) {
  check_t(sched, t, "forward_step");
  require_same_shape(z_prev, eps, "forward_step");
  return axpby(std::sqrt(sched.alpha_at(t)), z_prev, std::sqrt(sched.beta_at(t)), eps);
}

template <typename T>
TrainingLossTerms training_loss(Tape<T>& tape, const NoiseModel<T>& model, const BasicTensor<T>& z0,
                                std::span<const ConditionLabel> labels, const NoiseSchedule& sched, Rng& rng) {
  if (z0.rank() < 1 || static_cast<std::size_t>(z0.dim(0)) != labels.size()) {
    throw ShapeError("training_loss: " + std::to_string(labels.size()) + " labels for batch " +
                     shape_str(z0.shape()));
  }
  const int n = z0.dim(0);
  const std::size_t per = z0.size() / static_cast<std::size_t>(n);
  TrainingLossTerms out;
  out.t.resize(static_cast<std::size_t>(n));
  for (auto& t : out.t) t = rng.uniform_int(1, sched.T);
  BasicTensor<T> eps = BasicTensor<T>::randn(z0.shape(), rng);
  BasicTensor<T> zt(z0.shape());
  for (int b = 0; b < n; ++b) {
    const double ab = sched.alpha_bar(out.t[static_cast<std::size_t>(b)]);
    const double ca = std::sqrt(ab), cb = std::sqrt(1.0 - ab);
    for (std::size_t i = b * per; i < (b + 1) * per; ++i) {
      zt[i] = static_cast<T>(ca * z0[i] + cb * eps[i]);
    }
  }
  Var pred = model(tape, tape.constant(std::move(zt)), out.t, labels);
  out.loss = ops::mse(tape, pred, tape.constant(std::move(eps)));
  return out;
}

template <typename T>
BasicTensor<T> ddpm_step(const EpsPredictor<T>& model, const BasicTensor<T>& z_t, int t,
                         const ConditionLabel& label, const NoiseSchedule& sched, Rng& rng) {
  check_t(sched, t, "ddpm_step");
  const BasicTensor<T> eps = model(z_t, t, label);
  require_same_shape(z_t, eps, "ddpm_step prediction");
  const double a = sched.alpha_at(t), ab = sched.alpha_bar(t);
  BasicTensor<T> out = axpby(1.0 / std::sqrt(a), z_t, -sched.beta_at(t) / (std::sqrt(a) * std::sqrt(1.0 - ab)), eps);
  if (t > 1) {
    const double sd = std::sqrt(sched.beta_tilde(t));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += static_cast<T>(sd * rng.normal());
  }
  out.check_finite("ddpm_step");
  return out;
}

std::vector<int> ddim_timesteps(int T, int num_steps) {
  if (num_steps < 1 || num_steps > T) {
    throw ConfigError("sampler steps must lie in [1, " + std::to_string(T) + "], got " + std::to_string(num_steps));
  }
  std::vector<int> ts;
  for (int k = num_steps - 1; k >= 0; --k) {
    ts.push_back(static_cast<int>(std::lround(static_cast<double>(k + 1) * T / num_steps)));
  }
  return ts;
}

template <typename T>
BasicTensor<T> ddim_sample_from(const EpsPredictor<T>& model, BasicTensor<T> z, const ConditionLabel& label,
                                const SamplerConfig& cfg, const NoiseSchedule& sched, Rng& rng) {
  const std::vector<int> ts = ddim_timesteps(sched.T, cfg.num_steps);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const int t = ts[k];
    const int tp = k + 1 < ts.size() ? ts[k + 1] : 0;
    const BasicTensor<T> eps = model(z, t, label);
    require_same_shape(z, eps, "ddim_sample prediction");
    const double ab = sched.alpha_bar(t), abp = sched.alpha_bar(tp);
    double var = 0.0;
    if (cfg.sigma_mode == SigmaMode::kDdpm) var = (1.0 - abp) / (1.0 - ab) * (1.0 - ab / abp);
    const double dir = std::sqrt(std::max(0.0, 1.0 - abp - var));
    const double inv_sa = 1.0 / std::sqrt(ab), sb = std::sqrt(1.0 - ab), sap = std::sqrt(abp);
    const double sigma = std::sqrt(var);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double e = eps[i];
      const double x0 = (static_cast<double>(z[i]) - sb * e) * inv_sa;
      double next = sap * x0 + dir * e;
      if (sigma > 0.0) next += sigma * rng.normal();
      z[i] = static_cast<T>(next);
    }
    z.check_finite("ddim step");
  }
  return z;
}

template <typename T>
BasicTensor<T> ddim_sample(const EpsPredictor<T>& model, const ConditionLabel& label, const SamplerConfig& cfg,
                           const NoiseSchedule& sched, std::uint64_t seed, const Shape& latent_shape) {
  Rng rng(seed);
  BasicTensor<T> z = BasicTensor<T>::randn(latent_shape, rng);
  return ddim_sample_from(model, std::move(z), label, cfg, sched, rng);
}

#define LPHOM_INSTANTIATE_DIFFUSION(T)                                                                       \
  template BasicTensor<T> forward_marginal(const BasicTensor<T>&, int, const BasicTensor<T>&,               \
                                           const NoiseSchedule&);                                           \
  template BasicTensor<T> forward_step(const BasicTensor<T>&, int, const BasicTensor<T>&, const NoiseSchedule&); \
  template TrainingLossTerms training_loss(Tape<T>&, const NoiseModel<T>&, const BasicTensor<T>&,           \
                                           std::span<const ConditionLabel>, const NoiseSchedule&, Rng&);    \
  template BasicTensor<T> ddpm_step(const EpsPredictor<T>&, const BasicTensor<T>&, int, const ConditionLabel&, \
                                    const NoiseSchedule&, Rng&);                                            \
  template BasicTensor<T> ddim_sample_from(const EpsPredictor<T>&, BasicTensor<T>, const ConditionLabel&,   \
                                           const SamplerConfig&, const NoiseSchedule&, Rng&);               \
  template BasicTensor<T> ddim_sample(const EpsPredictor<T>&, const ConditionLabel&, const SamplerConfig&,   \
                                      const NoiseSchedule&, std::uint64_t, const Shape&);

LPHOM_INSTANTIATE_DIFFUSION(float)
LPHOM_INSTANTIATE_DIFFUSION(double)

}  // namespace lphom
