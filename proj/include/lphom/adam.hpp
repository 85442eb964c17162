#pragma once

#include <vector>

#include "lphom/tape.hpp"

namespace lphom {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam. Moments are created lazily to match the parameter set.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // Applies one update from params' accumulated gradients; does not zero them.
  void step(ParameterSet<T>& params);

  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  const std::vector<BasicTensor<T>>& first_moments() const { return m_; }
  const std::vector<BasicTensor<T>>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  std::vector<BasicTensor<T>> m_;
  std::vector<BasicTensor<T>> v_;
};

// Half-cosine decay from base at step 0 towards 0 at step == total.
double cosine_lr(double base, int step, int total);

}  // namespace lphom
