#include "lphom/adam.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lphom/errors.hpp"

namespace lphom {

template <typename T>
void Adam<T>::step(ParameterSet<T>& params) {
  if (m_.empty()) {
    for (std::size_t i = 0; i < params.count(); ++i) {
      m_.emplace_back(params.at(static_cast<int>(i)).value.shape());
      v_.emplace_back(params.at(static_cast<int>(i)).value.shape());
    }
  }
  if (m_.size() != params.count()) {
    throw ShapeError("Adam state tracks " + std::to_string(m_.size()) + " tensors but got " +
                     std::to_string(params.count()));
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.count(); ++i) {
    auto& p = params.at(static_cast<int>(i));
    auto& m = m_[i];
    auto& v = v_[i];
    if (p.grad.shape() != m.shape() || p.value.shape() != m.shape()) {
      throw ShapeError("Adam shape mismatch for " + params.name(static_cast<int>(i)) + ": " +
                       shape_str(p.value.shape()) + " vs state " + shape_str(m.shape()));
    }
    p.grad.check_finite("gradient of " + params.name(static_cast<int>(i)));
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double g = p.grad[k];
      const double mk = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * g;
      const double vk = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * g * g;
      m[k] = static_cast<T>(mk);
      v[k] = static_cast<T>(vk);
      const double m_hat = mk / bc1;
      const double v_hat = vk / bc2;
      p.value[k] -= static_cast<T>(cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.eps));
    }
  }
}

template class Adam<float>;
template class Adam<double>;

double cosine_lr(double base, int step, int total) {
  if (total <= 0) throw ConfigError("cosine_lr: total steps must be positive");
  const double frac = std::clamp(static_cast<double>(step) / total, 0.0, 1.0);
  return base * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace lphom
