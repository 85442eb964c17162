#include <cmath>

#include "doctest.h"
#include "lphom/adam.hpp"
#include "lphom/errors.hpp"

using namespace lphom;

TEST_CASE("adam: zero gradient on a fresh state leaves parameters unchanged") {
  ParameterSet<double> ps;
  Rng rng(1);
  ps.add("w", Tensor64::randn({3, 4}, rng));
  const Tensor64 before = ps.at(0).value;
  Adam<double> adam;
  adam.step(ps);
  CHECK(ps.at(0).value == before);
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam: first step moves each element by about lr against the gradient sign") {
  for (double g : {0.37, -2.5, 1e-3}) {
    ParameterSet<double> ps;
    ps.add("w", Tensor64({5}, 1.0));
    for (auto& v : ps.at(0).grad.storage()) v = g;
    Adam<double> adam(AdamConfig{0.01});
    adam.step(ps);
    for (double v : ps.at(0).value.storage()) {
      CHECK(v - 1.0 == doctest::Approx(-0.01 * (g > 0 ? 1 : -1)).epsilon(1e-4));
    }
    // Bias-corrected first moment equals g after one step.
    CHECK(adam.first_moments()[0][0] / (1 - 0.9) == doctest::Approx(g));
  }
}

TEST_CASE("adam: parameter set that changes size is rejected") {
  ParameterSet<double> ps;
  ps.add("a", Tensor64({2}));
  Adam<double> adam;
  adam.step(ps);
  ps.add("b", Tensor64({2}));
  CHECK_THROWS_AS(adam.step(ps), ShapeError);
}

TEST_CASE("adam: minimizes a quadratic") {
  ParameterSet<double> ps;
  ps.add("x", Tensor64({2}, 3.0));
  Adam<double> adam(AdamConfig{0.1});
  for (int i = 0; i < 500; ++i) {
    auto& p = ps.at(0);
    for (std::size_t k = 0; k < 2; ++k) p.grad[k] = 2 * (p.value[k] - 1.0);
    adam.step(ps);
  }
  CHECK(ps.at(0).value[0] == doctest::Approx(1.0).epsilon(1e-2));
}

TEST_CASE("adam: cosine learning-rate schedule") {
  CHECK(cosine_lr(1e-3, 0, 100) == doctest::Approx(1e-3));
  CHECK(cosine_lr(1e-3, 50, 100) == doctest::Approx(5e-4));
  CHECK(cosine_lr(1e-3, 100, 100) == doctest::Approx(0.0));
  for (int s = 1; s <= 100; ++s) CHECK(cosine_lr(1.0, s, 100) <= cosine_lr(1.0, s - 1, 100));
  CHECK_THROWS_AS(cosine_lr(1.0, 0, 0), ConfigError);
}
