#include <cmath>

#include "doctest.h"
#include "grad_check.hpp"
#include "lphom/diffusion.hpp"
#include "lphom/errors.hpp"
#include "lphom/ops.hpp"

using namespace lphom;

namespace {

NoiseSchedule default_schedule() { return make_schedule(ScheduleKind::kLinear, 1000, 1e-4, 0.02); }

double norm(const Tensor64& a, const Tensor64& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double norm(const Tensor64& a) { return norm(a, Tensor64(a.shape())); }

// Optimal noise prediction when the data is the single point z*.
EpsPredictor<double> point_mass_oracle(const Tensor64& z_star, const NoiseSchedule& sched) {
  return [z_star, &sched](const Tensor64& z, int t, const ConditionLabel&) {
    const double ab = sched.alpha_bar(t);
    Tensor64 out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = (z[i] - std::sqrt(ab) * z_star[i]) / std::sqrt(1 - ab);
    return out;
  };
}

std::pair<double, double> mean_var(const Tensor64& x) {
  double m = 0;
  for (double v : x.data()) m += v;
  m /= static_cast<double>(x.size());
  double var = 0;
  for (double v : x.data()) var += (v - m) * (v - m);
  return {m, var / static_cast<double>(x.size())};
}

}  // namespace

TEST_CASE("schedule: examples and invariants") {
  const NoiseSchedule s = default_schedule();
  CHECK(s.T == 1000);
  // Independent product of (1 - beta_t) over the linear ramp.
  double prod = 1;
  for (int t = 1; t <= 1000; ++t) prod *= 1 - (1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0);
  CHECK(s.alpha_bar(1000) == doctest::Approx(prod).epsilon(1e-9));
  CHECK(s.alpha_bar(1000) >= 4.0e-5 * 0.8);
  CHECK(s.alpha_bar(1000) <= 4.0e-5 * 1.2);
  CHECK(s.alpha_bar(1000) < 1e-3);
  CHECK(s.beta_at(1) == doctest::Approx(1e-4));
  CHECK(s.beta_at(1000) == doctest::Approx(0.02));
  CHECK(s.alpha_bar(0) == 1.0);
  for (int t = 1; t <= 1000; ++t) {
    CHECK(s.alpha_at(t) == doctest::Approx(1 - s.beta_at(t)));
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
  CHECK(s.beta_tilde(1) == doctest::Approx(0.0));
  CHECK(s.beta_tilde(500) < s.beta_at(500));

  const NoiseSchedule one = make_schedule(ScheduleKind::kLinear, 1, 0.1, 0.1);
  CHECK(one.alpha_bar(1) == doctest::Approx(0.9));

  for (auto [T, lo, hi] : {std::tuple{50, 0.001, 0.3}, std::tuple{7, 0.2, 0.2}, std::tuple{300, 1e-5, 0.9}}) {
    const NoiseSchedule r = make_schedule(ScheduleKind::kLinear, T, lo, hi);
    for (int t = 1; t <= T; ++t) CHECK(r.alpha_bar(t) < r.alpha_bar(t - 1));
  }

  CHECK_THROWS_AS(make_schedule(ScheduleKind::kLinear, 0, 1e-4, 0.02), ConfigError);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::kLinear, 10, 0.0, 0.02), ConfigError);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::kLinear, 10, 0.03, 0.02), ConfigError);
  CHECK_THROWS_AS(make_schedule(ScheduleKind::kLinear, 10, 1e-4, 1.0), ConfigError);
}

TEST_CASE("forward marginal") {
  const NoiseSchedule s = default_schedule();
  Rng rng(1);
  Tensor64 z0 = Tensor64::randn({2, 3}, rng);

  SUBCASE("zero noise scales the input") {
    Tensor64 zt = forward_marginal(z0, 400, Tensor64(z0.shape()), s);
    for (std::size_t i = 0; i < z0.size(); ++i) CHECK(zt[i] == doctest::Approx(std::sqrt(s.alpha_bar(400)) * z0[i]));
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(forward_marginal(z0, 0, z0, s), ShapeError);
    CHECK_THROWS_AS(forward_marginal(z0, 1001, z0, s), ShapeError);
    CHECK_THROWS_AS(forward_marginal(z0, 5, Tensor64({3, 2}), s), ShapeError);
  }
  SUBCASE("Monte Carlo moments") {
    constexpr int kDraws = 10000;
    const double x0 = 1.5;
    for (int t : {1, 100, 500, 1000}) {
      Tensor64 z({kDraws}, x0);
      Tensor64 zt = forward_marginal(z, t, Tensor64::randn({kDraws}, rng), s);
      auto [m, v] = mean_var(zt);
      const double want_var = 1 - s.alpha_bar(t);
      CHECK(std::abs(m - std::sqrt(s.alpha_bar(t)) * x0) <= 3 * std::sqrt(want_var) / std::sqrt(kDraws));
      CHECK(v == doctest::Approx(want_var).epsilon(0.05));
    }
  }
  SUBCASE("single-step chain matches the marginal") {
    constexpr int kDraws = 10000;
    const double x0 = -0.7;
    const int t_end = 250;
    Tensor64 z({kDraws}, x0);
    for (int t = 1; t <= t_end; ++t) z = forward_step(z, t, Tensor64::randn({kDraws}, rng), s);
    auto [m, v] = mean_var(z);
    const double want_var = 1 - s.alpha_bar(t_end);
    CHECK(std::abs(m - std::sqrt(s.alpha_bar(t_end)) * x0) <= 3 * std::sqrt(want_var) / std::sqrt(kDraws));
    CHECK(v == doctest::Approx(want_var).epsilon(0.05));
  }
}

TEST_CASE("training loss") {
  const NoiseSchedule s = default_schedule();
  Rng data_rng(2);
  Tensor64 z0 = Tensor64::randn({8, 4, 4, 4}, data_rng);
  std::vector<ConditionLabel> labels(8);

  SUBCASE("oracle prediction gives zero loss") {
    NoiseModel<double> oracle = [&](Tape<double>& tape, Var zt, std::span<const int> t, std::span<const ConditionLabel>) {
      const Tensor64& z = tape.value(zt);
      Tensor64 eps(z.shape());
      const std::size_t per = z.size() / static_cast<std::size_t>(z.dim(0));
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double ab = s.alpha_bar(t[i / per]);
        eps[i] = (z[i] - std::sqrt(ab) * z0[i]) / std::sqrt(1 - ab);
      }
      return tape.constant(eps);
    };
    Tape<double> tape(false);
    Rng rng(3);
    auto terms = training_loss(tape, oracle, z0, labels, s, rng);
    CHECK(tape.value(terms.loss)[0] <= 1e-12);
    REQUIRE(terms.t.size() == 8);
    for (int t : terms.t) {
      CHECK(t >= 1);
      CHECK(t <= 1000);
    }
  }
  SUBCASE("zero prediction gives unit loss") {
    NoiseModel<double> zero = [](Tape<double>& tape, Var zt, std::span<const int>, std::span<const ConditionLabel>) {
      return tape.constant(Tensor64(tape.value(zt).shape()));
    };
    Rng rng(4);
    double sum = 0;
    constexpr int kDraws = 50;
    for (int i = 0; i < kDraws; ++i) {
      Tape<double> tape(false);
      sum += tape.value(training_loss(tape, zero, z0, labels, s, rng).loss)[0];
    }
    CHECK(sum / kDraws == doctest::Approx(1.0).epsilon(0.05));
  }
  SUBCASE("gradient matches finite differences") {
    ParameterSet<double> ps;
    Rng init(5);
    const int w = ps.add("w", Tensor64::randn({4, 4, 1, 1}, init, 0.5));
    const int b = ps.add("b", Tensor64::randn({4}, init, 0.1));
    NoiseModel<double> lin = [&](Tape<double>& tape, Var zt, std::span<const int>, std::span<const ConditionLabel>) {
      return ops::silu(tape, ops::conv2d(tape, zt, tape.param(ps.at(w)), tape.param(ps.at(b)), 1, 0));
    };
    auto loss = [&](Tape<double>& tape) {
      Rng rng(6);
      return training_loss(tape, lin, z0, labels, s, rng).loss;
    };
    CHECK(testing::param_grad_check(ps, loss, 16) <= 1e-4);
  }
  SUBCASE("label count must match the batch") {
    Tape<double> tape(false);
    Rng rng(7);
    std::vector<ConditionLabel> few(3);
    NoiseModel<double> id = [](Tape<double>&, Var zt, std::span<const int>, std::span<const ConditionLabel>) { return zt; };
    CHECK_THROWS_AS(training_loss(tape, id, z0, few, s, rng), ShapeError);
  }
}

TEST_CASE("ddpm step") {
  const NoiseSchedule s = default_schedule();
  Rng rng(8);
  Tensor64 z_star = Tensor64::randn({1, 4, 4, 4}, rng);
  auto oracle = point_mass_oracle(z_star, s);
  Tensor64 z = Tensor64::randn({1, 4, 4, 4}, rng);

  SUBCASE("t = 1 is noise free") {
    Rng a(1), b(2);
    Tensor64 za = ddpm_step(oracle, z, 1, {}, s, a);
    Tensor64 zb = ddpm_step(oracle, z, 1, {}, s, b);
    CHECK(za == zb);
    CHECK(za.shape() == z.shape());
    // Mean formula at t = 1.
    Tensor64 eps = oracle(z, 1, {});
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double mu = (z[i] - s.beta_at(1) / std::sqrt(1 - s.alpha_bar(1)) * eps[i]) / std::sqrt(s.alpha_at(1));
      CHECK(za[i] == doctest::Approx(mu));
    }
  }
  SUBCASE("t > 1 adds noise") {
    Rng a(1), b(2);
    CHECK_FALSE(ddpm_step(oracle, z, 10, {}, s, a) == ddpm_step(oracle, z, 10, {}, s, b));
  }
  SUBCASE("t = 0 is rejected") { CHECK_THROWS_AS(ddpm_step(oracle, z, 0, {}, s, rng), ShapeError); }
  SUBCASE("ancestral chain concentrates on the point mass") {
    Tensor64 zt = Tensor64::randn({1, 4, 4, 4}, rng);
    const double start = norm(zt, z_star);
    for (int t = 1000; t >= 1; --t) zt = ddpm_step(oracle, zt, t, {}, s, rng);
    CHECK(norm(zt, z_star) < 0.1 * start);
  }
}

TEST_CASE("ddim timesteps") {
  for (int steps : {1, 10, 50, 999, 1000}) {
    auto ts = ddim_timesteps(1000, steps);
    REQUIRE(static_cast<int>(ts.size()) == steps);
    CHECK(ts.front() == 1000);
    CHECK(ts.back() >= 1);
    for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
  }
  auto full = ddim_timesteps(1000, 1000);
  for (int i = 0; i < 1000; ++i) CHECK(full[static_cast<std::size_t>(i)] == 1000 - i);
  CHECK_THROWS_AS(ddim_timesteps(1000, 0), ConfigError);
  CHECK_THROWS_AS(ddim_timesteps(1000, 1001), ConfigError);
}

TEST_CASE("ddim point-mass oracle recovers z*") {
  const NoiseSchedule s = default_schedule();
  Rng rng(9);
  for (int k = 0; k < 5; ++k) {
    Tensor64 z_star = Tensor64::randn({1, 4, 4, 4}, rng, 1.0 + k);
    auto oracle = point_mass_oracle(z_star, s);
    for (int steps : {1, 10, 50}) {
      for (SigmaMode mode : {SigmaMode::kDeterministic, SigmaMode::kDdpm}) {
        Rng noise(static_cast<std::uint64_t>(100 + k));
        Tensor64 zT = Tensor64::randn(z_star.shape(), noise);
        Tensor64 z0 = ddim_sample_from(oracle, zT, {}, SamplerConfig{steps, mode}, s, noise);
        CHECK(norm(z0, z_star) / norm(z_star) <= 1e-4);
      }
    }
  }
}

TEST_CASE("ddim with every timestep matches a manual deterministic loop") {
  const NoiseSchedule s = make_schedule(ScheduleKind::kLinear, 100, 1e-3, 0.05);
  EpsPredictor<double> model = [](const Tensor64& z, int t, const ConditionLabel&) {
    Tensor64 out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = 0.5 * std::tanh(z[i]) + 0.001 * t;
    return out;
  };
  Rng rng(10);
  Tensor64 zT = Tensor64::randn({1, 2, 3, 3}, rng);
  Rng unused(0);
  Tensor64 got = ddim_sample_from(model, zT, {}, SamplerConfig{100, SigmaMode::kDeterministic}, s, unused);

  Tensor64 z = zT;
  for (int t = 100; t >= 1; --t) {
    Tensor64 eps = model(z, t, {});
    const double ab = s.alpha_bar(t), ab_prev = s.alpha_bar(t - 1);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double x0 = (z[i] - std::sqrt(1 - ab) * eps[i]) / std::sqrt(ab);
      z[i] = std::sqrt(ab_prev) * x0 + std::sqrt(1 - ab_prev) * eps[i];
    }
  }
  CHECK(norm(got, z) <= 1e-10 * std::max(1.0, norm(z)));
}

TEST_CASE("ddim sampling is deterministic per seed") {
  const NoiseSchedule s = default_schedule();
  EpsPredictor<double> model = [](const Tensor64& z, int, const ConditionLabel& l) {
    Tensor64 out(z.shape());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = 0.3 * z[i] + 0.01 * l.cell();
    return out;
  };
  const ConditionLabel label{Pathology::kSclerosis, Modality::kPd};
  Tensor64 a = ddim_sample(model, label, SamplerConfig{}, s, 42, {2, 4, 4, 4});
  Tensor64 b = ddim_sample(model, label, SamplerConfig{}, s, 42, {2, 4, 4, 4});
  CHECK(a == b);
  CHECK(a.shape() == Shape{2, 4, 4, 4});
  CHECK_FALSE(a == ddim_sample(model, label, SamplerConfig{}, s, 43, {2, 4, 4, 4}));
  SamplerConfig ddpm{20, SigmaMode::kDdpm};
  CHECK(ddim_sample(model, label, ddpm, s, 5, {1, 4, 4, 4}) == ddim_sample(model, label, ddpm, s, 5, {1, 4, 4, 4}));
}
