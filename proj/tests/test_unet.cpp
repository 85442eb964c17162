#include <cmath>
#include <set>

#include "doctest.h"
#include "grad_check.hpp"
#include "lphom/errors.hpp"
#include "lphom/unet.hpp"

using namespace lphom;

namespace {

UNetConfig tiny_config() {
  UNetConfig c;
  c.latent_size = 4;
  c.channels = {8, 16};
  c.embed_dim = 16;
  c.schedule_T = 1000;
  return c;
}

double sq_diff(const Tensor& a, const Tensor& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  return s;
}

std::vector<ConditionLabel> all_labels(int n) {
  std::vector<ConditionLabel> out;
  for (int i = 0; i < n; ++i) out.push_back(ConditionLabel::from_cell((7 * i) % kNumCells));
  return out;
}

}  // namespace

TEST_CASE("timestep embedding") {
  for (int d : {8, 64}) {
    const int T = 1000;
    std::vector<std::vector<double>> all;
    for (int t = 1; t <= T; ++t) {
      auto e = embed_timestep(t, T, d);
      REQUIRE(static_cast<int>(e.size()) == d);
      for (double v : e) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
      all.push_back(std::move(e));
    }
    double closest = 1e9;
    for (int i = 0; i < T; ++i) {
      for (int j = i + 1; j < T; ++j) {
        double s = 0;
        for (int k = 0; k < d; ++k) s += std::pow(all[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] - all[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)], 2);
        closest = std::min(closest, s);
      }
    }
    CHECK(closest > 0.0);
  }
  CHECK(embed_timestep(17, 1000, 64) == embed_timestep(17, 1000, 64));
  CHECK_THROWS(embed_timestep(0, 1000, 64));
  CHECK_THROWS(embed_timestep(1001, 1000, 64));
  CHECK_THROWS(embed_timestep(5, 1000, 7));
}

TEST_CASE("unet: default shapes") {
  CondUNet<float> net(UNetConfig{}, 1);
  Rng rng(2);
  for (int n : {1, 4}) {
    Tensor z = Tensor::randn({n, 4, 16, 16}, rng);
    Tensor eps = net.predict_noise(z, 500, {Pathology::kDementia, Modality::kT1w});
    CHECK(eps.shape() == z.shape());
    for (float v : eps.data()) CHECK(std::isfinite(v));
  }
  CHECK_THROWS_AS(net.predict_noise(Tensor({1, 4, 8, 8}), 1, {}), ShapeError);
  CHECK_THROWS_AS(net.predict_noise(Tensor({1, 3, 16, 16}), 1, {}), ShapeError);
}

TEST_CASE("unet: inference is deterministic and label dependent") {
  CondUNet<float> a(UNetConfig{}, 3), b(UNetConfig{}, 3);
  Rng rng(4);
  Tensor z = Tensor::randn({2, 4, 16, 16}, rng);
  const ConditionLabel l1{Pathology::kHealthy, Modality::kT1w};
  CHECK(a.predict_noise(z, 250, l1) == b.predict_noise(z, 250, l1));
  CHECK(sq_diff(a.predict_noise(z, 250, l1), a.predict_noise(z, 250, {Pathology::kSclerosis, Modality::kT1w})) > 0);
  CHECK(sq_diff(a.predict_noise(z, 250, l1), a.predict_noise(z, 250, {Pathology::kHealthy, Modality::kPd})) > 0);
  CHECK(sq_diff(a.predict_noise(z, 250, l1), a.predict_noise(z, 251, l1)) > 0);
}

TEST_CASE("unet: every parameter receives gradient") {
  CondUNet<float> net(UNetConfig{}, 5);
  const NoiseSchedule s = make_schedule(ScheduleKind::kLinear, 1000, 1e-4, 0.02);
  Rng rng(6);
  Tensor z0 = Tensor::randn({4, 4, 16, 16}, rng);
  auto labels = all_labels(4);
  net.params().zero_grad();
  Tape<float> tape;
  Var loss = training_loss(tape, net.as_model(), z0, labels, s, rng).loss;
  tape.backward(loss);
  tape.collect_grads(net.params());
  for (std::size_t k = 0; k < net.params().count(); ++k) {
    const auto& p = net.params().at(static_cast<int>(k));
    double g = 0;
    for (float v : p.grad.data()) g += std::abs(v);
    INFO(net.params().name(static_cast<int>(k)));
    CHECK(g > 0.0);
  }
}

TEST_CASE("unet: conditioning reaches every residual block") {
  CondUNet<float> net(UNetConfig{}, 7);
  Rng rng(8);
  Tensor z = Tensor::randn({1, 4, 16, 16}, rng);
  const ConditionLabel l{Pathology::kGlioblastoma, Modality::kFlair};
  const auto ids = net.embedding_projection_weights();
  // Encoder blocks on every level, decoder blocks on all but the deepest.
  const std::size_t levels = net.config().channels.size();
  CHECK(ids.size() == static_cast<std::size_t>(net.config().blocks_per_level) * (2 * levels - 1));
  const Tensor base = net.predict_noise(z, 300, l);
  for (int id : ids) {
    CondUNet<float> copy = net;
    auto& w = copy.params().at(id).value;
    std::fill(w.storage().begin(), w.storage().end(), 0.0f);
    INFO(net.params().name(id));
    CHECK(sq_diff(base, copy.predict_noise(z, 300, l)) > 0);
  }
}

TEST_CASE("unet: full-chain gradient check on a tiny instance") {
  CondUNet<double> net(tiny_config(), 9);
  const NoiseSchedule s = make_schedule(ScheduleKind::kLinear, 1000, 1e-4, 0.02);
  Rng data(10);
  Tensor64 z0 = Tensor64::randn({2, 4, 4, 4}, data);
  auto labels = all_labels(2);
  auto loss = [&](Tape<double>& tape) {
    Rng rng(11);
    return training_loss(tape, net.as_model(), z0, labels, s, rng).loss;
  };
  CHECK(testing::param_grad_check(net.params(), loss, 3) <= 1e-3);
}

TEST_CASE("unet: training is deterministic") {
  const NoiseSchedule s = make_schedule(ScheduleKind::kLinear, 1000, 1e-4, 0.02);
  Rng rng(12);
  Tensor lat = Tensor::randn({6, 4, 4, 4}, rng);
  auto labels = all_labels(6);
  LdmTrainConfig tc;
  tc.steps = 10;
  tc.batch_size = 3;
  tc.seed = 13;
  auto a = train_ldm(lat, labels, tiny_config(), s, tc);
  auto b = train_ldm(lat, labels, tiny_config(), s, tc);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.label_stream == b.label_stream);
  CHECK(a.label_stream.size() == 30);
  CHECK(eval_eps_loss(a.model, lat, labels, s, 1) == eval_eps_loss(b.model, lat, labels, s, 1));
  CHECK_THROWS(train_ldm(lat, all_labels(5), tiny_config(), s, tc));
}
