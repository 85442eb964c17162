#include <cmath>
#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "lphom/classifier.hpp"
#include "lphom/errors.hpp"
#include "lphom/features.hpp"
#include "lphom/fid.hpp"
#include "lphom/phantom.hpp"
#include "lphom/ssim.hpp"

using namespace lphom;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian_rows(int n, int d, std::uint64_t seed, const VectorXd& shift) {
  Rng rng(seed);
  MatrixXd m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.normal() + shift(j);
  return m;
}

Tensor phantom(int i, int size = 64) {
  return generate_phantom(static_cast<std::uint64_t>(100 + i), ConditionLabel::from_cell(i % kNumCells), size);
}

Image64 noisy(const Image64& x, double eps, std::uint64_t seed) {
  Rng rng(seed);
  Image64 out = x;
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = std::clamp(out.data()[i] + eps * rng.normal(), 0.0, 1.0);
  return out;
}

}  // namespace

TEST_CASE("feature stats") {
  SUBCASE("identical rows give zero covariance") {
    MatrixXd f = MatrixXd::Ones(5, 3) * 0.7;
    auto s = feature_stats(f);
    CHECK(s.n == 5);
    CHECK(s.sigma.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.mu.isApprox(VectorXd::Constant(3, 0.7)));
  }
  SUBCASE("two points give rank at most one") {
    MatrixXd f(2, 4);
    f << 1, 2, 3, 4, -1, 0.5, 2, 7;
    auto s = feature_stats(f);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s.sigma);
    const auto ev = es.eigenvalues();
    int nonzero = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) nonzero += std::abs(ev(i)) > 1e-10 * ev.cwiseAbs().maxCoeff();
    CHECK(nonzero <= 1);
    // Unbiased: two-point variance is half the squared difference.
    CHECK(s.sigma(0, 0) == doctest::Approx(2.0));
  }
  SUBCASE("Monte Carlo standard normal") {
    auto s = feature_stats(gaussian_rows(10000, 4, 1, VectorXd::Zero(4)));
    CHECK(s.mu.cwiseAbs().maxCoeff() <= 0.05);
    CHECK((s.sigma - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() <= 0.05);
  }
  SUBCASE("needs two samples") {
    CHECK_THROWS_AS(feature_stats(MatrixXd::Ones(1, 3)), ShapeError);
    CHECK_THROWS_AS(feature_stats(std::vector<Tensor>{phantom(0)}, FeatureExtractor::random_conv()), ShapeError);
  }
}

TEST_CASE("matrix square root") {
  CHECK(matrix_sqrt_psd(MatrixXd::Identity(5, 5)).isApprox(MatrixXd::Identity(5, 5), 1e-12));
  MatrixXd d = VectorXd{{4.0, 9.0}}.asDiagonal();
  MatrixXd r = matrix_sqrt_psd(d);
  CHECK(r(0, 0) == doctest::Approx(2.0));
  CHECK(r(1, 1) == doctest::Approx(3.0));
  CHECK(std::abs(r(0, 1)) <= 1e-12);

  Rng rng(2);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    MatrixXd b(16, 16);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = rng.normal();
    MatrixXd a = b * b.transpose();
    MatrixXd s = matrix_sqrt_psd(a);
    worst = std::max(worst, (s * s - a).norm() / a.norm());
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * s.norm());
  }
  CHECK(worst <= 1e-6);

  SUBCASE("rank-deficient input") {
    MatrixXd v(3, 1);
    v << 1, 2, 2;
    MatrixXd a = v * v.transpose();
    MatrixXd s = matrix_sqrt_psd(a);
    CHECK((s * s - a).norm() / a.norm() <= 1e-6);
  }
  SUBCASE("errors") {
    MatrixXd asym(2, 2);
    asym << 1, 0.5, 0, 1;
    CHECK_THROWS_AS(matrix_sqrt_psd(asym), ShapeError);
    MatrixXd indef = VectorXd{{1.0, -0.5}}.asDiagonal();
    CHECK_THROWS_AS(matrix_sqrt_psd(indef), ShapeError);
    MatrixXd tiny_neg = VectorXd{{1.0, -1e-10}}.asDiagonal();
    CHECK(matrix_sqrt_psd(tiny_neg)(1, 1) == 0.0);
    CHECK_THROWS_AS(matrix_sqrt_psd(MatrixXd::Ones(2, 3)), ShapeError);
  }
}

TEST_CASE("fid") {
  SUBCASE("same image set is zero") {
    std::vector<Tensor> imgs;
    for (int i = 0; i < 12; ++i) imgs.push_back(phantom(i));
    auto fx = FeatureExtractor::random_conv();
    auto a = feature_stats(imgs, fx);
    auto b = feature_stats(imgs, fx);
    CHECK(std::abs(fid(a, b)) <= 1e-6);
  }
  SUBCASE("analytic Gaussians") {
    const VectorXd m{{1.0, -2.0, 0.5, 0.0}};
    FeatureStats r{VectorXd::Zero(4), MatrixXd::Identity(4, 4), 0};
    FeatureStats g{m, MatrixXd::Identity(4, 4), 0};
    CHECK(fid(r, g) == doctest::Approx(m.squaredNorm()).epsilon(1e-12));
    FeatureStats g2{VectorXd::Zero(4), 4 * MatrixXd::Identity(4, 4), 0};
    // Tr(I + 4I - 2*2I) = 4
    CHECK(fid(r, g2) == doctest::Approx(4.0).epsilon(1e-12));
  }
  SUBCASE("sampled Gaussians within 5 percent") {
    const VectorXd m{{1.0, -2.0, 0.5, 1.5}};
    auto r = feature_stats(gaussian_rows(10000, 4, 3, VectorXd::Zero(4)));
    auto g = feature_stats(gaussian_rows(10000, 4, 4, m));
    CHECK(fid(r, g) == doctest::Approx(m.squaredNorm()).epsilon(0.05));
    CHECK(fid(r, g) == doctest::Approx(fid(g, r)).epsilon(1e-9));
  }
  SUBCASE("dimension mismatch") {
    FeatureStats a{VectorXd::Zero(3), MatrixXd::Identity(3, 3), 2};
    FeatureStats b{VectorXd::Zero(4), MatrixXd::Identity(4, 4), 2};
    CHECK_THROWS_AS(fid(a, b), ShapeError);
  }
}

TEST_CASE("feature extractors") {
  std::vector<Tensor> imgs = {phantom(0), phantom(1), phantom(0)};
  auto fx = FeatureExtractor::random_conv();
  CHECK(fx.dim() == 64);
  CHECK(fx.kind() == FeatureKind::kRandomConv);
  MatrixXd f = fx.extract(imgs);
  CHECK(f.rows() == 3);
  CHECK(f.cols() == 64);
  CHECK(f.row(0) == f.row(2));
  CHECK(f.row(0) != f.row(1));
  CHECK(FeatureExtractor::random_conv().extract(imgs) == f);
  CHECK_FALSE(FeatureExtractor::random_conv(kFeatureSeed + 1).extract(imgs) == f);

  Vae<float> vae(VaeConfig{}, 3);
  auto vx = FeatureExtractor::vae_encoder(vae);
  CHECK(vx.kind() == FeatureKind::kVaeEncoder);
  CHECK(vx.dim() == 64);
  MatrixXd v = vx.extract(imgs);
  CHECK(v.cols() == 64);
  CHECK(v.row(0) == v.row(2));
  CHECK(std::string(to_string(FeatureKind::kVaeEncoder)) != to_string(FeatureKind::kRandomConv));
}

TEST_CASE("ssim parameters") {
  SsimParams p;
  CHECK(p.c1() == doctest::Approx(1e-4));
  CHECK(p.c2() == doctest::Approx(9e-4));
  double wsum = 0;
  for (double w : p.weights) wsum += w;
  CHECK(wsum == doctest::Approx(1.0));
  CHECK(p.scales() == 3);
  CHECK(p.weights[0] == doctest::Approx(0.0448 / (0.0448 + 0.2856 + 0.3001)));
  Image64 w = gaussian_window(p);
  CHECK(w.rows() == 7);
  CHECK(w.sum() == doctest::Approx(1.0));
  CHECK(w(3, 3) == w.maxCoeff());
}

TEST_CASE("ssim") {
  const Image64 x = to_image(phantom(3));
  const Image64 y = to_image(phantom(4));
  CHECK(ssim(x, x) == 1.0);
  CHECK(ssim(x, y) == ssim(y, x));
  CHECK(ssim(x, y) < 1.0);

  const double a = 0.3, b = 0.8;
  SsimParams p;
  const double want = (2 * a * b + p.c1()) / (a * a + b * b + p.c1());
  CHECK(ssim(Image64::Constant(20, 20, a), Image64::Constant(20, 20, b)) == doctest::Approx(want).epsilon(1e-12));
  CHECK_THROWS_AS(ssim(x, Image64::Zero(32, 32)), ShapeError);
  CHECK_THROWS_AS(ssim(Image64::Zero(5, 5), Image64::Zero(5, 5)), ShapeError);
}

TEST_CASE("ms-ssim") {
  const Image64 x = to_image(phantom(5));
  CHECK(ms_ssim(x, x) == doctest::Approx(1.0).epsilon(1e-15));

  SsimParams one;
  one.weights = {1.0};
  const Image64 y = to_image(phantom(6));
  CHECK(ms_ssim(x, y, one) == doctest::Approx(ssim(x, y, one)).epsilon(1e-12));

  double prev = 1.0;
  for (double eps : {0.05, 0.1, 0.2}) {
    const double v = ms_ssim(x, noisy(x, eps, 7));
    CHECK(v < prev);
    prev = v;
  }
  CHECK(ms_ssim(x, y) == doctest::Approx(ms_ssim(y, x)).epsilon(1e-12));
  CHECK_THROWS_AS(ms_ssim(Image64::Zero(16, 16), Image64::Zero(16, 16)), ShapeError);
  CHECK_NOTHROW(ms_ssim(Image64::Zero(28, 28), Image64::Zero(28, 28)));
}

TEST_CASE("diversity report") {
  std::vector<Tensor> same(5, phantom(2));
  auto d = diversity_report(same, {}, 20, 1);
  CHECK(d.format() == "1.000 ± 0.000");
  CHECK(d.pairs == 20);

  std::vector<Tensor> mixed;
  for (int i = 0; i < 6; ++i) mixed.push_back(phantom(i));
  auto a = diversity_report(mixed, {}, 15, 9);
  auto b = diversity_report(mixed, {}, 15, 9);
  CHECK(a.mean == b.mean);
  CHECK(a.stddev == b.stddev);
  CHECK(a.mean < 1.0);
  CHECK(a.stddev > 0.0);

  DiversityStats fmt{0.7, 0.073, 1};
  CHECK(fmt.format() == "0.700 ± 0.073");
  CHECK_THROWS_AS(diversity_report({phantom(0)}, {}, 5, 1), ShapeError);
  CHECK_THROWS_AS(diversity_report(mixed, {}, 0, 1), ShapeError);
}

TEST_CASE("condition classifier") {
  ClassifierConfig cfg;
  cfg.image_size = 32;
  cfg.steps = 20;
  cfg.batch_size = 8;
  cfg.images_per_cell = 2;
  cfg.seed = 4;
  auto a = train_condition_classifier(cfg);
  auto b = train_condition_classifier(cfg);
  CHECK(a.loss_history == b.loss_history);
  REQUIRE(a.loss_history.size() == 20);

  std::vector<Tensor> probe;
  for (int i = 0; i < kNumCells; ++i) probe.push_back(phantom(i, 32));
  probe.push_back(Tensor({1, 32, 32}));
  probe.push_back(Tensor({1, 32, 32}, 1.0f));
  const auto la = a.model.classify(probe);
  REQUIRE(la.size() == probe.size());
  CHECK(la == b.model.classify(probe));
  for (const auto& l : la) {
    CHECK(l.cell() >= 0);
    CHECK(l.cell() < kNumCells);
  }
  CHECK(a.model.classify(probe[3]) == la[3]);

  auto acc = classifier_accuracy(a.model, probe, std::vector<ConditionLabel>(probe.size()));
  CHECK(acc.joint <= acc.pathology);
  CHECK(acc.joint <= acc.modality);

  CHECK_THROWS_AS(train_condition_classifier({}, {}, cfg), ShapeError);
}
