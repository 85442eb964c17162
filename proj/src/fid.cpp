#include "lphom/fid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lphom/errors.hpp"

namespace lphom {

FeatureStats feature_stats(const Eigen::MatrixXd& features) {
  const auto n = features.rows();
  if (n < 2) throw ShapeError("feature_stats needs at least 2 samples, got " + std::to_string(n));
  FeatureStats s;
  s.n = static_cast<int>(n);
  s.mu = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - s.mu.transpose();
  s.sigma = centered.transpose() * centered / static_cast<double>(n - 1);
  s.sigma = 0.5 * (s.sigma + s.sigma.transpose());
  return s;
}

FeatureStats feature_stats(const std::vector<Tensor>& images, const FeatureExtractor& extractor) {
  if (images.size() < 2) throw ShapeError("feature_stats needs at least 2 images, got " + std::to_string(images.size()));
  return feature_stats(extractor.extract(images));
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() != a.cols()) throw ShapeError("matrix_sqrt_psd: matrix is not square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw ShapeError("matrix_sqrt_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (a + a.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("matrix_sqrt_psd: eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  if (ev.size() > 0 && ev.minCoeff() < -tol * scale) {
    throw ShapeError("matrix_sqrt_psd: matrix has eigenvalue " + std::to_string(ev.minCoeff()));
  }
  ev = ev.cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

double fid(const FeatureStats& r, const FeatureStats& g) {
  if (r.mu.size() != g.mu.size()) {
    throw ShapeError("fid: feature dimensions " + std::to_string(r.mu.size()) + " and " + std::to_string(g.mu.size()));
  }
  const Eigen::MatrixXd root_r = matrix_sqrt_psd(r.sigma, 1e-6);
  Eigen::MatrixXd inner = root_r * g.sigma * root_r;
  inner = 0.5 * (inner + inner.transpose());
  // Round-off can push tiny eigenvalues below zero; clip them instead of failing.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  const double tr_cross = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double d = (r.mu - g.mu).squaredNorm() + r.sigma.trace() + g.sigma.trace() - 2.0 * tr_cross;
  return std::max(0.0, d);
}

}  // namespace lphom
