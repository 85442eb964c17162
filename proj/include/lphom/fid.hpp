#pragma once

#include <vector>

#include <Eigen/Dense>

#include "lphom/features.hpp"

namespace lphom {

struct FeatureStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  int n = 0;
};

// Rows of `features` are samples. Unbiased covariance; throws on fewer than 2 rows.
FeatureStats feature_stats(const Eigen::MatrixXd& features);
FeatureStats feature_stats(const std::vector<Tensor>& images, const FeatureExtractor& extractor);

// Principal square root of a symmetric PSD matrix by eigendecomposition.
// Eigenvalues in [-tol, 0) are clipped to 0; asymmetry or eigenvalues below
// -tol throw ShapeError.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& a, double tol = 1e-8);

// |mu_r - mu_g|^2 + Tr(S_r + S_g) - 2 Tr[(S_r^1/2 S_g S_r^1/2)^1/2], clipped at 0.
double fid(const FeatureStats& real, const FeatureStats& generated);

}  // namespace lphom
