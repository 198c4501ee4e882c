#pragma once

#include "meanfield/numerics.hpp"

namespace meanfield {

/// Split of R^n into a state block (first d coordinates) and a data block
/// (last K coordinates).
struct BlockStructure {
  int d = 1;
  int K = 1;

  BlockStructure() = default;
  BlockStructure(int state_dim, int data_dim);

  int n() const { return d + K; }
  bool operator==(const BlockStructure&) const = default;
};

/// Non-degenerate Gaussian N(mean, cov). The covariance is validated
/// (symmetric, Cholesky-factorizable) on construction and its factor kept.
class GaussianMeasure {
 public:
  GaussianMeasure(Vector mean, Matrix cov);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  const SpdFactor& factor() const { return factor_; }
  double log_det() const { return factor_.log_det; }

  /// Squared Mahalanobis norm |x - mean|^2_cov.
  double mahalanobis2(const Vector& x) const;

  Vector mean_u(const BlockStructure& b) const { return mean_.head(b.d); }
  Vector mean_y(const BlockStructure& b) const { return mean_.tail(b.K); }
  Matrix cov_uu(const BlockStructure& b) const { return cov_.topLeftCorner(b.d, b.d); }
  Matrix cov_uy(const BlockStructure& b) const { return cov_.topRightCorner(b.d, b.K); }
  Matrix cov_yy(const BlockStructure& b) const { return cov_.bottomRightCorner(b.K, b.K); }

 private:
  Vector mean_;
  Matrix cov_;
  SpdFactor factor_;
};

double log_density_at(const GaussianMeasure& g, const Vector& x);
double density_at(const GaussianMeasure& g, const Vector& x);

/// Law of the state block given the data block equals `y_dagger`
/// (Schur complement of the data block).
GaussianMeasure condition(const GaussianMeasure& joint, const BlockStructure& blocks,
                          const Vector& y_dagger);

/// KL(mu1 || mu2) = E_mu1[log dmu1/dmu2], closed form.
double kl_divergence(const GaussianMeasure& mu1, const GaussianMeasure& mu2);

/// mu[g^2] for the weight g(v) = 1 + |v|^2, via Gaussian fourth moments.
double g2_expectation(const GaussianMeasure& mu);

/// Upper bound on d_g(mu1, mu2):
///   sqrt(mu1[g^2] + mu2[g^2]) * (3 |S2^{-1} S1 - I|_F + |m1 - m2|_{S2}).
double dg_upper_bound(const GaussianMeasure& mu1, const GaussianMeasure& mu2);

/// `count` i.i.d. draws, one per row.
Matrix sample(const GaussianMeasure& g, Rng& rng, int count);

}  // namespace meanfield
