#include "meanfield/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "meanfield/error.hpp"

namespace meanfield {

BlockStructure::BlockStructure(int state_dim, int data_dim) : d(state_dim), K(data_dim) {
  if (d < 1 || K < 1) {
    throw Error(ErrorCode::kInvalidArgument, "block structure needs d >= 1 and K >= 1");
  }
}

namespace {

SpdFactor validated_factor(const Vector& mean, const Matrix& cov) {
  if (mean.size() < 1) throw Error(ErrorCode::kInvalidArgument, "Gaussian dimension must be >= 1");
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "covariance shape does not match mean");
  }
  if (!mean.allFinite()) throw Error(ErrorCode::kInvalidArgument, "mean has non-finite entries");
  if (!is_symmetric(cov)) throw Error(ErrorCode::kInvalidArgument, "covariance is not symmetric");
  return factorize_spd(cov);
}

}  // namespace

GaussianMeasure::GaussianMeasure(Vector mean, Matrix cov)
    : mean_(std::move(mean)), cov_(symmetrized(cov)), factor_(validated_factor(mean_, cov)) {}

double GaussianMeasure::mahalanobis2(const Vector& x) const {
  if (x.size() != mean_.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "point dimension does not match Gaussian");
  }
  const Vector z = factor_.llt.matrixL().solve(x - mean_);
  return z.squaredNorm();
}

double log_density_at(const GaussianMeasure& g, const Vector& x) {
  const double n = g.dim();
  return -0.5 * (n * std::log(2.0 * std::numbers::pi) + g.log_det() + g.mahalanobis2(x));
}

double density_at(const GaussianMeasure& g, const Vector& x) { return std::exp(log_density_at(g, x)); }

GaussianMeasure condition(const GaussianMeasure& joint, const BlockStructure& blocks,
                          const Vector& y_dagger) {
  if (joint.dim() != blocks.n()) {
    throw Error(ErrorCode::kDimensionMismatch, "joint dimension does not match block structure");
  }
  if (y_dagger.size() != blocks.K) {
    throw Error(ErrorCode::kDimensionMismatch, "datum dimension does not match data block");
  }
  const Matrix s_uy = joint.cov_uy(blocks);
  const SpdFactor s_yy = factorize_spd(joint.cov_yy(blocks));
  // gain = S_uy S_yy^{-1}
  const Matrix gain = s_yy.solve(Matrix(s_uy.transpose())).transpose();
  Vector mean = joint.mean_u(blocks) + gain * (y_dagger - joint.mean_y(blocks));
  Matrix cov = joint.cov_uu(blocks) - gain * s_uy.transpose();
  return GaussianMeasure(std::move(mean), symmetrized(cov));
}

double kl_divergence(const GaussianMeasure& mu1, const GaussianMeasure& mu2) {
  if (mu1.dim() != mu2.dim()) throw Error(ErrorCode::kDimensionMismatch, "KL of Gaussians of different dimension");
  const Matrix ratio = mu2.factor().solve(mu1.cov());
  const Vector dm = mu2.mean() - mu1.mean();
  const double quad = dm.dot(mu2.factor().solve(dm));
  const double kl = 0.5 * (ratio.trace() - mu1.dim() + quad + mu2.log_det() - mu1.log_det());
  return std::max(kl, 0.0);
}

double g2_expectation(const GaussianMeasure& mu) {
  // g^2 = 1 + 2|v|^2 + |v|^4 with, for v ~ N(m, S),
  //   E|v|^2 = |m|^2 + tr S,
  //   E|v|^4 = (E|v|^2)^2 + 2 tr(S^2) + 4 m^T S m   (Isserlis).
  const Vector& m = mu.mean();
  const Matrix& s = mu.cov();
  const double second = m.squaredNorm() + s.trace();
  const double fourth = second * second + 2.0 * (s * s).trace() + 4.0 * m.dot(s * m);
  return 1.0 + 2.0 * second + fourth;
}

double dg_upper_bound(const GaussianMeasure& mu1, const GaussianMeasure& mu2) {
  if (mu1.dim() != mu2.dim()) throw Error(ErrorCode::kDimensionMismatch, "d_g bound of Gaussians of different dimension");
  const Matrix ratio = mu2.factor().solve(mu1.cov()) - Matrix::Identity(mu1.dim(), mu1.dim());
  const Vector dm = mu1.mean() - mu2.mean();
  const double weighted = std::sqrt(std::max(dm.dot(mu2.factor().solve(dm)), 0.0));
  return std::sqrt(g2_expectation(mu1) + g2_expectation(mu2)) * (3.0 * ratio.norm() + weighted);
}

Matrix sample(const GaussianMeasure& g, Rng& rng, int count) {
  if (count < 1) throw Error(ErrorCode::kInvalidArgument, "sample count must be >= 1");
  NormalSampler normal;
  const Matrix l = g.factor().llt.matrixL();
  Matrix z(count, g.dim());
  for (int i = 0; i < count; ++i) {
    for (int k = 0; k < g.dim(); ++k) z(i, k) = normal(rng);
  }
  Matrix out = z * l.transpose();
  out.rowwise() += g.mean().transpose();
  return out;
}

}  // namespace meanfield
