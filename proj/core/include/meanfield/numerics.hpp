#pragma once

#include <cstdint>
#include <random>
#include <span>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

namespace meanfield {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Pairwise (tree) summation. The reduction order depends only on the input
/// length, so results are reproducible bit for bit.
double pairwise_sum(std::span<const double> values);

/// Cholesky factor of a symmetric positive definite matrix.
struct SpdFactor {
  Eigen::LLT<Matrix> llt;
  double jitter = 0.0;  // diagonal shift that was needed, 0 when none
  double log_det = 0.0;

  Matrix solve(const Matrix& rhs) const { return llt.solve(rhs); }
  Vector solve(const Vector& rhs) const { return llt.solve(rhs); }
};

/// Factorizes `cov`. On failure a diagonal jitter of 1e-12 * trace / n is
/// added and doubled up to three times. Throws kSingularCovariance when no
/// attempt succeeds or when the reciprocal condition number is below 1e-12.
SpdFactor factorize_spd(const Matrix& cov);

/// Same retry rule with a caller-chosen base jitter (used for empirical
/// ensemble covariances).
SpdFactor factorize_spd(const Matrix& cov, double base_jitter);

/// Reciprocal condition number lambda_min / lambda_max of a symmetric matrix.
double reciprocal_condition(const Matrix& sym);

double min_eigenvalue(const Matrix& sym);

bool is_symmetric(const Matrix& m, double relative_tolerance = 1e-12);

Matrix symmetrized(const Matrix& m);

/// Deterministic generator of independent child seeds (splitmix64).
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  Rng next_rng() { return Rng(next()); }

 private:
  std::uint64_t state_;
};

/// Standard normal draws; the transformation is fixed here rather than left to
/// std::normal_distribution so outputs match across standard libraries.
class NormalSampler {
 public:
  double operator()(Rng& rng);

 private:
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace meanfield
