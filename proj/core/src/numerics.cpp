#include "meanfield/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "meanfield/error.hpp"

namespace meanfield {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kDimensionMismatch: return "dimension_mismatch";
    case ErrorCode::kSingularCovariance: return "singular_covariance";
    case ErrorCode::kCoverage: return "coverage";
    case ErrorCode::kGridMismatch: return "grid_mismatch";
    case ErrorCode::kOutOfDomain: return "out_of_domain";
    case ErrorCode::kDegenerateEvidence: return "degenerate_evidence";
    case ErrorCode::kKernelMismatch: return "kernel_mismatch";
    case ErrorCode::kModelNotLinear: return "model_not_linear";
    case ErrorCode::kUnknownFamily: return "unknown_family";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

namespace {

constexpr std::size_t kPairwiseBlock = 64;

double pairwise_sum_impl(const double* data, std::size_t n) {
  if (n <= kPairwiseBlock) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += data[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(data, half) + pairwise_sum_impl(data + half, n - half);
}

constexpr double kMinReciprocalCondition = 1e-12;
constexpr int kJitterDoublings = 3;

}  // namespace

double pairwise_sum(std::span<const double> values) {
  return pairwise_sum_impl(values.data(), values.size());
}

double reciprocal_condition(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym, Eigen::EigenvaluesOnly);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0)) return 0.0;
  return std::max(lo, 0.0) / hi;
}

double min_eigenvalue(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(sym), Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

bool is_symmetric(const Matrix& m, double relative_tolerance) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= relative_tolerance * scale;
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

SpdFactor factorize_spd(const Matrix& cov) {
  const double n = static_cast<double>(std::max<Eigen::Index>(cov.rows(), 1));
  return factorize_spd(cov, 1e-12 * cov.trace() / n);
}

SpdFactor factorize_spd(const Matrix& cov, double base_jitter) {
  if (cov.rows() != cov.cols() || cov.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "covariance must be a non-empty square matrix");
  }
  if (!cov.allFinite()) {
    throw Error(ErrorCode::kSingularCovariance, "covariance has non-finite entries");
  }
  SpdFactor out;
  Matrix work = symmetrized(cov);
  out.llt.compute(work);
  double jitter = std::abs(base_jitter);
  for (int attempt = 0; out.llt.info() != Eigen::Success && attempt <= kJitterDoublings; ++attempt) {
    if (!(jitter > 0.0)) break;
    work = symmetrized(cov);
    work.diagonal().array() += jitter;
    out.llt.compute(work);
    out.jitter = jitter;
    jitter *= 2.0;
  }
  if (out.llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kSingularCovariance, "covariance is not positive definite");
  }
  const double rcond = reciprocal_condition(work);
  if (rcond < kMinReciprocalCondition) {
    std::ostringstream msg;
    msg << "covariance is numerically singular (reciprocal condition " << rcond << ")";
    throw Error(ErrorCode::kSingularCovariance, msg.str());
  }
  const Matrix l = out.llt.matrixL();
  out.log_det = 2.0 * l.diagonal().array().log().sum();
  return out;
}

std::uint64_t SeedStream::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double NormalSampler::operator()(Rng& rng) {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Marsaglia polar method on 53-bit uniforms.
  constexpr double kScale = 1.0 / 9007199254740992.0;
  double u, v, s;
  do {
    u = 2.0 * static_cast<double>(rng() >> 11) * kScale - 1.0;
    v = 2.0 * static_cast<double>(rng() >> 11) * kScale - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

}  // namespace meanfield
