#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "meanfield/density.hpp"
#include "meanfield/filters.hpp"
#include "meanfield/model.hpp"

namespace meanfield {

/// Outcome of one property check. `margin` is the smallest slack seen over
/// all cases (bound minus measured value); negative means a violation.
struct PropertyResult {
  std::string suite;
  std::string name;
  bool passed = false;
  double margin = 0.0;
  int cases = 0;
  std::string detail;
};

using ConditionFn = std::function<GaussianMeasure(const GaussianMeasure&, const BlockStructure&, const Vector&)>;

struct VerifyOptions {
  std::uint64_t seed = 20240611;
  std::optional<int> resolution;  // nodes per state axis for the operator and filter suites
  ConditionFn condition;          // defaults to meanfield::condition; replaceable for mutation tests
};

/// "gaussian", "density", "operators", "filters".
const std::vector<std::string>& verify_suites();

/// Runs one suite, or every suite for "all". Throws kConfig on an unknown name.
std::vector<PropertyResult> run_suite(std::string_view suite, const VerifyOptions& options = {});

// Random inputs shared by the suites, the tests and the benchmarks.

/// Q diag(lambda) Q^T with eigenvalues uniform in [eig_lo, eig_hi] and a
/// Haar-like random rotation.
Matrix random_spd(Rng& rng, int n, double eig_lo, double eig_hi);

/// Mean uniform in [-mean_radius, mean_radius]^n, covariance from random_spd.
GaussianMeasure random_gaussian(Rng& rng, int n, double mean_radius, double eig_lo, double eig_hi);

/// Mixture of `components` Gaussians with random weights, evaluated directly
/// on the grid (no coverage check) and normalized.
GridDensity random_mixture(Rng& rng, std::shared_ptr<const Grid> grid, int components, double mean_radius,
                           double eig_lo, double eig_hi);

/// Psi = 0.9 tanh, H = tanh (componentwise), Sigma = Gamma = 0.25 I, m0 = 0,
/// S0 = I, declared bounds kappa_Psi = 0.9, kappa_H = 1, ell_H = 1. K = d.
ModelSpec bounded_reference_model(int d = 1);

/// Psi = 0.9 u, H = u, Sigma = Gamma = 0.25, m0 = 0, S0 = 1.
ModelSpec linear_reference_model();

struct SweepPoint {
  double delta = 0.0;
  double eps = 0.0;       // max_j eps_j of the true filter
  double err_enkf = 0.0;  // max_j d_g(enkf_mf, true)
  double err_gpf = 0.0;   // max_j d_g(gpf_bg, true)
};

struct SweepReport {
  std::vector<SweepPoint> points;
  bool enkf_monotone = false;  // errors nondecreasing once points are sorted by eps
  bool gpf_monotone = false;
  /// max err / eps over points whose eps exceeds `ratio_floor`.
  double max_ratio_enkf = 0.0;
  double max_ratio_gpf = 0.0;
  double ratio_floor = 0.0;
};

/// Grid tolerance below which eps is treated as zero in the ratio.
inline constexpr double kSweepRatioFloor = 1e-3;

/// One data realization per delta (same seed), kinds true, enkf_mf, gpf_bg.
SweepReport run_sweep(SweepFamily family, const std::vector<double>& deltas, int steps, std::uint64_t seed,
                      const FilterConfig& config, double scale = 0.9);

}  // namespace meanfield
