#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "meanfield/gaussian.hpp"
#include "meanfield/grid.hpp"

namespace meanfield {

/// First two moments of a measure.
struct Moments {
  Vector mean;
  Matrix cov;

  Vector mean_u(const BlockStructure& b) const { return mean.head(b.d); }
  Vector mean_y(const BlockStructure& b) const { return mean.tail(b.K); }
  Matrix cov_uu(const BlockStructure& b) const { return cov.topLeftCorner(b.d, b.d); }
  Matrix cov_uy(const BlockStructure& b) const { return cov.topRightCorner(b.d, b.K); }
  Matrix cov_yy(const BlockStructure& b) const { return cov.bottomRightCorner(b.K, b.K); }
};

/// Probability density sampled on a tensor grid, normalized so its trapezoid
/// quadrature equals one. Joint (state x data) densities carry a
/// BlockStructure; their first d axes are the state axes.
class GridDensity {
 public:
  /// Validates nonnegativity and normalizes. Returns the density together
  /// with the pre-normalization mass through `mass_out` when non-null.
  static GridDensity from_values(std::shared_ptr<const Grid> grid, std::vector<double> values,
                                 std::optional<BlockStructure> blocks = std::nullopt,
                                 double* mass_out = nullptr);

  /// Adopts values that are already normalized (mass within 1e-8 of one)
  /// without rescaling them; used when reading stored densities.
  static GridDensity from_normalized(std::shared_ptr<const Grid> grid, std::vector<double> values,
                                     std::optional<BlockStructure> blocks = std::nullopt);

  const Grid& grid() const { return *grid_; }
  const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
  std::span<const double> values() const { return values_; }
  const std::optional<BlockStructure>& blocks() const { return blocks_; }
  int dim() const { return grid_->dim(); }

  double mass() const;

 private:
  GridDensity(std::shared_ptr<const Grid> grid, std::vector<double> values,
              std::optional<BlockStructure> blocks)
      : grid_(std::move(grid)), values_(std::move(values)), blocks_(blocks) {}

  std::shared_ptr<const Grid> grid_;
  std::vector<double> values_;
  std::optional<BlockStructure> blocks_;
};

/// Quadrature of f * values over the grid, pairwise-summed.
double integrate(const Grid& grid, std::span<const double> values);

/// Samples a Gaussian on the grid. Every axis must cover mean +/- 6 marginal
/// standard deviations, otherwise kCoverage.
GridDensity from_gaussian(const GaussianMeasure& g, std::shared_ptr<const Grid> grid,
                          std::optional<BlockStructure> blocks = std::nullopt);

/// Trapezoidal mean and covariance (covariance symmetrized).
Moments moments(const GridDensity& mu);

/// Weighted total variation int (1 + |v|^2) |rho1 - rho2| dv.
double dg_distance(const GridDensity& mu1, const GridDensity& mu2);

/// Plain total variation int |rho1 - rho2| dv.
double tv_distance(const GridDensity& mu1, const GridDensity& mu2);

/// KL(mu1 || mu2) by quadrature; +inf when mu1 is not absolutely continuous
/// with respect to mu2 on the grid.
double kl_divergence(const GridDensity& mu1, const GridDensity& mu2);

/// N(M(mu), C(mu)).
GaussianMeasure gaussian_projection(const GridDensity& mu);

/// d_g(pi, G pi) for a joint density, with G pi sampled on the same grid.
double lifted_epsilon(const GridDensity& joint);

/// Integrates out the data block.
GridDensity marginal_u(const GridDensity& joint);

}  // namespace meanfield
