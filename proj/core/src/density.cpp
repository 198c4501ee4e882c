#include "meanfield/density.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "meanfield/error.hpp"

namespace meanfield {

namespace {

void require_same_grid(const GridDensity& a, const GridDensity& b) {
  if (a.grid_ptr() != b.grid_ptr() && !(a.grid() == b.grid())) {
    throw Error(ErrorCode::kGridMismatch, "densities live on different grids");
  }
}

}  // namespace

double integrate(const Grid& grid, std::span<const double> values) {
  if (values.size() != grid.cells()) {
    throw Error(ErrorCode::kDimensionMismatch, "value count does not match grid");
  }
  std::vector<double> terms(values.size());
  const auto w = grid.weights();
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = w[i] * values[i];
  return pairwise_sum(terms);
}

GridDensity GridDensity::from_values(std::shared_ptr<const Grid> grid, std::vector<double> values,
                                     std::optional<BlockStructure> blocks, double* mass_out) {
  if (!grid) throw Error(ErrorCode::kInvalidArgument, "density needs a grid");
  if (values.size() != grid->cells()) {
    throw Error(ErrorCode::kDimensionMismatch, "value count does not match grid");
  }
  if (blocks && blocks->n() != grid->dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "block structure does not match grid dimension");
  }
  for (double v : values) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "density values must be finite and nonnegative");
    }
  }
  const double mass = integrate(*grid, values);
  if (mass_out) *mass_out = mass;
  if (!(mass > 0.0)) throw Error(ErrorCode::kInvalidArgument, "density has zero mass on the grid");
  const double inv = 1.0 / mass;
  for (double& v : values) v *= inv;
  return GridDensity(std::move(grid), std::move(values), blocks);
}

GridDensity GridDensity::from_normalized(std::shared_ptr<const Grid> grid, std::vector<double> values,
                                         std::optional<BlockStructure> blocks) {
  double mass = 0.0;
  GridDensity checked = from_values(grid, values, blocks, &mass);
  if (std::abs(mass - 1.0) > 1e-8) {
    throw Error(ErrorCode::kInvalidArgument, "stored density is not normalized");
  }
  return GridDensity(std::move(grid), std::move(values), blocks);
}

double GridDensity::mass() const { return integrate(*grid_, values_); }

GridDensity from_gaussian(const GaussianMeasure& g, std::shared_ptr<const Grid> grid,
                          std::optional<BlockStructure> blocks) {
  if (!grid) throw Error(ErrorCode::kInvalidArgument, "density needs a grid");
  const int n = grid->dim();
  if (g.dim() != n) throw Error(ErrorCode::kDimensionMismatch, "Gaussian dimension does not match grid");
  for (int k = 0; k < n; ++k) {
    const double sd = std::sqrt(g.cov()(k, k));
    const Axis& a = grid->axis(k);
    if (g.mean()[k] - 6.0 * sd < a.lo || g.mean()[k] + 6.0 * sd > a.hi) {
      std::ostringstream msg;
      msg << "grid box [" << a.lo << ", " << a.hi << "] on axis " << k
          << " does not cover mean +/- 6 sd (" << g.mean()[k] << " +/- " << 6.0 * sd << ")";
      throw Error(ErrorCode::kCoverage, msg.str());
    }
  }
  const Matrix precision = g.factor().solve(Matrix(Matrix::Identity(n, n)));
  const double log_norm = -0.5 * (n * std::log(2.0 * std::numbers::pi) + g.log_det());
  std::vector<double> values(grid->cells());
  std::vector<double> dx(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (int k = 0; k < n; ++k) dx[k] = grid->coord(i, k) - g.mean()[k];
    double q = 0.0;
    for (int a = 0; a < n; ++a) {
      double row = 0.0;
      for (int b = 0; b < n; ++b) row += precision(a, b) * dx[b];
      q += dx[a] * row;
    }
    values[i] = std::exp(log_norm - 0.5 * q);
  }
  return GridDensity::from_values(std::move(grid), std::move(values), blocks);
}

Moments moments(const GridDensity& mu) {
  const Grid& grid = mu.grid();
  const int n = grid.dim();
  const auto w = grid.weights();
  const auto v = mu.values();
  const std::size_t cells = grid.cells();
  std::vector<double> p(cells);
  for (std::size_t i = 0; i < cells; ++i) p[i] = w[i] * v[i];
  std::vector<double> terms(cells);

  Moments out{Vector::Zero(n), Matrix::Zero(n, n)};
  for (int k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < cells; ++i) terms[i] = p[i] * grid.coord(i, k);
    out.mean[k] = pairwise_sum(terms);
  }
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      for (std::size_t i = 0; i < cells; ++i) {
        terms[i] = p[i] * (grid.coord(i, a) - out.mean[a]) * (grid.coord(i, b) - out.mean[b]);
      }
      out.cov(a, b) = out.cov(b, a) = pairwise_sum(terms);
    }
  }
  return out;
}

double dg_distance(const GridDensity& mu1, const GridDensity& mu2) {
  require_same_grid(mu1, mu2);
  const Grid& grid = mu1.grid();
  const auto w = grid.weights();
  const auto r2 = grid.norm2();
  const auto a = mu1.values();
  const auto b = mu2.values();
  std::vector<double> terms(grid.cells());
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = w[i] * (1.0 + r2[i]) * std::abs(a[i] - b[i]);
  return pairwise_sum(terms);
}

double tv_distance(const GridDensity& mu1, const GridDensity& mu2) {
  require_same_grid(mu1, mu2);
  const auto w = mu1.grid().weights();
  const auto a = mu1.values();
  const auto b = mu2.values();
  std::vector<double> terms(w.size());
  for (std::size_t i = 0; i < terms.size(); ++i) terms[i] = w[i] * std::abs(a[i] - b[i]);
  return pairwise_sum(terms);
}

double kl_divergence(const GridDensity& mu1, const GridDensity& mu2) {
  require_same_grid(mu1, mu2);
  const auto w = mu1.grid().weights();
  const auto a = mu1.values();
  const auto b = mu2.values();
  std::vector<double> terms(w.size(), 0.0);
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (a[i] <= 0.0 || w[i] <= 0.0) continue;
    if (b[i] <= 0.0) return std::numeric_limits<double>::infinity();
    terms[i] = w[i] * a[i] * std::log(a[i] / b[i]);
  }
  return std::max(pairwise_sum(terms), 0.0);
}

GaussianMeasure gaussian_projection(const GridDensity& mu) {
  Moments m = moments(mu);
  return GaussianMeasure(std::move(m.mean), std::move(m.cov));
}

double lifted_epsilon(const GridDensity& joint) {
  if (!joint.blocks()) throw Error(ErrorCode::kInvalidArgument, "lifted epsilon needs a joint density");
  const GaussianMeasure projected = gaussian_projection(joint);
  const GridDensity gridded = from_gaussian(projected, joint.grid_ptr(), joint.blocks());
  return dg_distance(joint, gridded);
}

GridDensity marginal_u(const GridDensity& joint) {
  if (!joint.blocks()) throw Error(ErrorCode::kInvalidArgument, "marginal needs a joint density");
  const BlockStructure& b = *joint.blocks();
  const Grid& grid = joint.grid();
  auto state = std::make_shared<const Grid>(grid.sub_grid(0, b.d));
  const Grid data = grid.sub_grid(b.d, b.K);
  const std::size_t block = data.cells();
  const auto wy = data.weights();
  const auto v = joint.values();
  std::vector<double> out(state->cells());
  std::vector<double> terms(block);
  for (std::size_t u = 0; u < out.size(); ++u) {
    for (std::size_t y = 0; y < block; ++y) terms[y] = wy[y] * v[u * block + y];
    out[u] = pairwise_sum(terms);
  }
  return GridDensity::from_values(std::move(state), std::move(out));
}

}  // namespace meanfield
