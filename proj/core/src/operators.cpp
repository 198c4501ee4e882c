#include "meanfield/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <spdlog/spdlog.h>

#include "meanfield/error.hpp"

namespace meanfield {

namespace {

constexpr double kDriftWarning = 1e-3;
constexpr double kCoverageLoss = 1e-2;
constexpr double kMinEvidence = 1e-300;
// Squared Mahalanobis radius beyond which the transition kernel is dropped,
// and the relative weight below which a source cell is ignored.
constexpr double kKernelCut = 80.0;
constexpr double kSourceCut = 1e-18;

void check_drift(const char* op, double mass) {
  if (std::abs(mass - 1.0) > kDriftWarning) {
    spdlog::warn("{}: mass {:.6f} before renormalization; grid resolution or box may be too small", op, mass);
  }
}

void check_coverage(const char* op, double mass) {
  if (mass < 1.0 - kCoverageLoss) {
    std::ostringstream msg;
    msg << op << ": only " << mass << " of the mass stays inside the grid box";
    throw Error(ErrorCode::kCoverage, msg.str());
  }
}

double quadratic_form(const Matrix& precision, const double* x, int n) {
  double q = 0.0;
  for (int a = 0; a < n; ++a) {
    double row = 0.0;
    for (int b = 0; b < n; ++b) row += precision(a, b) * x[b];
    q += x[a] * row;
  }
  return q;
}

void require_state_density(const GridDensity& mu, const OperatorWorkspace& ws) {
  if (mu.blocks() || !(mu.grid() == *ws.state_grid())) {
    throw Error(ErrorCode::kGridMismatch, "density is not on the workspace state grid");
  }
}

void require_model(const ModelSpec& model, const OperatorWorkspace& ws) {
  if (model.fingerprint() != ws.fingerprint()) {
    throw Error(ErrorCode::kKernelMismatch, "operator workspace was built for a different model");
  }
}

const BlockStructure& require_joint(const GridDensity& joint, const Vector& y_dagger) {
  if (!joint.blocks()) throw Error(ErrorCode::kInvalidArgument, "operator needs a joint density");
  const BlockStructure& b = *joint.blocks();
  if (y_dagger.size() != b.K) throw Error(ErrorCode::kDimensionMismatch, "datum dimension does not match K");
  return b;
}

// Interpolation weights for a 1-D position measured in cells.
struct Bracket {
  int lower;
  double t;
};

Bracket bracket(double position) {
  const double f = std::floor(position);
  return {static_cast<int>(f), position - f};
}

}  // namespace

OperatorWorkspace::OperatorWorkspace(const ModelSpec& model, std::shared_ptr<const Grid> state_grid,
                                     std::shared_ptr<const Grid> joint_grid)
    : fingerprint_(model.fingerprint()),
      state_grid_(std::move(state_grid)),
      joint_grid_(std::move(joint_grid)),
      blocks_(model.d(), model.K()) {
  if (!state_grid_ || !joint_grid_) throw Error(ErrorCode::kInvalidArgument, "workspace needs both grids");
  if (state_grid_->dim() != model.d()) throw Error(ErrorCode::kDimensionMismatch, "state grid dimension must be d");
  if (joint_grid_->dim() != model.d() + model.K()) {
    throw Error(ErrorCode::kDimensionMismatch, "joint grid dimension must be d + K");
  }
  if (!(joint_grid_->sub_grid(0, model.d()) == *state_grid_)) {
    throw Error(ErrorCode::kGridMismatch, "joint grid state axes must equal the state grid");
  }

  const std::size_t cells = state_grid_->cells();
  psi_nodes_.resize(model.d(), static_cast<Eigen::Index>(cells));
  h_nodes_.resize(model.K(), static_cast<Eigen::Index>(cells));
  for (std::size_t i = 0; i < cells; ++i) {
    const Vector u = state_grid_->point(i);
    psi_nodes_.col(static_cast<Eigen::Index>(i)) = model.psi()(u);
    h_nodes_.col(static_cast<Eigen::Index>(i)) = model.h()(u);
  }

  const SpdFactor sigma = factorize_spd(model.sigma());
  sigma_precision_ = sigma.solve(Matrix(Matrix::Identity(model.d(), model.d())));
  sigma_log_norm_ = -0.5 * (model.d() * std::log(2.0 * std::numbers::pi) + sigma.log_det);
  const SpdFactor gamma = factorize_spd(model.gamma());
  gamma_precision_ = gamma.solve(Matrix(Matrix::Identity(model.K(), model.K())));
  gamma_log_norm_ = -0.5 * (model.K() * std::log(2.0 * std::numbers::pi) + gamma.log_det);

  if (cells <= kMaxCachedKernelCells) {
    const int d = model.d();
    Matrix kernel(static_cast<Eigen::Index>(cells), static_cast<Eigen::Index>(cells));
    std::vector<double> dx(static_cast<std::size_t>(d));
    for (std::size_t j = 0; j < cells; ++j) {
      for (std::size_t i = 0; i < cells; ++i) {
        for (int k = 0; k < d; ++k) dx[k] = state_grid_->coord(i, k) - psi_nodes_(k, static_cast<Eigen::Index>(j));
        kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            std::exp(sigma_log_norm_ - 0.5 * quadratic_form(sigma_precision_, dx.data(), d));
      }
    }
    kernel_ = std::move(kernel);
  }
}

GridDensity predict(const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws) {
  require_model(model, ws);
  require_state_density(mu, ws);
  const Grid& grid = *ws.state_grid();
  const std::size_t cells = grid.cells();
  const auto w = grid.weights();
  const auto v = mu.values();

  Vector source(static_cast<Eigen::Index>(cells));
  for (std::size_t j = 0; j < cells; ++j) source[static_cast<Eigen::Index>(j)] = w[j] * v[j];

  std::vector<double> out(cells, 0.0);
  if (ws.transition_kernel()) {
    const Vector result = *ws.transition_kernel() * source;
    for (std::size_t i = 0; i < cells; ++i) out[i] = result[static_cast<Eigen::Index>(i)];
  } else {
    // Uncached path. For each source the kernel is dropped beyond squared
    // Mahalanobis radius kKernelCut; along the fastest axis it is exp of a
    // quadratic, evaluated by a multiplicative recurrence over the exact span.
    const int d = grid.dim();
    const int last = d - 1;
    const Matrix& prec = ws.sigma_precision();
    const Matrix& psi = ws.psi_at_nodes();
    const double radius = std::sqrt(kKernelCut);
    const Axis& fast = grid.axis(last);
    const double h = fast.step();
    const double pll = prec(last, last);
    const double step_ratio = std::exp(-pll * h * h);
    const double peak = source.maxCoeff();
    std::vector<int> lo_idx(static_cast<std::size_t>(d)), hi_idx(static_cast<std::size_t>(d)),
        idx(static_cast<std::size_t>(d));
    std::vector<double> dx(static_cast<std::size_t>(d));
    for (std::size_t j = 0; j < cells; ++j) {
      const double s = source[static_cast<Eigen::Index>(j)];
      if (s <= kSourceCut * peak) continue;
      bool empty = false;
      for (int k = 0; k < last; ++k) {
        const Axis& ax = grid.axis(k);
        const double c = psi(k, static_cast<Eigen::Index>(j));
        const double reach = radius * std::sqrt(model.sigma()(k, k));
        lo_idx[k] = std::max(0, static_cast<int>(std::ceil((c - reach - ax.lo) / ax.step())));
        hi_idx[k] = std::min(ax.size - 1, static_cast<int>(std::floor((c + reach - ax.lo) / ax.step())));
        if (lo_idx[k] > hi_idx[k]) empty = true;
        idx[k] = lo_idx[k];
      }
      if (empty) continue;
      const double scale = s * std::exp(ws.sigma_log_norm());
      const double centre = psi(last, static_cast<Eigen::Index>(j));
      while (true) {
        // q(t) = c0 + 2 c1 t + pll t^2 with t the offset along the fast axis.
        std::size_t row = 0;
        double c0 = 0.0;
        double c1 = 0.0;
        for (int k = 0; k < last; ++k) {
          dx[k] = grid.axis(k).node(idx[k]) - psi(k, static_cast<Eigen::Index>(j));
          row += static_cast<std::size_t>(idx[k]) * grid.stride(k);
          c1 += prec(last, k) * dx[k];
        }
        c0 = quadratic_form(prec, dx.data(), last);
        const double disc = c1 * c1 - pll * (c0 - kKernelCut);
        if (disc > 0.0) {
          const double root = std::sqrt(disc);
          const double t_lo = (-c1 - root) / pll;
          const double t_hi = (-c1 + root) / pll;
          const int first = std::max(0, static_cast<int>(std::ceil((centre + t_lo - fast.lo) / h)));
          const int end = std::min(fast.size - 1, static_cast<int>(std::floor((centre + t_hi - fast.lo) / h)));
          if (first <= end) {
            const double t0 = fast.node(first) - centre;
            double value = scale * std::exp(-0.5 * (c0 + 2.0 * c1 * t0 + pll * t0 * t0));
            double ratio = std::exp(-(c1 * h + pll * t0 * h) - 0.5 * pll * h * h);
            double* target = out.data() + row;
            for (int m = first; m <= end; ++m) {
              target[m] += value;
              value *= ratio;
              ratio *= step_ratio;
            }
          }
        }
        int k = last - 1;
        while (k >= 0 && idx[k] == hi_idx[k]) {
          idx[k] = lo_idx[k];
          --k;
        }
        if (k < 0) break;
        ++idx[k];
      }
    }
  }
  double mass = 0.0;
  GridDensity result = GridDensity::from_values(ws.state_grid(), std::move(out), std::nullopt, &mass);
  check_drift("predict", mass);
  return result;
}

GridDensity lift(const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws) {
  require_model(model, ws);
  require_state_density(mu, ws);
  const Grid& joint = *ws.joint_grid();
  const BlockStructure& b = ws.blocks();
  const Grid data = joint.sub_grid(b.d, b.K);
  const std::size_t block = data.cells();
  const std::size_t state_cells = ws.state_grid()->cells();
  const auto v = mu.values();

  std::vector<double> out(joint.cells(), 0.0);
  std::vector<double> dy(static_cast<std::size_t>(b.K));
  for (std::size_t u = 0; u < state_cells; ++u) {
    if (v[u] == 0.0) continue;
    for (std::size_t y = 0; y < block; ++y) {
      for (int k = 0; k < b.K; ++k) dy[k] = data.coord(y, k) - ws.h_at_nodes()(k, static_cast<Eigen::Index>(u));
      out[u * block + y] = v[u] * std::exp(ws.gamma_log_norm() - 0.5 * quadratic_form(ws.gamma_precision(), dy.data(), b.K));
    }
  }
  const double mass = integrate(joint, out);
  check_coverage("lift", mass);
  check_drift("lift", mass);
  return GridDensity::from_values(ws.joint_grid(), std::move(out), b);
}

GridDensity bayes(const GridDensity& joint, const Vector& y_dagger, SliceInterpolation interpolation) {
  const BlockStructure& b = require_joint(joint, y_dagger);
  const Grid& grid = joint.grid();
  const Grid data = grid.sub_grid(b.d, b.K);
  const std::size_t block = data.cells();

  std::vector<Bracket> br(static_cast<std::size_t>(b.K));
  for (int k = 0; k < b.K; ++k) {
    const Axis& a = data.axis(k);
    const double h = a.step();
    if (!(y_dagger[k] >= a.lo + 2.0 * h && y_dagger[k] <= a.hi - 2.0 * h)) {
      std::ostringstream msg;
      msg << "datum component " << k << " = " << y_dagger[k] << " lies outside the data box [" << a.lo << ", "
          << a.hi << "] minus a two-cell margin";
      throw Error(ErrorCode::kOutOfDomain, msg.str());
    }
    br[k] = bracket((y_dagger[k] - a.lo) / h);
  }

  // Corners of the enclosing data cell and their multilinear weights.
  std::vector<std::size_t> corner_offset;
  std::vector<double> corner_weight;
  for (unsigned mask = 0; mask < (1u << b.K); ++mask) {
    std::size_t offset = 0;
    double weight = 1.0;
    for (int k = 0; k < b.K; ++k) {
      const bool upper = (mask >> k) & 1u;
      offset += static_cast<std::size_t>(br[k].lower + (upper ? 1 : 0)) * data.stride(k);
      weight *= upper ? br[k].t : 1.0 - br[k].t;
    }
    if (weight > 0.0) {
      corner_offset.push_back(offset);
      corner_weight.push_back(weight);
    }
  }

  auto state = std::make_shared<const Grid>(grid.sub_grid(0, b.d));
  const auto v = joint.values();
  std::vector<double> slice(state->cells(), 0.0);
  for (std::size_t u = 0; u < slice.size(); ++u) {
    const std::size_t base = u * block;
    if (interpolation == SliceInterpolation::kLinear) {
      double s = 0.0;
      for (std::size_t c = 0; c < corner_offset.size(); ++c) s += corner_weight[c] * v[base + corner_offset[c]];
      slice[u] = s;
    } else {
      double log_s = 0.0;
      bool zero = false;
      for (std::size_t c = 0; c < corner_offset.size() && !zero; ++c) {
        const double x = v[base + corner_offset[c]];
        if (x <= 0.0) {
          zero = true;
        } else {
          log_s += corner_weight[c] * std::log(x);
        }
      }
      slice[u] = zero ? 0.0 : std::exp(log_s);
    }
  }
  const double evidence = integrate(*state, slice);
  if (!(evidence >= kMinEvidence)) {
    throw Error(ErrorCode::kDegenerateEvidence, "datum carries no likelihood mass on the grid");
  }
  return GridDensity::from_values(std::move(state), std::move(slice));
}

Matrix kalman_gain(const Moments& joint_moments, const BlockStructure& blocks) {
  const SpdFactor c_yy = factorize_spd(joint_moments.cov_yy(blocks));
  return c_yy.solve(Matrix(joint_moments.cov_uy(blocks).transpose())).transpose();
}

GridDensity transport(const GridDensity& joint, const Vector& y_dagger) {
  const BlockStructure& b = require_joint(joint, y_dagger);
  const Grid& grid = joint.grid();
  const Grid data = grid.sub_grid(b.d, b.K);
  auto state = std::make_shared<const Grid>(grid.sub_grid(0, b.d));
  const std::size_t block = data.cells();
  const std::size_t state_cells = state->cells();
  const Matrix gain = kalman_gain(moments(joint), b);

  const auto v = joint.values();
  std::vector<double> log_v(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    log_v[i] = v[i] > 0.0 ? std::log(v[i]) : -std::numeric_limits<double>::infinity();
  }

  const auto wy = data.weights();
  std::vector<double> out(state_cells, 0.0);
  std::vector<Bracket> br(static_cast<std::size_t>(b.d));
  std::vector<int> node(static_cast<std::size_t>(b.d));
  Vector y(b.K);
  const unsigned corners = 1u << b.d;

  for (std::size_t yb = 0; yb < block; ++yb) {
    for (int k = 0; k < b.K; ++k) y[k] = data.coord(yb, k);
    const Vector shift = gain * (y_dagger - y);
    // Output node v reads the joint at v - shift along the state axes.
    for (int a = 0; a < b.d; ++a) br[a] = bracket(-shift[a] / state->axis(a).step());

    for (std::size_t i = 0; i < state_cells; ++i) {
      for (int a = 0; a < b.d; ++a) node[a] = state->axis_index(i, a);
      double log_val = 0.0;
      bool zero = false;
      for (unsigned mask = 0; mask < corners && !zero; ++mask) {
        double weight = 1.0;
        std::size_t src = 0;
        for (int a = 0; a < b.d; ++a) {
          const bool upper = (mask >> a) & 1u;
          weight *= upper ? br[a].t : 1.0 - br[a].t;
          const int j = node[a] + br[a].lower + (upper ? 1 : 0);
          if (j < 0 || j >= state->axis(a).size) {
            src = std::numeric_limits<std::size_t>::max();
          } else if (src != std::numeric_limits<std::size_t>::max()) {
            src += static_cast<std::size_t>(j) * state->stride(a);
          }
        }
        if (weight == 0.0) continue;
        if (src == std::numeric_limits<std::size_t>::max()) {
          zero = true;
          break;
        }
        const double lv = log_v[src * block + yb];
        if (lv == -std::numeric_limits<double>::infinity()) {
          zero = true;
        } else {
          log_val += weight * lv;
        }
      }
      if (!zero) out[i] += wy[yb] * std::exp(log_val);
    }
  }
  const double mass = integrate(*state, out);
  check_coverage("transport", mass);
  check_drift("transport", mass);
  return GridDensity::from_values(std::move(state), std::move(out));
}

}  // namespace meanfield
