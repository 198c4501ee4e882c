#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

#include "meanfield/density.hpp"
#include "meanfield/model.hpp"
#include "meanfield/operators.hpp"

namespace meanfield {

enum class FilterKind {
  kTrue,           // B Q P on the grid
  kEnkfMeanField,  // T Q P on the grid
  kGpfBG,          // B G Q P, Gaussian state
  kGpfGT,          // G T Q P, Gaussian state
  kEnkfParticles,  // perturbed-observation EnKF with N particles
  kKalman,         // closed-form Kalman recursion (affine models only)
};

std::string_view to_string(FilterKind kind);
/// Accepts "true", "enkf_mf", "gpf_bg", "gpf_gt", "enkf_N", "kalman".
FilterKind filter_kind_from_string(std::string_view name);

bool is_grid_kind(FilterKind kind);

/// N x d particle array.
class Ensemble {
 public:
  explicit Ensemble(Matrix particles);

  const Matrix& particles() const { return particles_; }
  int size() const { return static_cast<int>(particles_.rows()); }
  int dim() const { return static_cast<int>(particles_.cols()); }

 private:
  Matrix particles_;
};

/// Sample mean and unbiased sample covariance.
Moments moments(const Ensemble& ens);

using FilterMeasure = std::variant<GridDensity, GaussianMeasure, Ensemble>;

Moments measure_moments(const FilterMeasure& m);

struct StepRecord {
  int step = 0;
  Moments moments;
  std::optional<double> eps;         // d_g(QP mu_{j-1}, G QP mu_{j-1}), absent at step 0
  std::optional<double> dg_to_true;  // filled by run_filters when the true filter ran
};

struct FilterTrajectory {
  std::vector<Vector> data;    // y_1 .. y_J
  std::vector<Vector> states;  // u_0 .. u_J, empty when the data were supplied
  double kappa_y = 0.0;        // max_j |y_j|
  std::optional<FilterKind> kind;
  std::vector<FilterMeasure> measures;  // J + 1 entries once a filter ran
  std::vector<StepRecord> records;

  int steps() const { return static_cast<int>(data.size()); }
};

/// u_0 ~ N(m0, S0), u_{j+1} = Psi(u_j) + xi_j, y_{j+1} = H(u_{j+1}) + eta_{j+1}.
FilterTrajectory generate_data(const ModelSpec& model, int steps, std::uint64_t seed);

/// Wraps externally supplied data; kappa_y is computed from it.
FilterTrajectory trajectory_from_data(std::vector<Vector> data);

GridDensity step_true(const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws,
                      const Vector& y_dagger);

GridDensity step_enkf_meanfield(const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws,
                                const Vector& y_dagger);

enum class GpfForm { kBG, kGT };

/// P and Q run on the grid; BG conditions the projected joint in closed form,
/// GT transports on the grid and projects afterwards.
GaussianMeasure step_gpf(const GaussianMeasure& mu, const ModelSpec& model, const OperatorWorkspace& ws,
                         const Vector& y_dagger, GpfForm form);

Ensemble step_enkf_particles(const Ensemble& ens, const ModelSpec& model, const Vector& y_dagger,
                             std::uint64_t seed);

/// Exact Gaussian filtering distributions mu_0 .. mu_J. Throws kModelNotLinear.
std::vector<GaussianMeasure> kalman_analytic(const ModelSpec& model, const FilterTrajectory& data);

struct GridConfig {
  std::optional<int> state_nodes;  // per axis; default_resolution(d) when absent
  std::optional<int> data_nodes;   // per axis; default_resolution(d + K) when absent
  std::optional<Vector> state_lo, state_hi;
  std::optional<Vector> data_lo, data_hi;
  int prepass_particles = 4096;
  std::uint64_t prepass_seed = 0x6d65616e6669656cULL;
};

struct FilterGrids {
  std::shared_ptr<const Grid> state;
  std::shared_ptr<const Grid> joint;
};

/// Boxes cover the prior, every predicted and filtered law of a particle
/// pre-pass (bootstrap and EnKF, mean +/- 6 sd, padded by 10%) and every
/// datum +/- 6 sd of the observation noise. Explicit boxes in `config` win.
FilterGrids select_grids(const ModelSpec& model, const FilterTrajectory& data, const GridConfig& config);

struct FilterConfig {
  GridConfig grid;
  int ensemble_size = 1000;
  std::uint64_t seed = 0;  // particle noise
};

/// Runs one filter over `data`. Grid kinds need `ws`; step errors are
/// rethrown with the step index attached.
FilterTrajectory run_filter(FilterKind kind, const ModelSpec& model, const FilterTrajectory& data,
                            const FilterConfig& config, const OperatorWorkspace* ws);

struct PairDistance {
  FilterKind a;
  FilterKind b;
  std::vector<double> per_step;
  double max = 0.0;
};

struct FilterComparison {
  std::optional<FilterGrids> grids;
  std::vector<FilterTrajectory> runs;  // same order as the requested kinds
  std::vector<PairDistance> pairs;     // every pair of grid/Gaussian kinds
  double lipschitz_p = 0.0;            // 1 + kappa_Psi^2 + tr Sigma, 0 when Psi is unbounded
  double lipschitz_q = 0.0;            // 1 + kappa_H^2 + tr Gamma, 0 when H is unbounded

  const FilterTrajectory* find(FilterKind kind) const;
  const PairDistance* pair(FilterKind a, FilterKind b) const;
};

/// Runs several kinds on one data realization with a shared workspace and
/// fills the pairwise d_g diagnostics. Gaussian and Kalman measures are
/// sampled on the state grid for the comparison.
FilterComparison run_filters(const std::vector<FilterKind>& kinds, const ModelSpec& model,
                             const FilterTrajectory& data, const FilterConfig& config);

}  // namespace meanfield
