#pragma once

#include <memory>
#include <optional>
#include <string>

#include "meanfield/density.hpp"
#include "meanfield/model.hpp"

namespace meanfield {

/// Grids and cached kernel data for one (model, state grid, joint grid)
/// triple. Built once, then shared read-only. The joint grid's first d axes
/// must equal the state grid's axes.
class OperatorWorkspace {
 public:
  OperatorWorkspace(const ModelSpec& model, std::shared_ptr<const Grid> state_grid,
                    std::shared_ptr<const Grid> joint_grid);

  const std::string& fingerprint() const { return fingerprint_; }
  const std::shared_ptr<const Grid>& state_grid() const { return state_grid_; }
  const std::shared_ptr<const Grid>& joint_grid() const { return joint_grid_; }
  const BlockStructure& blocks() const { return blocks_; }

  /// Psi and H evaluated at every state node (one column per node).
  const Matrix& psi_at_nodes() const { return psi_nodes_; }
  const Matrix& h_at_nodes() const { return h_nodes_; }

  /// Dense transition kernel N(u_i; Psi(v_j), Sigma); absent for large grids,
  /// where predict evaluates it on the fly.
  const std::optional<Matrix>& transition_kernel() const { return kernel_; }

  const Matrix& sigma_precision() const { return sigma_precision_; }
  double sigma_log_norm() const { return sigma_log_norm_; }
  const Matrix& gamma_precision() const { return gamma_precision_; }
  double gamma_log_norm() const { return gamma_log_norm_; }

 private:
  std::string fingerprint_;
  std::shared_ptr<const Grid> state_grid_;
  std::shared_ptr<const Grid> joint_grid_;
  BlockStructure blocks_;
  Matrix psi_nodes_;
  Matrix h_nodes_;
  std::optional<Matrix> kernel_;
  Matrix sigma_precision_;
  double sigma_log_norm_ = 0.0;
  Matrix gamma_precision_;
  double gamma_log_norm_ = 0.0;
};

/// Largest state grid (in cells) for which the transition kernel is cached.
inline constexpr std::size_t kMaxCachedKernelCells = 4096;

/// Prediction: P mu(u) = int N(u; Psi(v), Sigma) mu(v) dv.
GridDensity predict(const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws);

/// Lifting: Q mu(u, y) = N(y; H(u), Gamma) mu(u), on the joint grid.
GridDensity lift(const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws);

enum class SliceInterpolation {
  kGeometric,  // log-linear between neighbouring y-planes (default)
  kLinear,
};

/// Conditioning: B pi(u) = pi(u, y) / int pi(U, y) dU.
GridDensity bayes(const GridDensity& joint, const Vector& y_dagger,
                  SliceInterpolation interpolation = SliceInterpolation::kGeometric);

/// C_uy C_yy^{-1} of a joint density.
Matrix kalman_gain(const Moments& joint_moments, const BlockStructure& blocks);

/// Kalman transport: pushforward of pi under (u, y) -> u + A (y_dagger - y),
/// A = C_uy(pi) C_yy(pi)^{-1}.
GridDensity transport(const GridDensity& joint, const Vector& y_dagger);

}  // namespace meanfield
