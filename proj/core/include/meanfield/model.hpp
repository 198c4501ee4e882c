#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "meanfield/numerics.hpp"

namespace meanfield {

/// Closed set of map families. Every state map Psi and observation map H is
/// one of these, so models serialize and kernels can be precomputed.
enum class MapFamily {
  kConstant,         // value
  kLinear,           // matrix * u
  kTanh,             // scale * tanh(z)
  kTanhSin,          // scale * tanh(z) + delta * sin(freq * z)
  kBoundedRational,  // scale * tanh(z) + delta * z^2 / (1 + z^2)
  kLinearSin,        // scale * z + delta * sin(freq * z)
  kLinearRational,   // scale * z + delta * z^2 / (1 + z^2)
};
// For the nonlinear families z = matrix * u (matrix defaults to identity)
// and the scalar profile is applied componentwise.

struct FamilyInfo {
  std::string name;
  MapFamily family;
  std::vector<std::string> parameters;
  std::string description;
};

/// Catalog of the built-in families.
const std::vector<FamilyInfo>& registered_families();

/// Throws kUnknownFamily.
const FamilyInfo& lookup_family(std::string_view name);

struct AffineMap {
  Matrix matrix;
  Vector offset;

  Vector operator()(const Vector& u) const { return matrix * u + offset; }
};

struct MapParams {
  double scale = 1.0;
  double delta = 0.0;
  double freq = 3.0;
  Matrix matrix;  // empty means identity for the nonlinear families
  Vector value;   // constant family only
};

class MapSpec {
 public:
  /// Throws kUnknownFamily or kDimensionMismatch.
  MapSpec(std::string_view family, MapParams params, int in_dim);

  Vector operator()(const Vector& u) const;

  MapFamily family() const { return family_; }
  const std::string& family_name() const { return name_; }
  const MapParams& params() const { return params_; }
  int in_dim() const { return in_dim_; }
  int out_dim() const { return out_dim_; }

  /// Present when the map is affine (linear family, constant family, or a
  /// linear_* family with zero perturbation).
  std::optional<AffineMap> affine() const;

  bool operator==(const MapSpec& other) const;

 private:
  double profile(double z) const;

  MapFamily family_;
  std::string name_;
  MapParams params_;
  int in_dim_;
  int out_dim_;
};

struct DeclaredBounds {
  double kappa_psi = 0.0;
  double kappa_h = 0.0;
  double ell_h = 0.0;

  bool operator==(const DeclaredBounds&) const = default;
};

/// A filtering problem: u' = Psi(u) + xi, y = H(u') + eta with
/// xi ~ N(0, Sigma), eta ~ N(0, Gamma), u_0 ~ N(m0, S0).
class ModelSpec {
 public:
  ModelSpec(MapSpec psi, MapSpec h, Matrix sigma, Matrix gamma, Vector m0, Matrix s0,
            std::optional<DeclaredBounds> bounds = std::nullopt);

  int d() const { return psi_.in_dim(); }
  int K() const { return h_.out_dim(); }
  const MapSpec& psi() const { return psi_; }
  const MapSpec& h() const { return h_; }
  const Matrix& sigma() const { return sigma_; }
  const Matrix& gamma() const { return gamma_; }
  const Vector& m0() const { return m0_; }
  const Matrix& s0() const { return s0_; }
  const std::optional<DeclaredBounds>& declared_bounds() const { return bounds_; }

  /// Smallest eigenvalues: Sigma >= sigma I, Gamma >= gamma I.
  double sigma_min() const;
  double gamma_min() const;

  struct LinearMatrices {
    AffineMap psi;
    AffineMap h;
  };
  std::optional<LinearMatrices> linear_matrices() const;

  /// Canonical config text; equal models have equal fingerprints.
  std::string fingerprint() const;

  bool operator==(const ModelSpec& other) const;

 private:
  MapSpec psi_;
  MapSpec h_;
  Matrix sigma_;
  Matrix gamma_;
  Vector m0_;
  Matrix s0_;
  std::optional<DeclaredBounds> bounds_;
};

/// Probe-based certificate of the standing assumptions on a model.
struct AssumptionCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  std::optional<double> declared;
  std::string note;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;
  bool all_passed = false;
  bool linear_exactness_mode = false;
  std::optional<double> kappa_psi;  // bound used downstream, when bounded
  std::optional<double> kappa_h;
  double ell_h = 0.0;
  double sigma = 0.0;
  double gamma = 0.0;
};

/// Sup-norm probes on 10^4 fixed points (radius 100, compared with radius 50
/// to detect growth) and a finite-difference Lipschitz probe on [-10, 10]^d.
AssumptionReport validate_assumptions(const ModelSpec& model);

/// Parameters of the default near-Gaussianity sweep.
enum class SweepFamily {
  kLinearPerturbed,  // Psi = a u + delta sin(3u),     H = u + delta u^2/(1+u^2)
  kTanhPerturbed,    // Psi = a tanh(u) + delta sin(3u), H = tanh(u) + delta u^2/(1+u^2)
};

std::string_view to_string(SweepFamily family);
SweepFamily sweep_family_from_string(std::string_view name);

/// One-dimensional sweep scenario with Sigma = Gamma = 0.25, m0 = 0, S0 = 1.
ModelSpec sweep_model(SweepFamily family, double delta, double a = 0.9);

// Config-file (JSON) conversion. Matrices are nested row-major arrays.
nlohmann::json to_json(const MapSpec& map);
MapSpec map_from_json(const nlohmann::json& j, int in_dim);
nlohmann::json to_json(const ModelSpec& model);
ModelSpec model_from_json(const nlohmann::json& j);

}  // namespace meanfield
