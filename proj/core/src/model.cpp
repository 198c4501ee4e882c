#include "meanfield/model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>
#include <nlohmann/json.hpp>

#include "meanfield/error.hpp"

namespace meanfield {

using nlohmann::json;

const std::vector<FamilyInfo>& registered_families() {
  static const std::vector<FamilyInfo> catalog = {
      {"constant", MapFamily::kConstant, {"value"}, "u -> value"},
      {"linear", MapFamily::kLinear, {"matrix"}, "u -> matrix u"},
      {"tanh", MapFamily::kTanh, {"scale", "matrix"}, "u -> scale tanh(matrix u)"},
      {"tanh_sin", MapFamily::kTanhSin, {"scale", "delta", "freq", "matrix"},
       "u -> scale tanh(z) + delta sin(freq z), z = matrix u"},
      {"bounded_rational", MapFamily::kBoundedRational, {"scale", "delta", "matrix"},
       "u -> scale tanh(z) + delta z^2/(1+z^2), z = matrix u"},
      {"linear_sin", MapFamily::kLinearSin, {"scale", "delta", "freq", "matrix"},
       "u -> scale z + delta sin(freq z), z = matrix u"},
      {"linear_rational", MapFamily::kLinearRational, {"scale", "delta", "matrix"},
       "u -> scale z + delta z^2/(1+z^2), z = matrix u"},
  };
  return catalog;
}

const FamilyInfo& lookup_family(std::string_view name) {
  for (const FamilyInfo& info : registered_families()) {
    if (info.name == name) return info;
  }
  throw Error(ErrorCode::kUnknownFamily, "unknown map family '" + std::string(name) + "'");
}

MapSpec::MapSpec(std::string_view family, MapParams params, int in_dim)
    : family_(lookup_family(family).family), name_(family), params_(std::move(params)), in_dim_(in_dim) {
  if (in_dim_ < 1) throw Error(ErrorCode::kInvalidArgument, "map input dimension must be >= 1");
  switch (family_) {
    case MapFamily::kConstant:
      if (params_.value.size() < 1) throw Error(ErrorCode::kInvalidArgument, "constant map needs a value");
      out_dim_ = static_cast<int>(params_.value.size());
      break;
    case MapFamily::kLinear:
      if (params_.matrix.size() == 0) throw Error(ErrorCode::kInvalidArgument, "linear map needs a matrix");
      [[fallthrough]];
    default:
      if (params_.matrix.size() == 0) {
        out_dim_ = in_dim_;
      } else {
        if (params_.matrix.cols() != in_dim_) {
          throw Error(ErrorCode::kDimensionMismatch, "map matrix columns do not match input dimension");
        }
        out_dim_ = static_cast<int>(params_.matrix.rows());
      }
  }
  if (!std::isfinite(params_.scale) || !std::isfinite(params_.delta) || !std::isfinite(params_.freq)) {
    throw Error(ErrorCode::kInvalidArgument, "map parameters must be finite");
  }
}

double MapSpec::profile(double z) const {
  const double s = params_.scale;
  const double dl = params_.delta;
  switch (family_) {
    case MapFamily::kTanh: return s * std::tanh(z);
    case MapFamily::kTanhSin: return s * std::tanh(z) + dl * std::sin(params_.freq * z);
    case MapFamily::kBoundedRational: return s * std::tanh(z) + dl * z * z / (1.0 + z * z);
    case MapFamily::kLinearSin: return s * z + dl * std::sin(params_.freq * z);
    case MapFamily::kLinearRational: return s * z + dl * z * z / (1.0 + z * z);
    default: return z;
  }
}

Vector MapSpec::operator()(const Vector& u) const {
  if (u.size() != in_dim_) throw Error(ErrorCode::kDimensionMismatch, "map input has wrong dimension");
  switch (family_) {
    case MapFamily::kConstant: return params_.value;
    case MapFamily::kLinear: return params_.matrix * u;
    default: {
      Vector z = params_.matrix.size() == 0 ? u : Vector(params_.matrix * u);
      for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = profile(z[i]);
      return z;
    }
  }
}

std::optional<AffineMap> MapSpec::affine() const {
  const Matrix pre = params_.matrix.size() == 0 ? Matrix(Matrix::Identity(in_dim_, in_dim_)) : params_.matrix;
  switch (family_) {
    case MapFamily::kConstant:
      return AffineMap{Matrix::Zero(out_dim_, in_dim_), params_.value};
    case MapFamily::kLinear:
      return AffineMap{params_.matrix, Vector::Zero(out_dim_)};
    case MapFamily::kLinearSin:
    case MapFamily::kLinearRational:
      if (params_.delta == 0.0) return AffineMap{params_.scale * pre, Vector::Zero(out_dim_)};
      return std::nullopt;
    case MapFamily::kTanh:
    case MapFamily::kTanhSin:
    case MapFamily::kBoundedRational:
      if (params_.scale == 0.0 && params_.delta == 0.0) {
        return AffineMap{Matrix::Zero(out_dim_, in_dim_), Vector::Zero(out_dim_)};
      }
      return std::nullopt;
  }
  return std::nullopt;
}

bool MapSpec::operator==(const MapSpec& other) const {
  return family_ == other.family_ && in_dim_ == other.in_dim_ && out_dim_ == other.out_dim_ &&
         params_.scale == other.params_.scale && params_.delta == other.params_.delta &&
         params_.freq == other.params_.freq && params_.matrix == other.params_.matrix &&
         params_.value == other.params_.value;
}

ModelSpec::ModelSpec(MapSpec psi, MapSpec h, Matrix sigma, Matrix gamma, Vector m0, Matrix s0,
                     std::optional<DeclaredBounds> bounds)
    : psi_(std::move(psi)),
      h_(std::move(h)),
      sigma_(std::move(sigma)),
      gamma_(std::move(gamma)),
      m0_(std::move(m0)),
      s0_(std::move(s0)),
      bounds_(bounds) {
  const int d = psi_.in_dim();
  if (psi_.out_dim() != d) throw Error(ErrorCode::kDimensionMismatch, "Psi must map R^d to R^d");
  if (h_.in_dim() != d) throw Error(ErrorCode::kDimensionMismatch, "H must take a state in R^d");
  if (sigma_.rows() != d || sigma_.cols() != d) throw Error(ErrorCode::kDimensionMismatch, "Sigma must be d x d");
  if (gamma_.rows() != K() || gamma_.cols() != K()) throw Error(ErrorCode::kDimensionMismatch, "Gamma must be K x K");
  if (m0_.size() != d) throw Error(ErrorCode::kDimensionMismatch, "m0 must have dimension d");
  if (s0_.rows() != d || s0_.cols() != d) throw Error(ErrorCode::kDimensionMismatch, "S0 must be d x d");
  for (const Matrix* m : {&sigma_, &gamma_, &s0_}) {
    if (!is_symmetric(*m)) throw Error(ErrorCode::kInvalidArgument, "covariances must be symmetric");
    factorize_spd(*m);
    if (!(min_eigenvalue(*m) > 0.0)) throw Error(ErrorCode::kSingularCovariance, "covariances must be positive definite");
  }
  if (bounds_ && (bounds_->kappa_psi < 0 || bounds_->kappa_h < 0 || bounds_->ell_h < 0)) {
    throw Error(ErrorCode::kInvalidArgument, "declared bounds must be nonnegative");
  }
}

double ModelSpec::sigma_min() const { return min_eigenvalue(sigma_); }
double ModelSpec::gamma_min() const { return min_eigenvalue(gamma_); }

std::optional<ModelSpec::LinearMatrices> ModelSpec::linear_matrices() const {
  auto p = psi_.affine();
  auto h = h_.affine();
  if (!p || !h) return std::nullopt;
  return LinearMatrices{std::move(*p), std::move(*h)};
}

std::string ModelSpec::fingerprint() const { return to_json(*this).dump(); }

bool ModelSpec::operator==(const ModelSpec& other) const {
  return psi_ == other.psi_ && h_ == other.h_ && sigma_ == other.sigma_ && gamma_ == other.gamma_ &&
         m0_ == other.m0_ && s0_ == other.s0_ && bounds_ == other.bounds_;
}

// ---------------------------------------------------------------- probes

namespace {

constexpr int kProbePoints = 10000;
constexpr double kSupRadius = 100.0;
constexpr double kLipschitzRadius = 10.0;
constexpr double kGrowthFactor = 1.25;
constexpr double kLipschitzSlack = 0.05;

int probe_nodes_per_axis(int d) {
  return std::max(2, static_cast<int>(std::ceil(std::pow(static_cast<double>(kProbePoints), 1.0 / d))));
}

template <typename F>
void for_each_probe(int d, double radius, F&& f) {
  const int per_axis = probe_nodes_per_axis(d);
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  Vector u(d);
  while (true) {
    for (int k = 0; k < d; ++k) u[k] = -radius + 2.0 * radius * idx[k] / (per_axis - 1);
    f(u);
    int k = d - 1;
    while (k >= 0 && ++idx[k] == per_axis) idx[k--] = 0;
    if (k < 0) break;
  }
}

double sup_norm(const MapSpec& map, double radius) {
  double sup = 0.0;
  for_each_probe(map.in_dim(), radius, [&](const Vector& u) { sup = std::max(sup, map(u).norm()); });
  return sup;
}

double lipschitz_probe(const MapSpec& map) {
  constexpr double kStep = 1e-5;
  double best = 0.0;
  Matrix jac(map.out_dim(), map.in_dim());
  for_each_probe(map.in_dim(), kLipschitzRadius, [&](const Vector& u) {
    for (int k = 0; k < map.in_dim(); ++k) {
      Vector hi = u, lo = u;
      hi[k] += kStep;
      lo[k] -= kStep;
      jac.col(k) = (map(hi) - map(lo)) / (2.0 * kStep);
    }
    const double norm = Eigen::JacobiSVD<Matrix>(jac).singularValues()(0);
    best = std::max(best, norm);
  });
  return best;
}

struct SupProbe {
  double sup;
  bool bounded;
};

SupProbe probe_bounded(const MapSpec& map) {
  const double outer = sup_norm(map, kSupRadius);
  const double inner = sup_norm(map, 0.5 * kSupRadius);
  return {outer, outer <= kGrowthFactor * inner + 1e-12};
}

}  // namespace

AssumptionReport validate_assumptions(const ModelSpec& model) {
  AssumptionReport report;
  const auto declared = model.declared_bounds();
  const bool affine = model.linear_matrices().has_value();

  auto bounded_check = [&](const char* name, const MapSpec& map, std::optional<double> decl) {
    const SupProbe probe = probe_bounded(map);
    AssumptionCheck c{name, probe.bounded, probe.sup, decl, ""};
    if (!probe.bounded) {
      c.note = affine ? "unbounded; linear-exactness mode (exactness tests only)"
                      : "unbounded: sup-norm grows with the probe radius";
    } else if (decl && probe.sup > *decl * (1.0 + 1e-12) + 1e-12) {
      c.passed = false;
      c.note = "probe exceeds declared bound";
    }
    report.checks.push_back(c);
    return probe;
  };

  const SupProbe psi = bounded_check("Psi bounded", model.psi(), declared ? std::optional(declared->kappa_psi) : std::nullopt);
  const SupProbe h = bounded_check("H bounded", model.h(), declared ? std::optional(declared->kappa_h) : std::nullopt);

  report.ell_h = lipschitz_probe(model.h());
  {
    AssumptionCheck c{"H Lipschitz", true, report.ell_h, declared ? std::optional(declared->ell_h) : std::nullopt, ""};
    if (declared && report.ell_h > declared->ell_h * (1.0 + kLipschitzSlack)) {
      c.passed = false;
      c.note = "finite-difference slope exceeds declared constant by more than 5%";
    }
    report.checks.push_back(c);
  }

  report.sigma = model.sigma_min();
  report.gamma = model.gamma_min();
  report.checks.push_back({"Sigma positive definite", report.sigma > 0.0, report.sigma, std::nullopt, ""});
  report.checks.push_back({"Gamma positive definite", report.gamma > 0.0, report.gamma, std::nullopt, ""});

  if (psi.bounded) report.kappa_psi = declared ? declared->kappa_psi : psi.sup;
  if (h.bounded) report.kappa_h = declared ? declared->kappa_h : h.sup;
  report.linear_exactness_mode = affine && !(psi.bounded && h.bounded);
  report.all_passed = std::all_of(report.checks.begin(), report.checks.end(),
                                  [](const AssumptionCheck& c) { return c.passed; });
  return report;
}

// ---------------------------------------------------------------- sweep

std::string_view to_string(SweepFamily family) {
  switch (family) {
    case SweepFamily::kLinearPerturbed: return "linear_perturbed";
    case SweepFamily::kTanhPerturbed: return "tanh_perturbed";
  }
  return "unknown";
}

SweepFamily sweep_family_from_string(std::string_view name) {
  if (name == "linear_perturbed") return SweepFamily::kLinearPerturbed;
  if (name == "tanh_perturbed") return SweepFamily::kTanhPerturbed;
  throw Error(ErrorCode::kUnknownFamily, "unknown sweep family '" + std::string(name) + "'");
}

ModelSpec sweep_model(SweepFamily family, double delta, double a) {
  MapParams psi_params;
  psi_params.scale = a;
  psi_params.delta = delta;
  psi_params.freq = 3.0;
  MapParams h_params;
  h_params.scale = 1.0;
  h_params.delta = delta;
  const bool linear = family == SweepFamily::kLinearPerturbed;
  MapSpec psi(linear ? "linear_sin" : "tanh_sin", psi_params, 1);
  MapSpec h(linear ? "linear_rational" : "bounded_rational", h_params, 1);
  const Matrix quarter = Matrix::Constant(1, 1, 0.25);
  return ModelSpec(std::move(psi), std::move(h), quarter, quarter, Vector::Zero(1), Matrix::Identity(1, 1));
}

// ---------------------------------------------------------------- JSON

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw Error(ErrorCode::kConfig, std::string(what) + " must be a non-empty array of rows");
  }
  const std::size_t cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw Error(ErrorCode::kConfig, std::string(what) + " rows must have equal length");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) throw Error(ErrorCode::kConfig, std::string(what) + " entries must be numbers");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty()) throw Error(ErrorCode::kConfig, std::string(what) + " must be a non-empty array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::kConfig, std::string(what) + " entries must be numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

double number_from_json(const json& j, const char* what) {
  if (!j.is_number()) throw Error(ErrorCode::kConfig, std::string(what) + " must be a number");
  return j.get<double>();
}

void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> allowed, const char* where) {
  for (const auto& item : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw Error(ErrorCode::kConfig, std::string("unknown key '") + item.key() + "' in " + where);
    }
  }
}

}  // namespace

json to_json(const MapSpec& map) {
  json j;
  j["family"] = map.family_name();
  const FamilyInfo& info = lookup_family(map.family_name());
  const MapParams& p = map.params();
  for (const std::string& key : info.parameters) {
    if (key == "scale") j["scale"] = p.scale;
    if (key == "delta") j["delta"] = p.delta;
    if (key == "freq") j["freq"] = p.freq;
    if (key == "value") j["value"] = vector_to_json(p.value);
    if (key == "matrix" && p.matrix.size() > 0) j["matrix"] = matrix_to_json(p.matrix);
  }
  return j;
}

MapSpec map_from_json(const json& j, int in_dim) {
  if (!j.is_object() || !j.contains("family") || !j["family"].is_string()) {
    throw Error(ErrorCode::kConfig, "map entry needs a string 'family'");
  }
  const FamilyInfo& info = lookup_family(j["family"].get<std::string>());
  MapParams p;
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (key == "family") continue;
    if (std::find(info.parameters.begin(), info.parameters.end(), key) == info.parameters.end()) {
      throw Error(ErrorCode::kConfig, "family '" + info.name + "' has no parameter '" + key + "'");
    }
    if (key == "scale") p.scale = number_from_json(item.value(), "scale");
    if (key == "delta") p.delta = number_from_json(item.value(), "delta");
    if (key == "freq") p.freq = number_from_json(item.value(), "freq");
    if (key == "value") p.value = vector_from_json(item.value(), "value");
    if (key == "matrix") p.matrix = matrix_from_json(item.value(), "matrix");
  }
  return MapSpec(info.name, std::move(p), in_dim);
}

json to_json(const ModelSpec& model) {
  json j;
  j["d"] = model.d();
  j["K"] = model.K();
  j["psi"] = to_json(model.psi());
  j["h"] = to_json(model.h());
  j["Sigma"] = matrix_to_json(model.sigma());
  j["Gamma"] = matrix_to_json(model.gamma());
  j["m0"] = vector_to_json(model.m0());
  j["S0"] = matrix_to_json(model.s0());
  if (const auto& b = model.declared_bounds()) {
    j["bounds"] = {{"kappa_psi", b->kappa_psi}, {"kappa_h", b->kappa_h}, {"ell_h", b->ell_h}};
  }
  return j;
}

ModelSpec model_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "model must be an object");
  reject_unknown_keys(j, {"d", "K", "psi", "h", "Sigma", "Gamma", "m0", "S0", "bounds"}, "model");
  for (const char* key : {"d", "K", "psi", "h", "Sigma", "Gamma", "m0", "S0"}) {
    if (!j.contains(key)) throw Error(ErrorCode::kConfig, std::string("model is missing '") + key + "'");
  }
  if (!j["d"].is_number_integer() || !j["K"].is_number_integer()) {
    throw Error(ErrorCode::kConfig, "model 'd' and 'K' must be integers");
  }
  const int d = j["d"].get<int>();
  const int k = j["K"].get<int>();
  MapSpec psi = map_from_json(j["psi"], d);
  MapSpec h = map_from_json(j["h"], d);
  if (h.out_dim() != k) throw Error(ErrorCode::kConfig, "H output dimension does not match K");
  std::optional<DeclaredBounds> bounds;
  if (j.contains("bounds")) {
    const json& b = j["bounds"];
    if (!b.is_object()) throw Error(ErrorCode::kConfig, "bounds must be an object");
    reject_unknown_keys(b, {"kappa_psi", "kappa_h", "ell_h"}, "bounds");
    for (const char* key : {"kappa_psi", "kappa_h", "ell_h"}) {
      if (!b.contains(key)) throw Error(ErrorCode::kConfig, std::string("bounds is missing '") + key + "'");
    }
    bounds = DeclaredBounds{number_from_json(b.at("kappa_psi"), "kappa_psi"),
                            number_from_json(b.at("kappa_h"), "kappa_h"),
                            number_from_json(b.at("ell_h"), "ell_h")};
  }
  try {
    return ModelSpec(std::move(psi), std::move(h), matrix_from_json(j["Sigma"], "Sigma"),
                     matrix_from_json(j["Gamma"], "Gamma"), vector_from_json(j["m0"], "m0"),
                     matrix_from_json(j["S0"], "S0"), bounds);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDimensionMismatch) throw Error(ErrorCode::kConfig, e.what());
    throw;
  }
}

}  // namespace meanfield
