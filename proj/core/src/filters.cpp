#include "meanfield/filters.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <spdlog/spdlog.h>

#include "meanfield/error.hpp"

namespace meanfield {

namespace {

struct KindName {
  FilterKind kind;
  std::string_view name;
};

constexpr KindName kKindNames[] = {
    {FilterKind::kTrue, "true"},          {FilterKind::kEnkfMeanField, "enkf_mf"},
    {FilterKind::kGpfBG, "gpf_bg"},       {FilterKind::kGpfGT, "gpf_gt"},
    {FilterKind::kEnkfParticles, "enkf_N"}, {FilterKind::kKalman, "kalman"},
};

Matrix cholesky_lower(const Matrix& cov) { return factorize_spd(cov).llt.matrixL(); }

Vector draw(const Matrix& lower, NormalSampler& normal, Rng& rng) {
  Vector z(lower.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  return lower * z;
}

void require_grid_model(const ModelSpec& model) {
  if (model.d() > 2 || model.K() != 1) {
    throw Error(ErrorCode::kInvalidArgument, "grid filters support d in {1, 2} and K = 1 only");
  }
}

// Running box: per-axis min/max over a set of mean +/- 6 sd intervals.
struct Box {
  Vector lo;
  Vector hi;

  explicit Box(int n)
      : lo(Vector::Constant(n, std::numeric_limits<double>::infinity())),
        hi(Vector::Constant(n, -std::numeric_limits<double>::infinity())) {}

  void cover(const Vector& mean, const Vector& sd) {
    lo = lo.cwiseMin(mean - 6.0 * sd);
    hi = hi.cwiseMax(mean + 6.0 * sd);
  }

  void cover(const Moments& m) { cover(m.mean, m.cov.diagonal().cwiseMax(0.0).cwiseSqrt()); }

  void pad(double fraction) {
    const Vector margin = fraction * (hi - lo);
    lo -= margin;
    hi += margin;
  }
};

Moments weighted_moments(const Matrix& rows, const Vector& w) {
  Moments m;
  m.mean = rows.transpose() * w;
  const Matrix centred = rows.rowwise() - m.mean.transpose();
  m.cov = centred.transpose() * w.asDiagonal() * centred;
  return m;
}

Moments sample_moments(const Matrix& rows) {
  return weighted_moments(rows, Vector::Constant(rows.rows(), 1.0 / static_cast<double>(rows.rows())));
}

Matrix propagate(const Matrix& particles, const MapSpec& map, const Matrix& noise_lower, NormalSampler& normal,
                 Rng& rng) {
  Matrix out(particles.rows(), map.out_dim());
  for (Eigen::Index i = 0; i < particles.rows(); ++i) {
    out.row(i) = (map(particles.row(i).transpose()) + draw(noise_lower, normal, rng)).transpose();
  }
  return out;
}

// Bootstrap particle filter and particle EnKF run side by side on the data;
// their predicted and filtered laws decide the grid boxes.
void prepass(const ModelSpec& model, const FilterTrajectory& data, const GridConfig& config, Box& state,
             Box& obs) {
  const int n = std::max(config.prepass_particles, 64);
  Rng rng(config.prepass_seed);
  NormalSampler normal;
  const Matrix l_sigma = cholesky_lower(model.sigma());
  const Matrix l_gamma = cholesky_lower(model.gamma());
  const Matrix prior = sample(GaussianMeasure(model.m0(), model.s0()), rng, n);
  Matrix boot = prior;
  Matrix enkf = prior;
  const GaussianMeasure noise(Vector::Zero(model.K()), model.gamma());

  for (int j = 0; j < data.steps(); ++j) {
    const Vector& y = data.data[static_cast<std::size_t>(j)];

    const Matrix boot_u = propagate(boot, model.psi(), l_sigma, normal, rng);
    const Matrix boot_y = propagate(boot_u, model.h(), l_gamma, normal, rng);
    state.cover(sample_moments(boot_u));
    obs.cover(sample_moments(boot_y));

    Vector logw(n);
    for (int i = 0; i < n; ++i) logw[i] = log_density_at(noise, y - model.h()(boot_u.row(i).transpose()));
    Vector w = (logw.array() - logw.maxCoeff()).exp();
    w /= w.sum();
    state.cover(weighted_moments(boot_u, w));
    // Systematic resampling.
    std::uniform_real_distribution<double> uniform(0.0, 1.0 / n);
    const double start = uniform(rng);
    double cumulative = w[0];
    int source = 0;
    for (int i = 0; i < n; ++i) {
      const double target = start + static_cast<double>(i) / n;
      while (cumulative < target && source < n - 1) cumulative += w[++source];
      boot.row(i) = boot_u.row(source);
    }

    const Matrix enkf_u = propagate(enkf, model.psi(), l_sigma, normal, rng);
    const Matrix enkf_y = propagate(enkf_u, model.h(), l_gamma, normal, rng);
    state.cover(sample_moments(enkf_u));
    obs.cover(sample_moments(enkf_y));
    Matrix joint(n, model.d() + model.K());
    joint << enkf_u, enkf_y;
    const Moments jm = sample_moments(joint);
    const BlockStructure b(model.d(), model.K());
    const Matrix gain = factorize_spd(jm.cov_yy(b)).solve(Matrix(jm.cov_uy(b).transpose())).transpose();
    for (int i = 0; i < n; ++i) {
      enkf.row(i) = (enkf_u.row(i).transpose() + gain * (y - enkf_y.row(i).transpose())).transpose();
    }
    state.cover(sample_moments(enkf));
  }
}

void check_box(const Vector& lo, const Vector& hi, int n, const char* what) {
  if (lo.size() != n || hi.size() != n) throw Error(ErrorCode::kDimensionMismatch, std::string(what) + " box dimension");
  if (!(lo.array() < hi.array()).all()) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " box needs lo < hi");
}

GridDensity on_grid(const FilterMeasure& m, const std::shared_ptr<const Grid>& grid) {
  if (const auto* g = std::get_if<GridDensity>(&m)) return *g;
  if (const auto* g = std::get_if<GaussianMeasure>(&m)) return from_gaussian(*g, grid);
  throw Error(ErrorCode::kInvalidArgument, "particle ensembles have no grid density");
}

struct Advance {
  FilterMeasure next;
  std::optional<double> eps;
};

Advance advance_grid(FilterKind kind, const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws,
                     const Vector& y) {
  const GridDensity joint = lift(predict(mu, model, ws), model, ws);
  const double eps = lifted_epsilon(joint);
  if (kind == FilterKind::kTrue) return {bayes(joint, y), eps};
  return {transport(joint, y), eps};
}

GaussianMeasure analyse_gaussian(const GridDensity& joint, const BlockStructure& b, const Vector& y, GpfForm form) {
  if (form == GpfForm::kBG) return condition(gaussian_projection(joint), b, y);
  return gaussian_projection(transport(joint, y));
}

Advance advance_gpf(const GaussianMeasure& mu, const ModelSpec& model, const OperatorWorkspace& ws, const Vector& y,
                    GpfForm form) {
  const GridDensity joint = lift(predict(from_gaussian(mu, ws.state_grid()), model, ws), model, ws);
  return {analyse_gaussian(joint, ws.blocks(), y, form), lifted_epsilon(joint)};
}

}  // namespace

std::string_view to_string(FilterKind kind) {
  for (const auto& k : kKindNames) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

FilterKind filter_kind_from_string(std::string_view name) {
  for (const auto& k : kKindNames) {
    if (k.name == name) return k.kind;
  }
  throw Error(ErrorCode::kConfig, "unknown filter kind '" + std::string(name) + "'");
}

bool is_grid_kind(FilterKind kind) {
  return kind == FilterKind::kTrue || kind == FilterKind::kEnkfMeanField || kind == FilterKind::kGpfBG ||
         kind == FilterKind::kGpfGT;
}

Ensemble::Ensemble(Matrix particles) : particles_(std::move(particles)) {
  if (particles_.rows() < 2) throw Error(ErrorCode::kInvalidArgument, "an ensemble needs at least two particles");
  if (particles_.cols() < 1) throw Error(ErrorCode::kInvalidArgument, "ensemble dimension must be positive");
  if (!particles_.allFinite()) throw Error(ErrorCode::kInvalidArgument, "ensemble has non-finite entries");
}

Moments moments(const Ensemble& ens) {
  const Matrix& p = ens.particles();
  Moments m;
  m.mean = p.colwise().mean().transpose();
  const Matrix centred = p.rowwise() - m.mean.transpose();
  m.cov = symmetrized(centred.transpose() * centred / static_cast<double>(p.rows() - 1));
  return m;
}

Moments measure_moments(const FilterMeasure& m) {
  return std::visit(
      [](const auto& x) -> Moments {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, GaussianMeasure>) {
          return {x.mean(), x.cov()};
        } else {
          return moments(x);
        }
      },
      m);
}

FilterTrajectory generate_data(const ModelSpec& model, int steps, std::uint64_t seed) {
  if (steps < 0) throw Error(ErrorCode::kInvalidArgument, "number of steps must be nonnegative");
  SeedStream seeds(seed);
  Rng rng = seeds.next_rng();
  NormalSampler normal;
  const Matrix l0 = cholesky_lower(model.s0());
  const Matrix l_sigma = cholesky_lower(model.sigma());
  const Matrix l_gamma = cholesky_lower(model.gamma());

  FilterTrajectory t;
  Vector u = model.m0() + draw(l0, normal, rng);
  t.states.push_back(u);
  for (int j = 0; j < steps; ++j) {
    u = model.psi()(u) + draw(l_sigma, normal, rng);
    t.states.push_back(u);
    t.data.push_back(model.h()(u) + draw(l_gamma, normal, rng));
  }
  for (const Vector& y : t.data) t.kappa_y = std::max(t.kappa_y, y.norm());
  return t;
}

FilterTrajectory trajectory_from_data(std::vector<Vector> data) {
  FilterTrajectory t;
  t.data = std::move(data);
  for (const Vector& y : t.data) {
    if (!y.allFinite()) throw Error(ErrorCode::kInvalidArgument, "data contain non-finite values");
    t.kappa_y = std::max(t.kappa_y, y.norm());
  }
  return t;
}

GridDensity step_true(const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws,
                      const Vector& y_dagger) {
  return bayes(lift(predict(mu, model, ws), model, ws), y_dagger);
}

GridDensity step_enkf_meanfield(const GridDensity& mu, const ModelSpec& model, const OperatorWorkspace& ws,
                                const Vector& y_dagger) {
  return transport(lift(predict(mu, model, ws), model, ws), y_dagger);
}

GaussianMeasure step_gpf(const GaussianMeasure& mu, const ModelSpec& model, const OperatorWorkspace& ws,
                         const Vector& y_dagger, GpfForm form) {
  return std::get<GaussianMeasure>(advance_gpf(mu, model, ws, y_dagger, form).next);
}

Ensemble step_enkf_particles(const Ensemble& ens, const ModelSpec& model, const Vector& y_dagger,
                             std::uint64_t seed) {
  const int n = ens.size();
  const int d = model.d();
  const int k = model.K();
  if (ens.dim() != d) throw Error(ErrorCode::kDimensionMismatch, "ensemble dimension does not match the model");
  if (y_dagger.size() != k) throw Error(ErrorCode::kDimensionMismatch, "datum dimension does not match K");
  if (n < d + k + 1) {
    spdlog::warn("enkf_N: {} particles is below d + K + 1 = {}; the empirical covariance is rank deficient", n,
                 d + k + 1);
  }
  Rng rng(seed);
  NormalSampler normal;
  const Matrix l_sigma = cholesky_lower(model.sigma());
  const Matrix l_gamma = cholesky_lower(model.gamma());

  Matrix joint(n, d + k);
  for (int i = 0; i < n; ++i) {
    const Vector u = model.psi()(ens.particles().row(i).transpose()) + draw(l_sigma, normal, rng);
    const Vector y = model.h()(u) + draw(l_gamma, normal, rng);
    joint.row(i).head(d) = u.transpose();
    joint.row(i).tail(k) = y.transpose();
  }
  const BlockStructure b(d, k);
  const Moments m = moments(Ensemble(joint));
  Matrix c_yy = m.cov_yy(b);
  c_yy.diagonal().array() += 1e-10 * c_yy.trace() / k;
  const Matrix gain = factorize_spd(c_yy).solve(Matrix(m.cov_uy(b).transpose())).transpose();

  Matrix out(n, d);
  for (int i = 0; i < n; ++i) {
    out.row(i) = (joint.row(i).head(d).transpose() + gain * (y_dagger - joint.row(i).tail(k).transpose())).transpose();
  }
  return Ensemble(std::move(out));
}

std::vector<GaussianMeasure> kalman_analytic(const ModelSpec& model, const FilterTrajectory& data) {
  const auto lin = model.linear_matrices();
  if (!lin) throw Error(ErrorCode::kModelNotLinear, "the Kalman recursion needs affine Psi and H");
  std::vector<GaussianMeasure> out;
  out.emplace_back(model.m0(), model.s0());
  Vector m = model.m0();
  Matrix p = model.s0();
  for (const Vector& y : data.data) {
    const Vector m_pred = lin->psi(m);
    const Matrix p_pred = lin->psi.matrix * p * lin->psi.matrix.transpose() + model.sigma();
    const Matrix& c = lin->h.matrix;
    const Matrix s = c * p_pred * c.transpose() + model.gamma();
    const Matrix gain = factorize_spd(s).solve(Matrix(c * p_pred)).transpose();
    m = m_pred + gain * (y - lin->h(m_pred));
    p = symmetrized(p_pred - gain * s * gain.transpose());
    out.emplace_back(m, p);
  }
  return out;
}

FilterGrids select_grids(const ModelSpec& model, const FilterTrajectory& data, const GridConfig& config) {
  require_grid_model(model);
  const int d = model.d();
  const int k = model.K();
  Box state(d);
  Box obs(k);
  state.cover(Moments{model.m0(), model.s0()});
  const Vector noise_sd = model.gamma().diagonal().cwiseSqrt();
  for (const Vector& y : data.data) obs.cover(y, noise_sd);
  prepass(model, data, config, state, obs);
  if (data.data.empty()) {
    // No data: still give the data axes a sensible extent around H(m0).
    obs.cover(model.h()(model.m0()), noise_sd + model.s0().diagonal().cwiseSqrt());
  }
  state.pad(0.1);
  obs.pad(0.1);

  Vector s_lo = config.state_lo.value_or(state.lo);
  Vector s_hi = config.state_hi.value_or(state.hi);
  Vector y_lo = config.data_lo.value_or(obs.lo);
  Vector y_hi = config.data_hi.value_or(obs.hi);
  check_box(s_lo, s_hi, d, "state");
  check_box(y_lo, y_hi, k, "data");

  const int state_nodes = config.state_nodes.value_or(default_resolution(d));
  const int data_nodes = config.data_nodes.value_or(default_resolution(d + k));
  std::vector<Axis> axes;
  for (int a = 0; a < d; ++a) axes.push_back(Axis{s_lo[a], s_hi[a], state_nodes});
  FilterGrids grids;
  grids.state = Grid::make(axes);
  for (int a = 0; a < k; ++a) axes.push_back(Axis{y_lo[a], y_hi[a], data_nodes});
  grids.joint = Grid::make(std::move(axes));
  return grids;
}

FilterTrajectory run_filter(FilterKind kind, const ModelSpec& model, const FilterTrajectory& data,
                            const FilterConfig& config, const OperatorWorkspace* ws) {
  FilterTrajectory out;
  out.data = data.data;
  out.states = data.states;
  out.kappa_y = data.kappa_y;
  out.kind = kind;
  for (const Vector& y : data.data) {
    if (y.size() != model.K()) throw Error(ErrorCode::kDimensionMismatch, "datum dimension does not match K");
  }

  auto record = [&](int step, std::optional<double> eps) {
    out.records.push_back(StepRecord{step, measure_moments(out.measures.back()), eps, std::nullopt});
  };

  if (kind == FilterKind::kKalman) {
    for (auto& g : kalman_analytic(model, data)) {
      out.measures.emplace_back(std::move(g));
      record(static_cast<int>(out.measures.size()) - 1, std::nullopt);
    }
    return out;
  }

  if (kind == FilterKind::kEnkfParticles) {
    SeedStream seeds(config.seed);
    Rng rng = seeds.next_rng();
    out.measures.emplace_back(Ensemble(sample(GaussianMeasure(model.m0(), model.s0()), rng, config.ensemble_size)));
    record(0, std::nullopt);
    for (int j = 0; j < data.steps(); ++j) {
      try {
        Ensemble next = step_enkf_particles(std::get<Ensemble>(out.measures.back()), model,
                                            data.data[static_cast<std::size_t>(j)], seeds.next());
        out.measures.emplace_back(std::move(next));
      } catch (const Error& e) {
        throw e.with_step(j + 1);
      }
      record(j + 1, std::nullopt);
    }
    return out;
  }

  require_grid_model(model);
  if (ws == nullptr) throw Error(ErrorCode::kInvalidArgument, "grid filters need an operator workspace");
  const GaussianMeasure prior(model.m0(), model.s0());
  if (kind == FilterKind::kGpfBG || kind == FilterKind::kGpfGT) {
    out.measures.emplace_back(prior);
  } else {
    try {
      out.measures.emplace_back(from_gaussian(prior, ws->state_grid()));
    } catch (const Error& e) {
      throw e.with_step(0);
    }
  }
  record(0, std::nullopt);

  const GpfForm form = kind == FilterKind::kGpfBG ? GpfForm::kBG : GpfForm::kGT;
  for (int j = 0; j < data.steps(); ++j) {
    const Vector& y = data.data[static_cast<std::size_t>(j)];
    Advance step{out.measures.back(), std::nullopt};
    try {
      if (const auto* g = std::get_if<GaussianMeasure>(&out.measures.back())) {
        step = advance_gpf(*g, model, *ws, y, form);
      } else {
        step = advance_grid(kind, std::get<GridDensity>(out.measures.back()), model, *ws, y);
      }
    } catch (const Error& e) {
      throw e.with_step(j + 1);
    }
    out.measures.push_back(std::move(step.next));
    record(j + 1, step.eps);
  }
  return out;
}

const FilterTrajectory* FilterComparison::find(FilterKind kind) const {
  for (const auto& r : runs) {
    if (r.kind == kind) return &r;
  }
  return nullptr;
}

const PairDistance* FilterComparison::pair(FilterKind a, FilterKind b) const {
  for (const auto& p : pairs) {
    if ((p.a == a && p.b == b) || (p.a == b && p.b == a)) return &p;
  }
  return nullptr;
}

FilterComparison run_filters(const std::vector<FilterKind>& kinds, const ModelSpec& model,
                             const FilterTrajectory& data, const FilterConfig& config) {
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    for (std::size_t j = i + 1; j < kinds.size(); ++j) {
      if (kinds[i] == kinds[j]) throw Error(ErrorCode::kConfig, "filter kind listed twice");
    }
  }
  FilterComparison cmp;
  const AssumptionReport report = validate_assumptions(model);
  if (report.kappa_psi) cmp.lipschitz_p = 1.0 + *report.kappa_psi * *report.kappa_psi + model.sigma().trace();
  if (report.kappa_h) cmp.lipschitz_q = 1.0 + *report.kappa_h * *report.kappa_h + model.gamma().trace();

  const bool need_grid = std::any_of(kinds.begin(), kinds.end(), is_grid_kind);
  std::optional<OperatorWorkspace> ws;
  if (need_grid) {
    cmp.grids = select_grids(model, data, config.grid);
    ws.emplace(model, cmp.grids->state, cmp.grids->joint);
  }
  for (FilterKind kind : kinds) {
    cmp.runs.push_back(run_filter(kind, model, data, config, ws ? &*ws : nullptr));
  }
  if (!cmp.grids) return cmp;

  // Gridded copies of every non-particle run, one per step.
  std::vector<std::vector<GridDensity>> gridded(cmp.runs.size());
  for (std::size_t r = 0; r < cmp.runs.size(); ++r) {
    if (cmp.runs[r].kind == FilterKind::kEnkfParticles) continue;
    for (std::size_t j = 0; j < cmp.runs[r].measures.size(); ++j) {
      try {
        gridded[r].push_back(on_grid(cmp.runs[r].measures[j], cmp.grids->state));
      } catch (const Error& e) {
        throw e.with_step(static_cast<int>(j));
      }
    }
  }
  for (std::size_t a = 0; a < cmp.runs.size(); ++a) {
    for (std::size_t b = a + 1; b < cmp.runs.size(); ++b) {
      if (gridded[a].empty() || gridded[b].empty()) continue;
      PairDistance p{*cmp.runs[a].kind, *cmp.runs[b].kind, {}, 0.0};
      for (std::size_t j = 0; j < gridded[a].size(); ++j) {
        p.per_step.push_back(dg_distance(gridded[a][j], gridded[b][j]));
        p.max = std::max(p.max, p.per_step.back());
      }
      cmp.pairs.push_back(std::move(p));
    }
  }
  if (cmp.find(FilterKind::kTrue) == nullptr) return cmp;
  for (auto& run : cmp.runs) {
    if (run.kind == FilterKind::kTrue) {
      for (auto& rec : run.records) rec.dg_to_true = 0.0;
      continue;
    }
    const PairDistance* p = cmp.pair(*run.kind, FilterKind::kTrue);
    if (p == nullptr) continue;
    for (std::size_t j = 0; j < run.records.size(); ++j) run.records[j].dg_to_true = p->per_step[j];
  }
  return cmp;
}

}  // namespace meanfield
