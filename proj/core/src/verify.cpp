#include "meanfield/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/QR>

#include "meanfield/error.hpp"
#include "meanfield/operators.hpp"

namespace meanfield {

namespace {

// Accumulates the smallest slack over the cases of one property.
class Check {
 public:
  Check(std::string suite, std::string name) : suite_(std::move(suite)), name_(std::move(name)) {}

  void slack(double s, const std::string& where) {
    ++cases_;
    if (!(s >= margin_)) {  // also catches NaN
      margin_ = s;
      worst_ = where;
    }
  }

  PropertyResult done() const {
    PropertyResult r;
    r.suite = suite_;
    r.name = name_;
    r.cases = cases_;
    r.margin = cases_ == 0 ? 0.0 : margin_;
    r.passed = cases_ > 0 && margin_ >= 0.0;
    r.detail = worst_.empty() ? "" : "tightest case: " + worst_;
    return r;
  }

 private:
  std::string suite_;
  std::string name_;
  int cases_ = 0;
  double margin_ = std::numeric_limits<double>::infinity();
  std::string worst_;
};

template <class F>
void guarded(std::vector<PropertyResult>& out, const std::string& suite, const std::string& name, F&& body) {
  try {
    body(out);
  } catch (const std::exception& e) {
    PropertyResult r;
    r.suite = suite;
    r.name = name;
    r.passed = false;
    r.margin = -std::numeric_limits<double>::infinity();
    r.detail = std::string("exception: ") + e.what();
    out.push_back(std::move(r));
  }
}

std::string fmt_case(int i, double value, double bound) {
  std::ostringstream s;
  s.precision(6);
  s << "case " << i << ": value " << value << " vs bound " << bound;
  return s.str();
}

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

double spectral_norm(const Matrix& sym) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sym), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::shared_ptr<const Grid> covering_grid(const std::vector<const GaussianMeasure*>& gs, int nodes, double width) {
  const int n = gs.front()->dim();
  Vector lo = Vector::Constant(n, std::numeric_limits<double>::infinity());
  Vector hi = -lo;
  for (const GaussianMeasure* g : gs) {
    const Vector sd = g->cov().diagonal().cwiseSqrt();
    lo = lo.cwiseMin(g->mean() - width * sd);
    hi = hi.cwiseMax(g->mean() + width * sd);
  }
  return make_box_grid(lo, hi, nodes);
}

// Random d = K = 1 joint with eigenvalues in [0.3, 3] and |correlation| <= 0.9.
GaussianMeasure random_joint(Rng& rng) {
  for (;;) {
    GaussianMeasure g = random_gaussian(rng, 2, 1.0, 0.3, 3.0);
    const Matrix& c = g.cov();
    if (std::abs(c(0, 1)) <= 0.9 * std::sqrt(c(0, 0) * c(1, 1))) return g;
  }
}

// Joint grid whose state axis has `state_nodes` and data axis `data_nodes`,
// covering mean +/- 8 sd on both axes.
std::shared_ptr<const Grid> joint_grid_for(const GaussianMeasure& g, int state_nodes, int data_nodes) {
  const Vector sd = g.cov().diagonal().cwiseSqrt();
  const Vector lo = g.mean() - 8.0 * sd;
  const Vector hi = g.mean() + 8.0 * sd;
  const int nodes[] = {state_nodes, data_nodes};
  return make_box_grid(lo, hi, nodes);
}

GridDensity mixture(std::shared_ptr<const Grid> grid, const std::vector<GaussianMeasure>& parts,
                    const std::vector<double>& weights, std::optional<BlockStructure> blocks = std::nullopt) {
  std::vector<double> v(grid->cells(), 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vector x = grid->point(i);
    for (std::size_t c = 0; c < parts.size(); ++c) v[i] += weights[c] * density_at(parts[c], x);
  }
  return GridDensity::from_values(std::move(grid), std::move(v), blocks);
}

// ------------------------------------------------------------------ gaussian

void gaussian_suite(std::vector<PropertyResult>& out, const VerifyOptions& opt) {
  const std::string s = "gaussian";
  Rng rng(opt.seed);
  const ConditionFn cond = opt.condition ? opt.condition : ConditionFn(condition);

  guarded(out, s, "density_normalization", [&](auto& o) {
    Check c(s, "density_normalization");
    const GaussianMeasure g(Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 4.0));
    auto grid = make_box_grid(Vector::Constant(1, -19.0), Vector::Constant(1, 21.0), 4001);
    std::vector<double> v(grid->cells());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = density_at(g, grid->point(i));
    const double mass = integrate(*grid, v);
    c.slack(1e-9 - std::abs(mass - 1.0), fmt_case(0, mass, 1.0));
    o.push_back(c.done());
  });

  guarded(out, s, "conditioning_vs_grid_bayes", [&](auto& o) {
    Check c(s, "conditioning_vs_grid_bayes");
    const BlockStructure b(1, 1);
    for (int i = 0; i < 20; ++i) {
      const GaussianMeasure joint = random_joint(rng);
      const Vector y = Vector::Constant(1, uniform(rng, -2.0, 2.0));
      const GaussianMeasure exact = cond(joint, b, y);
      const GridDensity grid = from_gaussian(joint, joint_grid_for(joint, 256, 256), b);
      const Moments m = moments(bayes(grid, y));
      const double err = std::max((m.mean - exact.mean()).cwiseAbs().maxCoeff(),
                                  (m.cov - exact.cov()).cwiseAbs().maxCoeff());
      c.slack(1e-4 - err, fmt_case(i, err, 1e-4));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "schur_complement_positive", [&](auto& o) {
    Check c(s, "schur_complement_positive");
    for (int i = 0; i < 100; ++i) {
      const int d = 1 + i % 2;
      const GaussianMeasure joint = random_gaussian(rng, d + 1, 1.0, 0.3, 3.0);
      const GaussianMeasure post = cond(joint, BlockStructure(d, 1), Vector::Constant(1, uniform(rng, -2, 2)));
      factorize_spd(post.cov());
      c.slack(min_eigenvalue(post.cov()), fmt_case(i, min_eigenvalue(post.cov()), 0.0));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "kl_nonnegative", [&](auto& o) {
    Check c(s, "kl_nonnegative");
    for (int i = 0; i < 100; ++i) {
      const int n = 1 + i % 2;
      const GaussianMeasure a = random_gaussian(rng, n, 1.0, 0.3, 3.0);
      const GaussianMeasure b = random_gaussian(rng, n, 1.0, 0.3, 3.0);
      const double kl = kl_divergence(a, b);
      const double self = kl_divergence(a, a);
      c.slack(std::min(kl, 1e-12 - std::abs(self)), fmt_case(i, kl, 0.0));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "kl_closed_form_vs_quadrature", [&](auto& o) {
    Check c(s, "kl_closed_form_vs_quadrature");
    for (int i = 0; i < 20; ++i) {
      const GaussianMeasure a = random_gaussian(rng, 1, 1.0, 0.3, 3.0);
      const GaussianMeasure b = random_gaussian(rng, 1, 1.0, 0.3, 3.0);
      auto grid = covering_grid({&a, &b}, 4096, 10.0);
      const double quad = kl_divergence(from_gaussian(a, grid), from_gaussian(b, grid));
      const double exact = kl_divergence(a, b);
      c.slack(1e-6 - std::abs(quad - exact), fmt_case(i, quad, exact));
    }
    o.push_back(c.done());
  });

  // Random pairs for the d_g bound and the weighted Pinsker inequality,
  // half one-dimensional and half two-dimensional.
  Check bound(s, "dg_upper_bound");
  Check forward(s, "pinsker_kl_forward");
  Check reverse(s, "pinsker_kl_reverse");
  guarded(out, s, "dg_upper_bound", [&](auto&) {
    for (int i = 0; i < 100; ++i) {
      const int n = i < 50 ? 1 : 2;
      const GaussianMeasure a = random_gaussian(rng, n, 1.0, 0.3, 3.0);
      const GaussianMeasure b = random_gaussian(rng, n, 1.0, 0.3, 3.0);
      auto grid = covering_grid({&a, &b}, n == 1 ? 2048 : 192, 8.0);
      const GridDensity ga = from_gaussian(a, grid);
      const GridDensity gb = from_gaussian(b, grid);
      const double dg = dg_distance(ga, gb);
      const double ub = dg_upper_bound(a, b);
      bound.slack(ub - dg, fmt_case(i, dg, ub));
      const double coef = 2.0 * (g2_expectation(a) + g2_expectation(b));
      const double rhs_f = coef * kl_divergence(ga, gb);
      const double rhs_r = coef * kl_divergence(gb, ga);
      forward.slack(rhs_f - dg * dg, fmt_case(i, dg * dg, rhs_f));
      reverse.slack(rhs_r - dg * dg, fmt_case(i, dg * dg, rhs_r));
    }
  });
  out.push_back(bound.done());
  out.push_back(forward.done());
  out.push_back(reverse.done());
}

// ------------------------------------------------------------------ density

void density_suite(std::vector<PropertyResult>& out, const VerifyOptions& opt) {
  const std::string s = "density";
  Rng rng(opt.seed + 1);
  auto line = make_box_grid(Vector::Constant(1, -16.0), Vector::Constant(1, 16.0), 1024);
  auto plane = make_box_grid(Vector::Constant(2, -10.0), Vector::Constant(2, 10.0), 128);

  guarded(out, s, "moment_difference", [&](auto& o) {
    Check mean(s, "moment_difference_mean");
    Check cov(s, "moment_difference_cov");
    for (int i = 0; i < 100; ++i) {
      auto grid = i < 70 ? line : plane;
      const GridDensity a = random_mixture(rng, grid, 1 + i % 3, 2.0, 0.2, 2.0);
      const GridDensity b = random_mixture(rng, grid, 1 + (i / 3) % 3, 2.0, 0.2, 2.0);
      const Moments ma = moments(a);
      const Moments mb = moments(b);
      const double dg = dg_distance(a, b);
      const double dm = (ma.mean - mb.mean).norm();
      const double dc = spectral_norm(ma.cov - mb.cov);
      mean.slack(0.5 * dg + 1e-6 - dm, fmt_case(i, dm, 0.5 * dg));
      const double cb = (1.0 + 0.5 * (ma.mean + mb.mean).norm()) * dg;
      cov.slack(cb + 1e-6 - dc, fmt_case(i, dc, cb));
    }
    o.push_back(mean.done());
    o.push_back(cov.done());
  });

  guarded(out, s, "dg_metric_axioms", [&](auto& o) {
    Check c(s, "dg_metric_axioms");
    for (int i = 0; i < 50; ++i) {
      const GridDensity a = random_mixture(rng, line, 2, 2.0, 0.2, 2.0);
      const GridDensity b = random_mixture(rng, line, 2, 2.0, 0.2, 2.0);
      const GridDensity e = random_mixture(rng, line, 2, 2.0, 0.2, 2.0);
      const double ab = dg_distance(a, b);
      const double be = dg_distance(b, e);
      const double ae = dg_distance(a, e);
      const double symmetry = ab == dg_distance(b, a) ? 0.0 : -1.0;
      const double identity = dg_distance(a, a) == 0.0 && ab > 0.0 ? 0.0 : -1.0;
      const double triangle = ab + be - ae + 1e-12 * (ab + be);
      c.slack(std::min({symmetry, identity, triangle}), fmt_case(i, ae, ab + be));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "dg_dominates_tv", [&](auto& o) {
    Check c(s, "dg_dominates_tv");
    for (int i = 0; i < 50; ++i) {
      const GridDensity a = random_mixture(rng, line, 2, 2.0, 0.2, 2.0);
      const GridDensity b = random_mixture(rng, line, 2, 2.0, 0.2, 2.0);
      const double dg = dg_distance(a, b);
      const double tv = tv_distance(a, b);
      c.slack(dg - tv, fmt_case(i, tv, dg));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "projection_idempotent", [&](auto& o) {
    Check c(s, "projection_idempotent");
    for (int i = 0; i < 20; ++i) {
      const GridDensity mu = random_mixture(rng, line, 2, 1.5, 0.2, 1.0);
      const GaussianMeasure g = gaussian_projection(mu);
      const GaussianMeasure g2 = gaussian_projection(from_gaussian(g, line));
      const double err = std::max((g.mean() - g2.mean()).cwiseAbs().maxCoeff(),
                                  (g.cov() - g2.cov()).cwiseAbs().maxCoeff());
      c.slack(1e-6 - err, fmt_case(i, err, 1e-6));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "kl_minimizer", [&](auto& o) {
    Check c(s, "kl_minimizer");
    for (int i = 0; i < 20; ++i) {
      const GridDensity mu = random_mixture(rng, line, 2, 1.5, 0.2, 1.0);
      const GaussianMeasure g = gaussian_projection(mu);
      const double best = kl_divergence(mu, from_gaussian(g, line));
      const double sd = std::sqrt(g.cov()(0, 0));
      for (int k = 0; k < 20; ++k) {
        const Vector m = g.mean() + Vector::Constant(1, uniform(rng, -0.2, 0.2) * sd);
        const Matrix cv = g.cov() * (1.0 + uniform(rng, -0.2, 0.2));
        const double kl = kl_divergence(mu, from_gaussian(GaussianMeasure(m, cv), line));
        c.slack(kl - best + 1e-10, fmt_case(20 * i + k, kl, best));
      }
    }
    o.push_back(c.done());
  });

  guarded(out, s, "gaussian_roundtrip", [&](auto& o) {
    Check c(s, "gaussian_roundtrip");
    for (int i = 0; i < 20; ++i) {
      const int n = 1 + i % 2;
      const GaussianMeasure g = random_gaussian(rng, n, 1.0, 0.3, 2.0);
      const Moments m = moments(from_gaussian(g, n == 1 ? line : plane));
      const double err = std::max((m.mean - g.mean()).cwiseAbs().maxCoeff(),
                                  (m.cov - g.cov()).cwiseAbs().maxCoeff());
      c.slack(1e-6 - err, fmt_case(i, err, 1e-6));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "marginal_mass", [&](auto& o) {
    Check c(s, "marginal_mass");
    for (int i = 0; i < 10; ++i) {
      const std::vector<GaussianMeasure> parts = {random_gaussian(rng, 2, 2.0, 0.2, 2.0),
                                                  random_gaussian(rng, 2, 2.0, 0.2, 2.0)};
      const GridDensity joint = mixture(plane, parts, {0.5, 0.5}, BlockStructure(1, 1));
      const double mass = marginal_u(joint).mass();
      c.slack(1e-8 - std::abs(mass - 1.0), fmt_case(i, mass, 1.0));
    }
    o.push_back(c.done());
  });
}

// ------------------------------------------------------------------ operators

struct OperatorBench {
  ModelSpec model = bounded_reference_model(1);
  std::shared_ptr<const Grid> state;
  std::shared_ptr<const Grid> joint;
  std::unique_ptr<OperatorWorkspace> ws;

  explicit OperatorBench(int state_nodes) {
    state = make_box_grid(Vector::Constant(1, -8.0), Vector::Constant(1, 8.0), state_nodes);
    joint = Grid::make({state->axis(0), Axis{-6.0, 6.0, default_resolution(2)}});
    ws = std::make_unique<OperatorWorkspace>(model, state, joint);
  }
};

void operators_suite(std::vector<PropertyResult>& out, const VerifyOptions& opt) {
  const std::string s = "operators";
  Rng rng(opt.seed + 2);
  const OperatorBench bench(opt.resolution.value_or(default_resolution(1)));
  const ModelSpec& model = bench.model;
  const OperatorWorkspace& ws = *bench.ws;
  const double kappa_psi = model.declared_bounds()->kappa_psi;
  const double kappa_h = model.declared_bounds()->kappa_h;
  const double l_p = 1.0 + kappa_psi * kappa_psi + model.sigma().trace();
  const double l_q = 1.0 + kappa_h * kappa_h + model.gamma().trace();
  auto random_mu = [&]() { return random_mixture(rng, bench.state, 1 + static_cast<int>(rng() % 3), 3.0, 0.1, 1.5); };

  guarded(out, s, "lipschitz_p_q", [&](auto& o) {
    Check p(s, "lipschitz_p");
    Check q(s, "lipschitz_q");
    for (int i = 0; i < 50; ++i) {
      const GridDensity a = random_mu();
      const GridDensity b = random_mu();
      const double d = dg_distance(a, b);
      const double dp = dg_distance(predict(a, model, ws), predict(b, model, ws));
      const double dq = dg_distance(lift(a, model, ws), lift(b, model, ws));
      p.slack(l_p * d + 1e-3 - dp, fmt_case(i, dp, l_p * d));
      q.slack(l_q * d + 1e-3 - dq, fmt_case(i, dq, l_q * d));
    }
    o.push_back(p.done());
    o.push_back(q.done());
  });

  guarded(out, s, "linearity", [&](auto& o) {
    Check c(s, "linearity_p_q");
    for (int i = 0; i < 10; ++i) {
      const GridDensity a = random_mu();
      const GridDensity b = random_mu();
      const double alpha = uniform(rng, 0.1, 0.9);
      std::vector<double> mix(a.values().size());
      for (std::size_t k = 0; k < mix.size(); ++k) mix[k] = alpha * a.values()[k] + (1 - alpha) * b.values()[k];
      const GridDensity ab = GridDensity::from_values(bench.state, mix);
      auto combine = [&](const GridDensity& x, const GridDensity& y) {
        std::vector<double> v(x.values().size());
        for (std::size_t k = 0; k < v.size(); ++k) v[k] = alpha * x.values()[k] + (1 - alpha) * y.values()[k];
        return GridDensity::from_values(x.grid_ptr(), std::move(v), x.blocks());
      };
      const double ep = dg_distance(predict(ab, model, ws), combine(predict(a, model, ws), predict(b, model, ws)));
      const double eq = dg_distance(lift(ab, model, ws), combine(lift(a, model, ws), lift(b, model, ws)));
      c.slack(1e-10 - std::max(ep, eq), fmt_case(i, std::max(ep, eq), 1e-10));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "moment_envelopes", [&](auto& o) {
    Check pm(s, "envelope_p_mean");
    Check pl(s, "envelope_p_cov_lower");
    Check pu(s, "envelope_p_cov_upper");
    Check qm(s, "envelope_qp_mean");
    Check ql(s, "envelope_qp_cov_lower");
    Check qu(s, "envelope_qp_cov_upper");
    const int d = model.d();
    const int k = model.K();
    const double sigma = model.sigma_min();
    const double gamma = model.gamma_min();
    const double lower = std::min(gamma * sigma / (2 * kappa_h * kappa_h + gamma), gamma / 2);
    Matrix upper = Matrix::Zero(d + k, d + k);
    upper.topLeftCorner(d, d) = 2 * kappa_psi * kappa_psi * Matrix::Identity(d, d) + 2 * model.sigma();
    upper.bottomRightCorner(k, k) = 2 * kappa_h * kappa_h * Matrix::Identity(k, k) + model.gamma();
    const Matrix p_upper = kappa_psi * kappa_psi * Matrix::Identity(d, d) + model.sigma();
    const double qp_mean = std::sqrt(kappa_psi * kappa_psi + kappa_h * kappa_h);
    for (int i = 0; i < 50; ++i) {
      const GridDensity pmu = predict(random_mu(), model, ws);
      const Moments mp = moments(pmu);
      const Moments mq = moments(lift(pmu, model, ws));
      pm.slack(kappa_psi + 1e-3 - mp.mean.norm(), fmt_case(i, mp.mean.norm(), kappa_psi));
      pl.slack(min_eigenvalue(mp.cov - model.sigma()) + 1e-3, fmt_case(i, min_eigenvalue(mp.cov), sigma));
      pu.slack(min_eigenvalue(p_upper - mp.cov) + 1e-3, fmt_case(i, mp.cov(0, 0), p_upper(0, 0)));
      qm.slack(qp_mean + 1e-3 - mq.mean.norm(), fmt_case(i, mq.mean.norm(), qp_mean));
      ql.slack(min_eigenvalue(mq.cov) - lower + 1e-3, fmt_case(i, min_eigenvalue(mq.cov), lower));
      qu.slack(min_eigenvalue(upper - mq.cov) + 1e-3, fmt_case(i, min_eigenvalue(upper - mq.cov), 0.0));
    }
    for (const Check* c : {&pm, &pl, &pu, &qm, &ql, &qu}) o.push_back(c->done());
  });

  guarded(out, s, "transport_equals_bayes_gaussian", [&](auto& o) {
    Check c(s, "transport_equals_bayes_gaussian");
    const BlockStructure b(1, 1);
    for (int i = 0; i < 50; ++i) {
      const GaussianMeasure g = random_joint(rng);
      const Vector y = Vector::Constant(1, uniform(rng, -2.0, 2.0));
      const GridDensity pi =
          from_gaussian(g, joint_grid_for(g, opt.resolution.value_or(default_resolution(1)), default_resolution(2)), b);
      const double dg = dg_distance(transport(pi, y), bayes(pi, y));
      c.slack(5e-3 - dg, fmt_case(i, dg, 5e-3));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "transport_differs_off_gaussian", [&](auto& o) {
    Check c(s, "transport_differs_off_gaussian");
    const std::vector<GaussianMeasure> parts = {
        GaussianMeasure(Vector::Constant(1, -2.0), Matrix::Constant(1, 1, 0.25)),
        GaussianMeasure(Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 0.25))};
    const GridDensity joint = lift(mixture(bench.state, parts, {0.5, 0.5}), model, ws);
    const Vector y = Vector::Constant(1, 0.5);
    const double dg = dg_distance(transport(joint, y), bayes(joint, y));
    c.slack(dg - 1e-2, fmt_case(0, dg, 1e-2));
    o.push_back(c.done());
  });

  guarded(out, s, "transport_mean", [&](auto& o) {
    Check c(s, "transport_mean");
    const BlockStructure b(1, 1);
    for (int i = 0; i < 20; ++i) {
      const GridDensity joint = lift(predict(random_mu(), model, ws), model, ws);
      const Vector y = Vector::Constant(1, uniform(rng, -1.5, 1.5));
      const Moments m = moments(joint);
      const Vector expect = m.mean_u(b) + kalman_gain(m, b) * (y - m.mean_y(b));
      const double err = (moments(transport(joint, y)).mean - expect).norm();
      c.slack(1e-3 - err, fmt_case(i, err, 1e-3));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "mass_conservation", [&](auto& o) {
    Check c(s, "mass_conservation");
    for (int i = 0; i < 10; ++i) {
      const GridDensity p = predict(random_mu(), model, ws);
      const GridDensity q = lift(p, model, ws);
      const Vector y = Vector::Constant(1, uniform(rng, -1.5, 1.5));
      for (const GridDensity* x : {&p, &q}) c.slack(1e-8 - std::abs(x->mass() - 1.0), fmt_case(i, x->mass(), 1.0));
      const GridDensity bq = bayes(q, y);
      const GridDensity tq = transport(q, y);
      c.slack(1e-8 - std::abs(bq.mass() - 1.0), fmt_case(i, bq.mass(), 1.0));
      c.slack(1e-8 - std::abs(tq.mass() - 1.0), fmt_case(i, tq.mass(), 1.0));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "bayes_continuity", [&](auto& o) {
    Check c(s, "bayes_continuity");
    for (int i = 0; i < 10; ++i) {
      const GridDensity q = lift(predict(random_mu(), model, ws), model, ws);
      const double y = uniform(rng, -1.5, 1.5);
      const double dg = dg_distance(bayes(q, Vector::Constant(1, y)), bayes(q, Vector::Constant(1, y + 1e-6)));
      c.slack(1e-4 - dg, fmt_case(i, dg, 1e-4));
    }
    o.push_back(c.done());
  });
}

// ------------------------------------------------------------------ filters

void filters_suite(std::vector<PropertyResult>& out, const VerifyOptions& opt) {
  const std::string s = "filters";
  FilterConfig config;
  config.grid.state_nodes = opt.resolution;
  config.seed = opt.seed;

  guarded(out, s, "linear_gaussian_collapse", [&](auto& o) {
    Check dg(s, "linear_gaussian_dg");
    Check mom(s, "linear_gaussian_moments");
    Check part(s, "linear_gaussian_particles");
    const ModelSpec model = linear_reference_model();
    const FilterTrajectory data = generate_data(model, 10, opt.seed);
    FilterConfig cfg = config;
    cfg.ensemble_size = 10000;
    const std::vector<FilterKind> kinds = {FilterKind::kTrue,  FilterKind::kEnkfMeanField, FilterKind::kGpfBG,
                                           FilterKind::kGpfGT, FilterKind::kEnkfParticles, FilterKind::kKalman};
    const FilterComparison cmp = run_filters(kinds, model, data, cfg);
    const FilterTrajectory& kalman = *cmp.find(FilterKind::kKalman);
    for (const auto& run : cmp.runs) {
      const std::string name(to_string(*run.kind));
      if (run.kind == FilterKind::kKalman) continue;
      if (run.kind == FilterKind::kEnkfParticles) {
        const double n = cfg.ensemble_size;
        for (std::size_t j = 0; j < run.records.size(); ++j) {
          const double var = kalman.records[j].moments.cov(0, 0);
          const double dm = std::abs(run.records[j].moments.mean[0] - kalman.records[j].moments.mean[0]);
          const double dv = std::abs(run.records[j].moments.cov(0, 0) - var);
          part.slack(5 * std::sqrt(var / n) - dm, name + " mean, step " + std::to_string(j));
          part.slack(5 * var * std::sqrt(2 / n) - dv, name + " var, step " + std::to_string(j));
        }
        continue;
      }
      const double max_dg = cmp.pair(*run.kind, FilterKind::kKalman)->max;
      dg.slack(1e-2 - max_dg, name + ": " + fmt_case(0, max_dg, 1e-2));
      for (std::size_t j = 0; j < run.records.size(); ++j) {
        const double err = std::max(
            (run.records[j].moments.mean - kalman.records[j].moments.mean).cwiseAbs().maxCoeff(),
            (run.records[j].moments.cov - kalman.records[j].moments.cov).cwiseAbs().maxCoeff());
        mom.slack(5e-3 - err, name + " step " + std::to_string(j) + ": " + fmt_case(0, err, 5e-3));
      }
    }
    o.push_back(dg.done());
    o.push_back(mom.done());
    o.push_back(part.done());
  });

  guarded(out, s, "gpf_form_equivalence", [&](auto& o) {
    Check c(s, "gpf_form_equivalence");
    const ModelSpec model = sweep_model(SweepFamily::kLinearPerturbed, 0.2);
    const FilterTrajectory data = generate_data(model, 5, opt.seed);
    const FilterComparison cmp = run_filters({FilterKind::kGpfBG, FilterKind::kGpfGT}, model, data, config);
    const PairDistance& p = *cmp.pair(FilterKind::kGpfBG, FilterKind::kGpfGT);
    for (std::size_t j = 0; j < p.per_step.size(); ++j) {
      c.slack(5e-3 - p.per_step[j], "step " + std::to_string(j) + ": " + fmt_case(0, p.per_step[j], 5e-3));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "eps_scaling", [&](auto& o) {
    Check c(s, "eps_scaling");
    const SweepReport r =
        run_sweep(SweepFamily::kLinearPerturbed, {0.0, 0.05, 0.1, 0.2, 0.3}, 5, opt.seed, config);
    const SweepPoint& zero = r.points.front();
    c.slack(2e-2 - std::max({zero.eps, zero.err_enkf, zero.err_gpf}), "delta = 0");
    c.slack(r.enkf_monotone ? 0.0 : -1.0, "enkf monotone in eps");
    c.slack(r.gpf_monotone ? 0.0 : -1.0, "gpf monotone in eps");
    auto res = c.done();
    std::ostringstream detail;
    detail << res.detail << "; max err/eps enkf " << r.max_ratio_enkf << ", gpf " << r.max_ratio_gpf;
    res.detail = detail.str();
    o.push_back(res);
  });

  guarded(out, s, "data_bounded", [&](auto& o) {
    Check c(s, "data_bounded");
    const ModelSpec model = bounded_reference_model(1);
    for (int i = 0; i < 20; ++i) {
      const FilterTrajectory t = generate_data(model, 10, opt.seed + static_cast<std::uint64_t>(i));
      for (const Vector& y : t.data) c.slack(t.kappa_y - y.norm(), fmt_case(i, y.norm(), t.kappa_y));
    }
    o.push_back(c.done());
  });

  guarded(out, s, "kalman_hand_value", [&](auto& o) {
    Check c(s, "kalman_hand_value");
    const Matrix one = Matrix::Identity(1, 1);
    MapParams id;
    id.matrix = one;
    const ModelSpec model(MapSpec("linear", id, 1), MapSpec("linear", id, 1), one, one, Vector::Zero(1), one);
    const auto post = kalman_analytic(model, trajectory_from_data({Vector::Zero(1)}));
    const double err = std::max(std::abs(post[1].mean()[0]), std::abs(post[1].cov()(0, 0) - 2.0 / 3.0));
    c.slack(1e-14 - err, fmt_case(0, post[1].cov()(0, 0), 2.0 / 3.0));
    o.push_back(c.done());
  });
}

}  // namespace

const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names = {"gaussian", "density", "operators", "filters"};
  return names;
}

std::vector<PropertyResult> run_suite(std::string_view suite, const VerifyOptions& options) {
  std::vector<PropertyResult> out;
  auto run_one = [&](std::string_view name) {
    if (name == "gaussian") {
      gaussian_suite(out, options);
    } else if (name == "density") {
      density_suite(out, options);
    } else if (name == "operators") {
      operators_suite(out, options);
    } else if (name == "filters") {
      filters_suite(out, options);
    } else {
      throw Error(ErrorCode::kConfig, "unknown verification suite '" + std::string(name) + "'");
    }
  };
  if (suite == "all") {
    for (const auto& name : verify_suites()) run_one(name);
  } else {
    run_one(suite);
  }
  return out;
}

Matrix random_spd(Rng& rng, int n, double eig_lo, double eig_hi) {
  NormalSampler normal;
  Matrix z(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) z(i, j) = normal(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  Vector lambda(n);
  for (int i = 0; i < n; ++i) lambda[i] = uniform(rng, eig_lo, eig_hi);
  return symmetrized(q * lambda.asDiagonal() * q.transpose());
}

GaussianMeasure random_gaussian(Rng& rng, int n, double mean_radius, double eig_lo, double eig_hi) {
  Vector m(n);
  for (int i = 0; i < n; ++i) m[i] = uniform(rng, -mean_radius, mean_radius);
  return GaussianMeasure(std::move(m), random_spd(rng, n, eig_lo, eig_hi));
}

GridDensity random_mixture(Rng& rng, std::shared_ptr<const Grid> grid, int components, double mean_radius,
                           double eig_lo, double eig_hi) {
  if (components < 1) throw Error(ErrorCode::kInvalidArgument, "a mixture needs at least one component");
  std::vector<GaussianMeasure> parts;
  std::vector<double> weights;
  for (int c = 0; c < components; ++c) {
    parts.push_back(random_gaussian(rng, grid->dim(), mean_radius, eig_lo, eig_hi));
    weights.push_back(uniform(rng, 0.2, 1.0));
  }
  return mixture(std::move(grid), parts, weights);
}

ModelSpec bounded_reference_model(int d) {
  MapParams psi;
  psi.scale = 0.9;
  MapParams h;
  h.scale = 1.0;
  const Matrix quarter = 0.25 * Matrix::Identity(d, d);
  return ModelSpec(MapSpec("tanh", psi, d), MapSpec("tanh", h, d), quarter, quarter, Vector::Zero(d),
                   Matrix::Identity(d, d), DeclaredBounds{0.9, 1.0, 1.0});
}

ModelSpec linear_reference_model() {
  MapParams psi;
  psi.matrix = Matrix::Constant(1, 1, 0.9);
  MapParams h;
  h.matrix = Matrix::Identity(1, 1);
  const Matrix quarter = Matrix::Constant(1, 1, 0.25);
  return ModelSpec(MapSpec("linear", psi, 1), MapSpec("linear", h, 1), quarter, quarter, Vector::Zero(1),
                   Matrix::Identity(1, 1));
}

SweepReport run_sweep(SweepFamily family, const std::vector<double>& deltas, int steps, std::uint64_t seed,
                      const FilterConfig& config, double scale) {
  if (deltas.empty()) throw Error(ErrorCode::kConfig, "the sweep needs at least one delta");
  if (!std::is_sorted(deltas.begin(), deltas.end())) throw Error(ErrorCode::kConfig, "sweep deltas must be sorted");
  SweepReport r;
  r.ratio_floor = kSweepRatioFloor;
  for (double delta : deltas) {
    const ModelSpec model = sweep_model(family, delta, scale);
    const FilterTrajectory data = generate_data(model, steps, seed);
    const FilterComparison cmp =
        run_filters({FilterKind::kTrue, FilterKind::kEnkfMeanField, FilterKind::kGpfBG}, model, data, config);
    SweepPoint p;
    p.delta = delta;
    for (const auto& rec : cmp.find(FilterKind::kTrue)->records) p.eps = std::max(p.eps, rec.eps.value_or(0.0));
    p.err_enkf = cmp.pair(FilterKind::kTrue, FilterKind::kEnkfMeanField)->max;
    p.err_gpf = cmp.pair(FilterKind::kTrue, FilterKind::kGpfBG)->max;
    r.points.push_back(p);
  }
  std::vector<SweepPoint> sorted = r.points;
  std::stable_sort(sorted.begin(), sorted.end(), [](const SweepPoint& a, const SweepPoint& b) { return a.eps < b.eps; });
  r.enkf_monotone = r.gpf_monotone = true;
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    r.enkf_monotone = r.enkf_monotone && sorted[i].err_enkf >= sorted[i - 1].err_enkf;
    r.gpf_monotone = r.gpf_monotone && sorted[i].err_gpf >= sorted[i - 1].err_gpf;
  }
  for (const SweepPoint& p : r.points) {
    if (p.eps <= r.ratio_floor) continue;
    r.max_ratio_enkf = std::max(r.max_ratio_enkf, p.err_enkf / p.eps);
    r.max_ratio_gpf = std::max(r.max_ratio_gpf, p.err_gpf / p.eps);
  }
  return r;
}

}  // namespace meanfield
