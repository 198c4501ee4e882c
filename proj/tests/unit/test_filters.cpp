#include <cmath>
#include <limits>

#include "meanfield/filters.hpp"
#include "meanfield/verify.hpp"
#include "test_helpers.hpp"

namespace meanfield {
namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

ModelSpec unit_linear_model() {
  MapParams id;
  id.matrix = Matrix::Identity(1, 1);
  return ModelSpec(MapSpec("linear", id, 1), MapSpec("linear", id, 1), m1(1.0), m1(1.0), v1(0.0), m1(1.0));
}

TEST(FilterKind, NamesRoundTrip) {
  for (FilterKind k : {FilterKind::kTrue, FilterKind::kEnkfMeanField, FilterKind::kGpfBG, FilterKind::kGpfGT,
                       FilterKind::kEnkfParticles, FilterKind::kKalman}) {
    EXPECT_EQ(filter_kind_from_string(to_string(k)), k);
  }
  EXPECT_EQ(to_string(FilterKind::kEnkfParticles), "enkf_N");
  EXPECT_MF_ERROR(filter_kind_from_string("ukf"), ErrorCode::kConfig);
  EXPECT_TRUE(is_grid_kind(FilterKind::kGpfGT));
  EXPECT_FALSE(is_grid_kind(FilterKind::kKalman));
}

TEST(Kalman, HandValues) {
  // Psi = H = identity, Sigma = Gamma = S0 = 1, m0 = 0, data 1 then 0:
  //   step 1: predicted 2, gain 2/3, mean 2/3, cov 2/3
  //   step 2: predicted 5/3, gain 5/8, mean 1/4, cov 5/8
  const auto mus = kalman_analytic(unit_linear_model(), trajectory_from_data({v1(1.0), v1(0.0)}));
  ASSERT_EQ(mus.size(), 3u);
  EXPECT_NEAR(mus[1].mean()[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(mus[1].cov()(0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(mus[2].mean()[0], 0.25, 1e-15);
  EXPECT_NEAR(mus[2].cov()(0, 0), 0.625, 1e-15);
  EXPECT_MF_ERROR(kalman_analytic(bounded_reference_model(1), trajectory_from_data({v1(0.0)})),
                  ErrorCode::kModelNotLinear);
}

TEST(Data, GenerationIsDeterministic) {
  const ModelSpec model = bounded_reference_model(1);
  const FilterTrajectory a = generate_data(model, 8, 17);
  const FilterTrajectory b = generate_data(model, 8, 17);
  const FilterTrajectory c = generate_data(model, 8, 18);
  ASSERT_EQ(a.steps(), 8);
  EXPECT_EQ(a.states.size(), 9u);
  double kappa = 0.0;
  for (int j = 0; j < 8; ++j) {
    EXPECT_EQ(a.data[j], b.data[j]);
    kappa = std::max(kappa, a.data[j].norm());
  }
  EXPECT_NE(a.data[0], c.data[0]);
  EXPECT_EQ(a.kappa_y, kappa);
  EXPECT_EQ(generate_data(model, 0, 1).steps(), 0);
  EXPECT_MF_ERROR(generate_data(model, -1, 1), ErrorCode::kInvalidArgument);
  EXPECT_MF_ERROR(trajectory_from_data({v1(std::nan(""))}), ErrorCode::kInvalidArgument);
}

TEST(Ensemble, Validation) {
  EXPECT_MF_ERROR(Ensemble(Matrix::Zero(1, 1)), ErrorCode::kInvalidArgument);
  Matrix bad = Matrix::Zero(3, 1);
  bad(1, 0) = std::numeric_limits<double>::infinity();
  EXPECT_MF_ERROR(Ensemble(bad), ErrorCode::kInvalidArgument);
  Matrix x(3, 1);
  x << 1.0, 2.0, 4.0;
  const Moments m = moments(Ensemble(x));
  EXPECT_NEAR(m.mean[0], 7.0 / 3.0, 1e-15);
  EXPECT_NEAR(m.cov(0, 0), (16.0 / 9 + 1.0 / 9 + 25.0 / 9) / 2.0, 1e-14);
}

TEST(EnkfParticles, LargeEnsembleTracksKalmanStep) {
  const ModelSpec model = unit_linear_model();
  Rng rng(3);
  const int n = 40'000;
  const Ensemble prior(sample(GaussianMeasure(v1(0.0), m1(1.0)), rng, n));
  const Ensemble post = step_enkf_particles(prior, model, v1(1.0), 99);
  const Moments m = moments(post);
  // exact analysis N(2/3, 2/3); sampling error of order 1/sqrt(n)
  EXPECT_NEAR(m.mean[0], 2.0 / 3.0, 5.0 * std::sqrt(2.0 / 3.0 / n));
  EXPECT_NEAR(m.cov(0, 0), 2.0 / 3.0, 0.03);
  const Moments again = moments(step_enkf_particles(prior, model, v1(1.0), 99));
  EXPECT_EQ(again.mean[0], m.mean[0]);
}

TEST(StepTrue, MatchesImportanceSamplingOracle) {
  // Oracle: bootstrap particle step with 10^6 particles, weights N(y; tanh(u), 0.25).
  const ModelSpec model = bounded_reference_model(1);
  const auto state = make_box_grid(v1(-8.0), v1(8.0), 1024);
  const auto joint = Grid::make({state->axis(0), Axis{-6.0, 6.0, 192}});
  const OperatorWorkspace ws(model, state, joint);
  const double y = 0.6;
  const Moments grid =
      moments(step_true(from_gaussian(GaussianMeasure(v1(0.0), m1(1.0)), state), model, ws, v1(y)));

  Rng rng(77);
  NormalSampler z;
  const int n = 1'000'000;
  double w_sum = 0.0, w2_sum = 0.0, m_sum = 0.0, s_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = 0.9 * std::tanh(z(rng)) + 0.5 * z(rng);
    const double r = y - std::tanh(u);
    const double w = std::exp(-2.0 * r * r);
    w_sum += w;
    w2_sum += w * w;
    m_sum += w * u;
    s_sum += w * u * u;
  }
  const double mean = m_sum / w_sum;
  const double var = s_sum / w_sum - mean * mean;
  const double ess = w_sum * w_sum / w2_sum;
  EXPECT_NEAR(grid.mean[0], mean, 3.0 * std::sqrt(var / ess));
  EXPECT_NEAR(grid.cov(0, 0), var, 3.0 * var * std::sqrt(2.0 / ess));
}

TEST(RunFilters, LinearModelCollapsesOntoKalman) {
  const ModelSpec model = linear_reference_model();
  const FilterTrajectory data = generate_data(model, 4, 5);
  const FilterComparison cmp =
      run_filters({FilterKind::kTrue, FilterKind::kEnkfMeanField, FilterKind::kGpfBG, FilterKind::kGpfGT,
                   FilterKind::kKalman},
                  model, data, FilterConfig{});
  ASSERT_TRUE(cmp.grids.has_value());
  for (FilterKind k : {FilterKind::kTrue, FilterKind::kEnkfMeanField, FilterKind::kGpfBG, FilterKind::kGpfGT}) {
    const PairDistance* p = cmp.pair(k, FilterKind::kKalman);
    ASSERT_NE(p, nullptr);
    EXPECT_EQ(p->per_step.size(), 5u);
    EXPECT_LT(p->max, 1e-6) << to_string(k);
  }
  const FilterTrajectory* t = cmp.find(FilterKind::kTrue);
  ASSERT_NE(t, nullptr);
  EXPECT_EQ(t->records.size(), 5u);
  EXPECT_FALSE(t->records[0].eps.has_value());
  EXPECT_LT(*t->records[1].eps, 1e-6);
  EXPECT_NEAR(cmp.lipschitz_p, 0.0, 0.0);  // unbounded Psi
}

TEST(RunFilters, DuplicateKindsAreRejected) {
  const ModelSpec model = linear_reference_model();
  EXPECT_MF_ERROR(run_filters({FilterKind::kKalman, FilterKind::kKalman}, model, generate_data(model, 1, 1), {}),
                  ErrorCode::kConfig);
}

TEST(RunFilters, ErrorsCarryTheStepIndex) {
  const ModelSpec model = linear_reference_model();
  FilterConfig config;
  config.grid.state_nodes = 256;
  config.grid.data_nodes = 64;
  config.grid.state_lo = v1(-8.0);
  config.grid.state_hi = v1(8.0);
  config.grid.data_lo = v1(-8.0);
  config.grid.data_hi = v1(8.0);
  const FilterTrajectory data = trajectory_from_data({v1(0.1), v1(7.99)});
  try {
    run_filters({FilterKind::kTrue}, model, data, config);
    ADD_FAILURE() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfDomain) << e.what();
    ASSERT_TRUE(e.step().has_value());
    EXPECT_EQ(*e.step(), 2);
  }
}

TEST(SelectGrids, CoversDataAndPrior) {
  const ModelSpec model = bounded_reference_model(1);
  const FilterTrajectory data = generate_data(model, 5, 9);
  const FilterGrids g = select_grids(model, data, GridConfig{});
  EXPECT_EQ(g.state->axis(0).size, 1024);
  EXPECT_EQ(g.joint->axis(1).size, 192);
  EXPECT_TRUE(g.joint->axis(0) == g.state->axis(0));
  EXPECT_LE(g.state->axis(0).lo, -6.0);
  for (const Vector& y : data.data) {
    EXPECT_LT(g.joint->axis(1).lo, y[0]);
    EXPECT_GT(g.joint->axis(1).hi, y[0]);
  }
  EXPECT_MF_ERROR(select_grids(bounded_reference_model(2), generate_data(bounded_reference_model(2), 1, 1), {}),
                  ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace meanfield
