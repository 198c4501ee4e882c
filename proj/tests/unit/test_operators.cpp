#include <cmath>

#include "meanfield/operators.hpp"
#include "meanfield/verify.hpp"
#include "test_helpers.hpp"

namespace meanfield {
namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

struct Rig {
  ModelSpec model;
  std::shared_ptr<const Grid> state;
  std::shared_ptr<const Grid> joint;
  OperatorWorkspace ws;

  Rig(ModelSpec m, std::shared_ptr<const Grid> s, Axis y)
      : model(std::move(m)), state(s), joint(with_data_axis(s, y)), ws(model, state, joint) {}

  static std::shared_ptr<const Grid> with_data_axis(const std::shared_ptr<const Grid>& s, Axis y) {
    std::vector<Axis> axes = s->axes();
    axes.push_back(y);
    return Grid::make(std::move(axes));
  }
};

Rig linear_1d(int nodes) {
  return Rig(linear_reference_model(), make_box_grid(v1(-8.0), v1(8.0), nodes), Axis{-8.0, 8.0, 192});
}

// Psi(u) = A u, H(u) = c^T u with correlated Sigma, so the kernel has a cross term.
ModelSpec linear_2d() {
  MapParams psi;
  psi.matrix = Matrix(2, 2);
  psi.matrix << 0.8, 0.2, -0.1, 0.7;
  MapParams h;
  h.matrix = Matrix(1, 2);
  h.matrix << 1.0, 0.5;
  Matrix sigma(2, 2);
  sigma << 0.3, 0.1, 0.1, 0.2;
  return ModelSpec(MapSpec("linear", psi, 2), MapSpec("linear", h, 2), sigma, m1(0.25), Vector::Zero(2),
                   Matrix::Identity(2, 2));
}

TEST(Predict, LinearGaussianIsExact) {
  const Rig s = linear_1d(1024);
  ASSERT_TRUE(s.ws.transition_kernel().has_value());
  const GridDensity mu = from_gaussian(GaussianMeasure(v1(0.5), m1(0.8)), s.state);
  const GaussianMeasure exact(v1(0.45), m1(0.81 * 0.8 + 0.25));
  EXPECT_LT(dg_distance(predict(mu, s.model, s.ws), from_gaussian(exact, s.state)), 1e-9);
}

TEST(Predict, UncachedKernelPathIsExact) {
  const Rig s = linear_1d(5001);
  ASSERT_FALSE(s.ws.transition_kernel().has_value());
  const GridDensity mu = from_gaussian(GaussianMeasure(v1(-0.5), m1(0.3)), s.state);
  const GaussianMeasure exact(v1(-0.45), m1(0.81 * 0.3 + 0.25));
  EXPECT_LT(dg_distance(predict(mu, s.model, s.ws), from_gaussian(exact, s.state)), 1e-9);
}

TEST(Predict, TwoDimensionalCachedAndUncachedAgreeWithExact) {
  const ModelSpec model = linear_2d();
  Matrix s0(2, 2);
  s0 << 0.6, -0.2, -0.2, 0.9;
  Vector m0(2);
  m0 << 0.3, -0.4;
  const GaussianMeasure mu(m0, s0);
  const Matrix& a = model.psi().params().matrix;
  const GaussianMeasure exact(a * m0, a * s0 * a.transpose() + model.sigma());
  for (int nodes : {64, 96}) {
    const Rig s(model, make_box_grid(Vector::Constant(2, -7.0), Vector::Constant(2, 7.0), nodes),
                  Axis{-7.0, 7.0, 32});
    EXPECT_EQ(s.ws.transition_kernel().has_value(), nodes == 64);
    const GridDensity p = predict(from_gaussian(mu, s.state), s.model, s.ws);
    EXPECT_LT(dg_distance(p, from_gaussian(exact, s.state)), 1e-7) << nodes;
  }
}

TEST(Predict, TanhPushMatchesMonteCarlo) {
  // Oracle: 10^6 samples of 0.9 tanh(X) + xi with X ~ N(1, 0.5), xi ~ N(0, 0.25).
  const ModelSpec model = bounded_reference_model(1);
  const Rig s(model, make_box_grid(v1(-8.0), v1(8.0), 1024), Axis{-6.0, 6.0, 192});
  const Moments grid = moments(predict(from_gaussian(GaussianMeasure(v1(1.0), m1(0.5)), s.state), model, s.ws));

  Rng rng(2024);
  NormalSampler z;
  const int n = 1'000'000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = 1.0 + std::sqrt(0.5) * z(rng);
    const double next = 0.9 * std::tanh(x) + 0.5 * z(rng);
    sum += next;
    sum2 += next * next;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(grid.mean[0], mean, 3.0 * std::sqrt(var / n));
  // standard error of the sample variance of a near-Gaussian variable
  EXPECT_NEAR(grid.cov(0, 0), var, 3.0 * var * std::sqrt(2.0 / n));
}

TEST(Lift, MarginalAndDataMoments) {
  const Rig s = linear_1d(1024);
  const GridDensity mu = from_gaussian(GaussianMeasure(v1(0.2), m1(0.7)), s.state);
  const GridDensity q = lift(mu, s.model, s.ws);
  ASSERT_TRUE(q.blocks().has_value());
  EXPECT_LT(dg_distance(marginal_u(q), mu), 1e-12);
  const Moments m = moments(q);
  EXPECT_NEAR(m.mean[1], 0.2, 1e-9);
  EXPECT_NEAR(m.cov(1, 1), 0.7 + 0.25, 1e-9);
  EXPECT_NEAR(m.cov(0, 1), 0.7, 1e-9);
}

TEST(Lift, NarrowDataBoxIsACoverageError) {
  const Rig s(linear_reference_model(), make_box_grid(v1(-8.0), v1(8.0), 256), Axis{-0.5, 0.5, 64});
  const GridDensity mu = from_gaussian(GaussianMeasure(v1(0.0), m1(1.0)), s.state);
  EXPECT_MF_ERROR(lift(mu, s.model, s.ws), ErrorCode::kCoverage);
}

TEST(Bayes, MatchesClosedFormConditioning) {
  Matrix c(2, 2);
  c << 1.2, 0.6, 0.6, 0.9;
  Vector m(2);
  m << 0.3, -0.2;
  const GaussianMeasure g(m, c);
  const BlockStructure b(1, 1);
  const int nodes[] = {1024, 192};
  const auto grid = make_box_grid(m - Vector::Constant(2, 8.0), m + Vector::Constant(2, 8.0), nodes);
  const GridDensity joint = from_gaussian(g, grid, b);
  const auto state = std::make_shared<const Grid>(grid->sub_grid(0, 1));
  for (double y : {-1.5, 0.0, 0.37, 2.0}) {
    const GaussianMeasure exact = condition(g, b, v1(y));
    EXPECT_LT(dg_distance(bayes(joint, v1(y)), from_gaussian(exact, state)), 1e-8) << y;
    // plain linear slicing is only second-order accurate in the y spacing
    EXPECT_LT(dg_distance(bayes(joint, v1(y), SliceInterpolation::kLinear), from_gaussian(exact, state)), 2e-2) << y;
  }
}

TEST(Bayes, ErrorCases) {
  const Rig s = linear_1d(256);
  const GridDensity q = lift(from_gaussian(GaussianMeasure(v1(0.0), m1(1.0)), s.state), s.model, s.ws);
  EXPECT_MF_ERROR(bayes(q, v1(7.99)), ErrorCode::kOutOfDomain);
  EXPECT_MF_ERROR(bayes(q, Vector::Zero(2)), ErrorCode::kDimensionMismatch);
  EXPECT_MF_ERROR(bayes(marginal_u(q), v1(0.0)), ErrorCode::kInvalidArgument);

  std::vector<double> v(q.values().begin(), q.values().end());
  const std::size_t ny = 192;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i % ny > ny / 2) v[i] = 0.0;
  }
  const GridDensity half = GridDensity::from_values(q.grid_ptr(), v, q.blocks());
  EXPECT_MF_ERROR(bayes(half, v1(4.0)), ErrorCode::kDegenerateEvidence);
}

TEST(KalmanGain, HandValue) {
  Moments m;
  m.mean = Vector::Zero(3);
  m.cov = Matrix(3, 3);
  m.cov << 2.0, 0.3, 1.0, 0.3, 1.0, 0.5, 1.0, 0.5, 2.0;
  const Matrix a = kalman_gain(m, BlockStructure(2, 1));
  EXPECT_NEAR(a(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(a(1, 0), 0.25, 1e-15);
}

TEST(Transport, EqualsBayesOnGaussianJoint) {
  Matrix c(2, 2);
  c << 0.9, -0.5, -0.5, 1.4;
  const GaussianMeasure g(Vector::Zero(2), c);
  const int nodes[] = {1024, 192};
  const auto grid = make_box_grid(Vector::Constant(2, -9.0), Vector::Constant(2, 9.0), nodes);
  const GridDensity joint = from_gaussian(g, grid, BlockStructure(1, 1));
  for (double y : {-1.0, 0.5, 1.8}) EXPECT_LT(dg_distance(transport(joint, v1(y)), bayes(joint, v1(y))), 1e-6) << y;
}

TEST(Transport, KeepsKalmanMeanOffGaussian) {
  const ModelSpec model = bounded_reference_model(1);
  const Rig s(model, make_box_grid(v1(-8.0), v1(8.0), 1024), Axis{-6.0, 6.0, 192});
  Rng rng(4);
  const GridDensity q = lift(predict(random_mixture(rng, s.state, 3, 2.0, 0.1, 1.0), model, s.ws), model, s.ws);
  const BlockStructure b(1, 1);
  const Moments m = moments(q);
  const Vector y = v1(0.8);
  const Vector expect = m.mean_u(b) + kalman_gain(m, b) * (y - m.mean_y(b));
  EXPECT_NEAR(moments(transport(q, y)).mean[0], expect[0], 1e-4);
  EXPECT_GT(dg_distance(transport(q, y), bayes(q, y)), 0.0);
}

TEST(Workspace, MismatchesAreRejected) {
  const Rig s = linear_1d(256);
  const GridDensity mu = from_gaussian(GaussianMeasure(v1(0.0), m1(1.0)), s.state);
  EXPECT_MF_ERROR(predict(mu, bounded_reference_model(1), s.ws), ErrorCode::kKernelMismatch);
  const GridDensity other = from_gaussian(GaussianMeasure(v1(0.0), m1(1.0)), make_box_grid(v1(-8.0), v1(8.0), 257));
  EXPECT_MF_ERROR(predict(other, s.model, s.ws), ErrorCode::kGridMismatch);
  const auto joint = make_box_grid(Vector::Constant(2, -8.0), Vector::Constant(2, 8.0), 64);
  EXPECT_MF_ERROR(OperatorWorkspace(s.model, s.state, joint), ErrorCode::kGridMismatch);
  EXPECT_MF_ERROR(OperatorWorkspace(s.model, s.state, s.state), ErrorCode::kDimensionMismatch);
}

}  // namespace
}  // namespace meanfield
