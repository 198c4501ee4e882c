#include <cmath>
#include <numbers>

#include "meanfield/gaussian.hpp"
#include "meanfield/verify.hpp"
#include "test_helpers.hpp"

namespace meanfield {
namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }
Vector v1(double v) { return Vector::Constant(1, v); }

// Composite Simpson rule on [lo, hi] with n (even) panels, independent of the
// library quadrature.
template <class F>
double simpson(F f, double lo, double hi, int n) {
  const double h = (hi - lo) / n;
  double s = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return s * h / 3.0;
}

double normal_pdf(double x, double m, double var) {
  return std::exp(-0.5 * (x - m) * (x - m) / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

TEST(Gaussian, DensityAtHandValue) {
  Matrix c(2, 2);
  c << 2.0, 0.5, 0.5, 1.0;
  const GaussianMeasure g(Vector::Zero(2), c);
  Vector x(2);
  x << 1.0, -1.0;
  // |x|^2_C = x^T C^{-1} x with det C = 1.75
  const double q = (1.0 * 1.0 + 2.0 * 1.0 + 2 * 0.5 * 1.0) / 1.75;
  EXPECT_NEAR(g.mahalanobis2(x), q, 1e-14);
  EXPECT_NEAR(density_at(g, x), std::exp(-0.5 * q) / (2 * std::numbers::pi * std::sqrt(1.75)), 1e-15);
}

TEST(Gaussian, RejectsBadInput) {
  EXPECT_MF_ERROR(GaussianMeasure(Vector::Zero(2), Matrix::Identity(3, 3)), ErrorCode::kDimensionMismatch);
  Matrix asym(2, 2);
  asym << 1.0, 0.2, 0.0, 1.0;
  EXPECT_MF_ERROR(GaussianMeasure(Vector::Zero(2), asym), ErrorCode::kInvalidArgument);
  EXPECT_MF_ERROR(GaussianMeasure(v1(0.0), m1(-1.0)), ErrorCode::kSingularCovariance);
  EXPECT_MF_ERROR(BlockStructure(0, 1), ErrorCode::kInvalidArgument);
}

TEST(Gaussian, ConditioningHandValue) {
  // joint (u, y) with var u = 2, var y = 3, cov = 1; condition on y = 2
  Matrix c(2, 2);
  c << 2.0, 1.0, 1.0, 3.0;
  Vector m(2);
  m << 0.5, -1.0;
  const GaussianMeasure post = condition(GaussianMeasure(m, c), BlockStructure(1, 1), v1(2.0));
  EXPECT_NEAR(post.mean()[0], 0.5 + (1.0 / 3.0) * 3.0, 1e-14);
  EXPECT_NEAR(post.cov()(0, 0), 2.0 - 1.0 / 3.0, 1e-14);
  EXPECT_MF_ERROR(condition(GaussianMeasure(m, c), BlockStructure(1, 1), Vector::Zero(2)),
                  ErrorCode::kDimensionMismatch);
}

TEST(Gaussian, KlHandValue) {
  // KL(N(0,1) || N(1,2)) = 0.5 (log 2 + (1 + 1) / 2 - 1)
  EXPECT_NEAR(kl_divergence(GaussianMeasure(v1(0), m1(1)), GaussianMeasure(v1(1), m1(2))), 0.5 * std::log(2.0),
              1e-14);
  const GaussianMeasure g(v1(0.3), m1(0.7));
  EXPECT_NEAR(kl_divergence(g, g), 0.0, 1e-15);
}

TEST(Gaussian, SecondMomentOfWeightHandValue) {
  // E(1 + x^2)^2 = 1 + 2 E x^2 + E x^4 with E x^2 = m^2 + s, E x^4 = m^4 + 6 m^2 s + 3 s^2
  const double m = 0.7, s = 1.3;
  const double expect = 1 + 2 * (m * m + s) + (m * m * m * m + 6 * m * m * s + 3 * s * s);
  EXPECT_NEAR(g2_expectation(GaussianMeasure(v1(m), m1(s))), expect, 1e-12);
  // isotropic 2-D: |x|^2 ~ s chi^2_2, E|x|^4 = 8 s^2
  EXPECT_NEAR(g2_expectation(GaussianMeasure(Vector::Zero(2), s * Matrix::Identity(2, 2))),
              1 + 2 * 2 * s + 8 * s * s, 1e-12);
}

TEST(Gaussian, DgBoundDominatesIndependentQuadrature) {
  Rng rng(11);
  for (int i = 0; i < 30; ++i) {
    const GaussianMeasure a = random_gaussian(rng, 1, 1.0, 0.2, 2.0);
    const GaussianMeasure b = random_gaussian(rng, 1, 1.0, 0.2, 2.0);
    const double dg = simpson(
        [&](double x) {
          return (1 + x * x) *
                 std::abs(normal_pdf(x, a.mean()[0], a.cov()(0, 0)) - normal_pdf(x, b.mean()[0], b.cov()(0, 0)));
        },
        -20.0, 20.0, 40'000);
    EXPECT_LE(dg, dg_upper_bound(a, b)) << i;
  }
}

TEST(Gaussian, DgBoundVanishesOnEqualMeasures) {
  const GaussianMeasure g(v1(1.0), m1(0.5));
  EXPECT_NEAR(dg_upper_bound(g, g), 0.0, 1e-14);
}

TEST(Gaussian, SampleMoments) {
  Matrix c(2, 2);
  c << 1.0, 0.6, 0.6, 2.0;
  Vector m(2);
  m << 1.0, -2.0;
  Rng rng(5);
  const int n = 200'000;
  const Matrix x = sample(GaussianMeasure(m, c), rng, n);
  ASSERT_EQ(x.rows(), n);
  const Vector mean = x.colwise().mean();
  const Matrix centred = x.rowwise() - mean.transpose();
  const Matrix cov = centred.transpose() * centred / (n - 1);
  EXPECT_LT((mean - m).norm(), 4.0 * std::sqrt(3.0 / n));
  EXPECT_LT((cov - c).cwiseAbs().maxCoeff(), 0.03);
  EXPECT_MF_ERROR(sample(GaussianMeasure(m, c), rng, 0), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace meanfield
