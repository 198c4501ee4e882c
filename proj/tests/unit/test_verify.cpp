#include "meanfield/verify.hpp"
#include "test_helpers.hpp"

namespace meanfield {
namespace {

class VerifySuite : public ::testing::TestWithParam<std::string> {};

TEST_P(VerifySuite, AllPropertiesHold) {
  const auto results = run_suite(GetParam());
  ASSERT_FALSE(results.empty());
  for (const PropertyResult& r : results) {
    EXPECT_EQ(r.suite, GetParam());
    EXPECT_TRUE(r.passed) << r.name << ": " << r.detail;
  }
}

INSTANTIATE_TEST_SUITE_P(Suites, VerifySuite, ::testing::Values("gaussian", "density", "operators", "filters"));

TEST(Verify, UnknownSuiteIsAConfigError) { EXPECT_MF_ERROR(run_suite("everything"), ErrorCode::kConfig); }

// A conditioning routine with the sign of the innovation flipped must be caught.
TEST(Verify, SignFlipMutantFailsGaussianSuite) {
  VerifyOptions opt;
  opt.condition = [](const GaussianMeasure& joint, const BlockStructure& b, const Vector& y) {
    const GaussianMeasure right = condition(joint, b, y);
    const Vector wrong = 2.0 * joint.mean_u(b) - right.mean();
    return GaussianMeasure(wrong, right.cov());
  };
  bool caught = false;
  for (const PropertyResult& r : run_suite("gaussian", opt)) {
    if (r.name == "conditioning_vs_grid_bayes") caught = !r.passed;
  }
  EXPECT_TRUE(caught);
}

TEST(Verify, RandomSpdSpectrum) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Matrix s = random_spd(rng, 3, 0.3, 3.0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    EXPECT_GE(es.eigenvalues().minCoeff(), 0.3 - 1e-12);
    EXPECT_LE(es.eigenvalues().maxCoeff(), 3.0 + 1e-12);
  }
}

}  // namespace
}  // namespace meanfield
