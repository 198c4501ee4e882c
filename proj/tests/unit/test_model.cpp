#include <cmath>

#include <nlohmann/json.hpp>

#include "meanfield/model.hpp"
#include "meanfield/verify.hpp"
#include "test_helpers.hpp"

namespace meanfield {
namespace {

using nlohmann::json;

Vector v1(double v) { return Vector::Constant(1, v); }

TEST(MapSpec, FamilyValues) {
  MapParams p;
  p.scale = 0.9;
  p.delta = 0.2;
  p.freq = 3.0;
  const double u = 0.7;
  EXPECT_NEAR(MapSpec("tanh_sin", p, 1)(v1(u))[0], 0.9 * std::tanh(u) + 0.2 * std::sin(3 * u), 1e-15);
  EXPECT_NEAR(MapSpec("linear_sin", p, 1)(v1(u))[0], 0.9 * u + 0.2 * std::sin(3 * u), 1e-15);
  EXPECT_NEAR(MapSpec("bounded_rational", p, 1)(v1(u))[0], 0.9 * std::tanh(u) + 0.2 * u * u / (1 + u * u), 1e-15);
  EXPECT_NEAR(MapSpec("linear_rational", p, 1)(v1(u))[0], 0.9 * u + 0.2 * u * u / (1 + u * u), 1e-15);

  MapParams mixed;
  mixed.matrix = Matrix(1, 2);
  mixed.matrix << 1.0, 0.5;
  const MapSpec h("tanh", mixed, 2);
  EXPECT_EQ(h.out_dim(), 1);
  Vector u2(2);
  u2 << 0.2, -0.4;
  EXPECT_NEAR(h(u2)[0], std::tanh(0.0), 1e-15);
}

TEST(MapSpec, AffineDetection) {
  MapParams p;
  p.scale = 0.9;
  EXPECT_TRUE(MapSpec("linear_sin", p, 1).affine().has_value());
  p.delta = 0.1;
  EXPECT_FALSE(MapSpec("linear_sin", p, 1).affine().has_value());
  EXPECT_FALSE(MapSpec("tanh", p, 1).affine().has_value());
  MapParams c;
  c.value = v1(2.0);
  const auto a = MapSpec("constant", c, 1).affine();
  ASSERT_TRUE(a.has_value());
  EXPECT_EQ(a->offset[0], 2.0);
  EXPECT_EQ(a->matrix(0, 0), 0.0);
}

TEST(MapSpec, Errors) {
  EXPECT_MF_ERROR(MapSpec("cubic", MapParams{}, 1), ErrorCode::kUnknownFamily);
  EXPECT_MF_ERROR(MapSpec("linear", MapParams{}, 1), ErrorCode::kInvalidArgument);
  MapParams p;
  p.matrix = Matrix::Identity(2, 2);
  EXPECT_MF_ERROR(MapSpec("tanh", p, 3), ErrorCode::kDimensionMismatch);
  EXPECT_GE(registered_families().size(), 7u);
}

TEST(ModelSpec, JsonRoundTrip) {
  for (const ModelSpec& m :
       {bounded_reference_model(1), bounded_reference_model(2), linear_reference_model(),
        sweep_model(SweepFamily::kTanhPerturbed, 0.2)}) {
    const json j = to_json(m);
    const ModelSpec back = model_from_json(json::parse(j.dump()));
    EXPECT_TRUE(back == m);
    EXPECT_EQ(back.fingerprint(), m.fingerprint());
  }
  EXPECT_NE(sweep_model(SweepFamily::kLinearPerturbed, 0.1).fingerprint(),
            sweep_model(SweepFamily::kLinearPerturbed, 0.2).fingerprint());
}

TEST(ModelSpec, JsonErrorsAreConfigErrors) {
  json j = to_json(linear_reference_model());
  json extra = j;
  extra["colour"] = "blue";
  EXPECT_MF_ERROR(model_from_json(extra), ErrorCode::kConfig);
  json missing = j;
  missing.erase("Gamma");
  EXPECT_MF_ERROR(model_from_json(missing), ErrorCode::kConfig);
  json bad_param = j;
  bad_param["psi"]["freq"] = 2.0;
  EXPECT_MF_ERROR(model_from_json(bad_param), ErrorCode::kConfig);
  json bad_family = j;
  bad_family["h"]["family"] = "cubic";
  EXPECT_MF_ERROR(model_from_json(bad_family), ErrorCode::kUnknownFamily);
  json bad_bounds = j;
  bad_bounds["bounds"] = {{"kappa_psi", 1.0}};
  EXPECT_MF_ERROR(model_from_json(bad_bounds), ErrorCode::kConfig);
  json bad_dim = j;
  bad_dim["Sigma"] = {{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_MF_ERROR(model_from_json(bad_dim), ErrorCode::kConfig);
}

TEST(ModelSpec, ConstructorValidation) {
  const ModelSpec ref = linear_reference_model();
  EXPECT_MF_ERROR(ModelSpec(ref.psi(), ref.h(), Matrix::Constant(1, 1, -1.0), ref.gamma(), ref.m0(), ref.s0()),
                  ErrorCode::kSingularCovariance);
  EXPECT_MF_ERROR(ModelSpec(ref.psi(), ref.h(), Matrix::Identity(2, 2), ref.gamma(), ref.m0(), ref.s0()),
                  ErrorCode::kDimensionMismatch);
}

TEST(Assumptions, BoundedModelPasses) {
  const AssumptionReport r = validate_assumptions(bounded_reference_model(1));
  EXPECT_TRUE(r.all_passed);
  EXPECT_FALSE(r.linear_exactness_mode);
  ASSERT_TRUE(r.kappa_psi && r.kappa_h);
  EXPECT_EQ(*r.kappa_psi, 0.9);
  EXPECT_NEAR(r.ell_h, 1.0, 1e-5);
  EXPECT_EQ(r.sigma, 0.25);
}

TEST(Assumptions, LinearModelIsExactnessMode) {
  const AssumptionReport r = validate_assumptions(linear_reference_model());
  EXPECT_TRUE(r.linear_exactness_mode);
  EXPECT_FALSE(r.kappa_psi.has_value());
}

TEST(Assumptions, DeclaredBoundTooSmallFails) {
  const ModelSpec ref = bounded_reference_model(1);
  const ModelSpec lying(ref.psi(), ref.h(), ref.sigma(), ref.gamma(), ref.m0(), ref.s0(), DeclaredBounds{0.5, 1.0, 1.0});
  EXPECT_FALSE(validate_assumptions(lying).all_passed);
}

TEST(SweepModel, GaussianExactAtZero) {
  EXPECT_TRUE(sweep_model(SweepFamily::kLinearPerturbed, 0.0).linear_matrices().has_value());
  EXPECT_FALSE(sweep_model(SweepFamily::kTanhPerturbed, 0.0).linear_matrices().has_value());
  EXPECT_EQ(sweep_family_from_string("tanh_perturbed"), SweepFamily::kTanhPerturbed);
  EXPECT_MF_ERROR(sweep_family_from_string("cubic"), ErrorCode::kUnknownFamily);
}

}  // namespace
}  // namespace meanfield
