#include <benchmark/benchmark.h>
#include <nlohmann/json.hpp>

#include "meanfield/density.hpp"
#include "meanfield/filters.hpp"
#include "meanfield/model.hpp"
#include "meanfield/operators.hpp"
#include "meanfield/verify.hpp"

namespace {

using namespace meanfield;

// Two-dimensional state observed through one scalar channel.
ModelSpec planar_model() {
  return model_from_json(nlohmann::json::parse(R"({
    "d": 2, "K": 1,
    "psi": {"family": "tanh", "scale": 0.9, "matrix": [[1.0, 0.3], [-0.3, 1.0]]},
    "h": {"family": "bounded_rational", "scale": 1.0, "delta": 0.2, "matrix": [[1.0, 0.5]]},
    "Sigma": [[0.25, 0.0], [0.0, 0.25]], "Gamma": [[0.25]],
    "m0": [0.0, 0.0], "S0": [[1.0, 0.0], [0.0, 1.0]]
  })"));
}

struct Fixture {
  ModelSpec model;
  std::shared_ptr<const Grid> state;
  std::shared_ptr<const Grid> joint;
  std::unique_ptr<OperatorWorkspace> ws;
  GridDensity mu;
  GridDensity lifted;
  Vector y;

  explicit Fixture(int d)
      : model(d == 1 ? bounded_reference_model(1) : planar_model()),
        state(make_box_grid(Vector::Constant(d, -6.0), Vector::Constant(d, 6.0), default_resolution(d))),
        joint(make_joint(d)),
        ws(std::make_unique<OperatorWorkspace>(model, state, joint)),
        mu(from_gaussian(GaussianMeasure{Vector::Zero(d), Matrix::Identity(d, d)}, state)),
        lifted(lift(predict(mu, model, *ws), model, *ws)),
        y(Vector::Constant(1, 0.3)) {}

  std::shared_ptr<const Grid> make_joint(int d) const {
    std::vector<Axis> axes = state->axes();
    axes.push_back(Axis{-6.0, 6.0, default_resolution(d + 1)});
    return Grid::make(std::move(axes));
  }
};

Fixture& fixture(int d) {
  static Fixture one(1);
  if (d == 1) return one;
  static Fixture two(2);
  return two;
}

void BM_Predict(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(predict(f.mu, f.model, *f.ws));
}

void BM_Lift(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(lift(f.mu, f.model, *f.ws));
}

void BM_Bayes(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(bayes(f.lifted, f.y));
}

void BM_Transport(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(transport(f.lifted, f.y));
}

void BM_LiftedEpsilon(benchmark::State& st) {
  Fixture& f = fixture(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(lifted_epsilon(f.lifted));
}

}  // namespace

BENCHMARK(BM_Predict)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Lift)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bayes)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Transport)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LiftedEpsilon)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
