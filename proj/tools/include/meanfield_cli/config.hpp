#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "meanfield/filters.hpp"
#include "meanfield/model.hpp"

namespace meanfield::cli {

struct SweepConfig {
  SweepFamily family = SweepFamily::kLinearPerturbed;
  std::vector<double> deltas = {0.0, 0.05, 0.1, 0.2, 0.3};
  double scale = 0.9;  // the coefficient a of Psi
};

/// Experiment description read from a JSON config file.
///
///   {
///     "model": { ... } | "model_file": "path relative to the config",
///     "steps": 10, "seed": 1, "kinds": ["true", "enkf_mf", ...],
///     "resolution": {"state": 1024, "data": 192},
///     "box": {"state_lo": [..], "state_hi": [..], "data_lo": [..], "data_hi": [..]},
///     "ensemble_size": 1000, "write_densities": false,
///     "sweep": {"family": "linear_perturbed", "deltas": [..], "scale": 0.9},
///     "output_dir": "out"
///   }
struct ExperimentConfig {
  std::optional<ModelSpec> model;
  std::optional<int> steps;  // run: 10, sweep: 5 when absent
  std::uint64_t seed = 0;
  std::vector<FilterKind> kinds = {FilterKind::kTrue, FilterKind::kEnkfMeanField, FilterKind::kGpfBG,
                                   FilterKind::kGpfGT};
  GridConfig grid;
  int ensemble_size = 1000;
  bool write_densities = false;
  SweepConfig sweep;
  std::filesystem::path output_dir = "out";
};

/// Throws Error(kConfig) on unknown keys or malformed values.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);

ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const ExperimentConfig& config);

}  // namespace meanfield::cli
