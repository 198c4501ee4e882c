#include "meanfield_cli/commands.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "meanfield/density_io.hpp"
#include "meanfield/error.hpp"
#include "meanfield/filters.hpp"
#include "meanfield/verify.hpp"
#include "meanfield_cli/config.hpp"

#ifndef MEANFIELD_VERSION
#define MEANFIELD_VERSION "unknown"
#endif

namespace meanfield::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

// Shortest round-trip representation; identical bits give identical text.
std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + '"';
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Files are staged in memory and written only once the command succeeded,
// each through a temporary name and a rename.
class OutputSet {
 public:
  void add(fs::path relative, std::string content) { files_.emplace_back(std::move(relative), std::move(content)); }

  void commit(const fs::path& dir) const {
    for (const auto& [rel, content] : files_) {
      const fs::path target = dir / rel;
      std::error_code ec;
      fs::create_directories(target.parent_path(), ec);
      if (ec) throw Error(ErrorCode::kIo, "cannot create " + target.parent_path().string() + ": " + ec.message());
      const fs::path tmp = target.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary);
        out << content;
        if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
      }
      fs::rename(tmp, target, ec);
      if (ec) throw Error(ErrorCode::kIo, "cannot rename " + tmp.string() + ": " + ec.message());
    }
  }

 private:
  std::vector<std::pair<fs::path, std::string>> files_;
};

// Creates the directory if needed and proves it accepts files.
void ensure_writable(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "output directory " + dir.string() + " cannot be created" +
                                    (ec ? ": " + ec.message() : std::string()));
  }
  const fs::path probe = dir / ".meanfield_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw Error(ErrorCode::kIo, "output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kIo:
    case ErrorCode::kUnknownFamily:
      return kExitConfig;
    default:
      return kExitFailure;
  }
}

int report(std::ostream& err, const Error& e) {
  json j = {{"error", std::string(to_string(e.code()))}, {"message", e.what()}};
  if (e.step()) j["step"] = *e.step();
  err << j.dump() << '\n';
  return exit_code_for(e.code());
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const Error& e) {
    return report(err, e);
  } catch (const json::exception& e) {
    return report(err, Error(ErrorCode::kConfig, e.what()));
  } catch (const fs::filesystem_error& e) {
    return report(err, Error(ErrorCode::kIo, e.what()));
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return kExitFailure;
  }
}

ExperimentConfig resolve_config(const CommandOptions& o) {
  ExperimentConfig c = o.config ? load_config(*o.config) : ExperimentConfig{};
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.resolution) c.grid.state_nodes = *o.resolution;
  return c;
}

FilterConfig filter_config(const ExperimentConfig& c) {
  FilterConfig f;
  f.grid = c.grid;
  f.ensemble_size = c.ensemble_size;
  f.seed = c.seed;
  return f;
}

std::string steps_csv(const FilterComparison& cmp, int d) {
  std::ostringstream s;
  s << "step,kind";
  for (int i = 0; i < d; ++i) s << ",mean_" << i;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) s << ",cov_" << i << '_' << j;
  }
  s << ",eps,dg_to_true\n";
  for (const auto& run : cmp.runs) {
    for (const auto& r : run.records) {
      s << r.step << ',' << to_string(*run.kind);
      for (int i = 0; i < d; ++i) s << ',' << num(r.moments.mean[i]);
      for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) s << ',' << num(r.moments.cov(i, j));
      }
      s << ',' << (r.eps ? num(*r.eps) : "") << ',' << (r.dg_to_true ? num(*r.dg_to_true) : "") << '\n';
    }
  }
  return s.str();
}

std::string summary_csv(const FilterComparison& cmp, const FilterTrajectory& data) {
  std::ostringstream s;
  s << "quantity,kind_a,kind_b,value\n";
  for (const auto& p : cmp.pairs) s << "max_dg," << to_string(p.a) << ',' << to_string(p.b) << ',' << num(p.max) << '\n';
  for (const auto& run : cmp.runs) {
    std::optional<double> eps;
    for (const auto& r : run.records) {
      if (r.eps) eps = std::max(eps.value_or(0.0), *r.eps);
    }
    if (eps) s << "eps," << to_string(*run.kind) << ",," << num(*eps) << '\n';
  }
  s << "kappa_y,,," << num(data.kappa_y) << '\n';
  return s.str();
}

std::string trajectory_csv(const FilterTrajectory& t, int d, int k) {
  std::ostringstream s;
  s << "step";
  for (int i = 0; i < k; ++i) s << ",y_" << i;
  for (int i = 0; i < d; ++i) s << ",u_" << i;
  s << '\n';
  for (std::size_t j = 0; j < t.states.size(); ++j) {
    s << j;
    for (int i = 0; i < k; ++i) s << ',' << (j == 0 ? "" : num(t.data[j - 1][i]));
    for (int i = 0; i < d; ++i) s << ',' << num(t.states[j][i]);
    s << '\n';
  }
  return s.str();
}

json grid_json(const Grid& g) {
  json axes = json::array();
  for (const Axis& a : g.axes()) axes.push_back({{"lo", a.lo}, {"hi", a.hi}, {"nodes", a.size}});
  return axes;
}

json assumptions_json(const AssumptionReport& r) {
  json checks = json::array();
  for (const auto& c : r.checks) {
    json j = {{"name", c.name}, {"passed", c.passed}, {"measured", c.measured}, {"note", c.note}};
    if (c.declared) j["declared"] = *c.declared;
    checks.push_back(std::move(j));
  }
  return {{"all_passed", r.all_passed}, {"linear_exactness_mode", r.linear_exactness_mode}, {"checks", checks}};
}

}  // namespace

int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    if (!options.config) throw Error(ErrorCode::kConfig, "run needs --config");
    const ExperimentConfig c = resolve_config(options);
    if (!c.model) throw Error(ErrorCode::kConfig, "config has no 'model' or 'model_file'");
    ensure_writable(c.output_dir);
    const ModelSpec& model = *c.model;
    const int steps = c.steps.value_or(10);

    const FilterTrajectory data = generate_data(model, steps, c.seed);
    const FilterComparison cmp = run_filters(c.kinds, model, data, filter_config(c));

    OutputSet files;
    files.add("steps.csv", steps_csv(cmp, model.d()));
    files.add("summary.csv", summary_csv(cmp, data));
    files.add("trajectory.csv", trajectory_csv(data, model.d(), model.K()));
    if (c.write_densities && cmp.grids) {
      for (const auto& run : cmp.runs) {
        if (run.kind == FilterKind::kEnkfParticles) continue;
        for (std::size_t j = 0; j < run.measures.size(); ++j) {
          std::ostringstream bin(std::ios::binary);
          if (const auto* g = std::get_if<GridDensity>(&run.measures[j])) {
            write_binary(*g, bin);
          } else {
            write_binary(from_gaussian(std::get<GaussianMeasure>(run.measures[j]), cmp.grids->state), bin);
          }
          files.add(fs::path("densities") / (std::string(to_string(*run.kind)) + "_" + std::to_string(j) + ".bin"),
                    bin.str());
        }
      }
    }
    json meta = {{"version", MEANFIELD_VERSION}, {"command", "run"},         {"seed", c.seed},
                 {"steps", steps},               {"config", to_json(c)},     {"lipschitz_p", cmp.lipschitz_p},
                 {"lipschitz_q", cmp.lipschitz_q}, {"assumptions", assumptions_json(validate_assumptions(model))}};
    if (cmp.grids) meta["grids"] = {{"state", grid_json(*cmp.grids->state)}, {"joint", grid_json(*cmp.grids->joint)}};
    meta["timings"] = {{"total_seconds", seconds_since(t0)}};
    files.add("metadata.json", meta.dump(2) + "\n");
    files.commit(c.output_dir);

    out << "run: " << steps << " steps, kinds";
    for (FilterKind k : c.kinds) out << ' ' << to_string(k);
    out << "\n";
    for (const auto& p : cmp.pairs) {
      out << "  max d_g(" << to_string(p.a) << ", " << to_string(p.b) << ") = " << num(p.max) << '\n';
    }
    out << "outputs in " << c.output_dir.string() << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto t0 = Clock::now();
    const ExperimentConfig c = resolve_config(options);
    if (c.sweep.deltas.empty()) throw Error(ErrorCode::kConfig, "sweep needs at least one delta");
    ensure_writable(c.output_dir);
    const int steps = c.steps.value_or(5);
    const SweepReport r = run_sweep(c.sweep.family, c.sweep.deltas, steps, c.seed, filter_config(c), c.sweep.scale);

    std::ostringstream csv;
    csv << "delta,eps_measured,err_enkf,err_gpf\n";
    for (const auto& p : r.points) {
      csv << num(p.delta) << ',' << num(p.eps) << ',' << num(p.err_enkf) << ',' << num(p.err_gpf) << '\n';
    }
    std::ostringstream checks;
    checks << "check,value\n"
           << "enkf_monotone_in_eps," << (r.enkf_monotone ? 1 : 0) << '\n'
           << "gpf_monotone_in_eps," << (r.gpf_monotone ? 1 : 0) << '\n'
           << "max_ratio_enkf," << num(r.max_ratio_enkf) << '\n'
           << "max_ratio_gpf," << num(r.max_ratio_gpf) << '\n'
           << "ratio_eps_floor," << num(r.ratio_floor) << '\n';
    OutputSet files;
    files.add("sweep.csv", csv.str());
    files.add("sweep_checks.csv", checks.str());
    json meta = {{"version", MEANFIELD_VERSION}, {"command", "sweep"}, {"seed", c.seed},
                 {"steps", steps},               {"config", to_json(c)},
                 {"timings", {{"total_seconds", seconds_since(t0)}}}};
    files.add("metadata.json", meta.dump(2) + "\n");
    files.commit(c.output_dir);

    out << "sweep family " << to_string(c.sweep.family) << ", " << steps << " steps\n";
    out << "  delta  eps_measured  err_enkf  err_gpf\n";
    for (const auto& p : r.points) {
      out << "  " << num(p.delta) << "  " << num(p.eps) << "  " << num(p.err_enkf) << "  " << num(p.err_gpf) << '\n';
    }
    out << "  enkf monotone in eps: " << (r.enkf_monotone ? "yes" : "no")
        << ", gpf monotone in eps: " << (r.gpf_monotone ? "yes" : "no") << '\n';
    out << "  max err/eps (eps > " << num(r.ratio_floor) << "): enkf " << num(r.max_ratio_enkf) << ", gpf "
        << num(r.max_ratio_gpf) << '\n';
    return static_cast<int>(r.enkf_monotone && r.gpf_monotone ? kExitOk : kExitFailure);
  });
}

int cmd_verify(const CommandOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.out) ensure_writable(*options.out);
    VerifyOptions v;
    if (options.seed) v.seed = *options.seed;
    v.resolution = options.resolution;
    const auto results = run_suite(options.suite, v);

    bool all = true;
    std::ostringstream csv;
    csv << "suite,name,passed,margin,cases,detail\n";
    for (const auto& r : results) {
      all = all && r.passed;
      out << (r.passed ? "PASS " : "FAIL ") << r.suite << '/' << r.name << "  margin " << num(r.margin) << "  ("
          << r.cases << " cases)";
      if (!r.detail.empty()) out << "  " << r.detail;
      out << '\n';
      csv << r.suite << ',' << r.name << ',' << (r.passed ? 1 : 0) << ',' << num(r.margin) << ',' << r.cases << ','
          << csv_quote(r.detail) << '\n';
    }
    out << (all ? "all properties hold" : "some properties FAILED") << " (" << results.size() << " checks)\n";
    if (options.out) {
      OutputSet files;
      files.add("verify.csv", csv.str());
      files.commit(*options.out);
    }
    return static_cast<int>(all ? kExitOk : kExitFailure);
  });
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Grid and ensemble filtering experiments: run filters, sweep the nonlinearity, verify properties"};
  app.require_subcommand(1);
  CommandOptions opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", opts.seed, "Random seed (overrides the config)");
    sub->add_option("--out", opts.out, "Output directory (overrides the config)");
    sub->add_option("--resolution", opts.resolution, "Grid nodes per state axis")->check(CLI::Range(16, 1 << 20));
  };
  CLI::App* run = app.add_subcommand("run", "Run filters on one simulated data set");
  run->add_option("--config", opts.config, "Experiment config (JSON)")->required();
  add_common(run);
  CLI::App* sweep = app.add_subcommand("sweep", "Sweep the nonlinearity parameter and tabulate eps vs filter error");
  sweep->add_option("--config", opts.config, "Experiment config (JSON); built-in sweep defaults when omitted");
  add_common(sweep);
  CLI::App* verify = app.add_subcommand("verify", "Run the property suites");
  verify->add_option("--suite", opts.suite, "gaussian, density, operators, filters or all")
      ->check(CLI::IsMember({"gaussian", "density", "operators", "filters", "all"}));
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? static_cast<int>(kExitOk) : static_cast<int>(kExitConfig);
  }
  if (run->parsed()) return cmd_run(opts, std::cout, std::cerr);
  if (sweep->parsed()) return cmd_sweep(opts, std::cout, std::cerr);
  return cmd_verify(opts, std::cout, std::cerr);
}

}  // namespace meanfield::cli
