#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "meanfield/model.hpp"
#include "meanfield_cli/commands.hpp"
#include "meanfield_cli/config.hpp"

namespace meanfield::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::path(::testing::TempDir()) /
           (std::string("meanfield_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const json& j, const std::string& name = "config.json") const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  static json small_run(const ModelSpec& model, int steps) {
    return {{"model", meanfield::to_json(model)},
            {"steps", steps},
            {"seed", 11},
            {"resolution", {{"state", 256}, {"data", 64}}},
            {"kinds", {"true", "enkf_mf", "gpf_bg"}}};
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

  int run(const fs::path& config, const fs::path& out) {
    CommandOptions o;
    o.config = config;
    o.out = out;
    return cmd_run(o, out_, err_);
  }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST_F(CliTest, RunWritesDataFiles) {
  const fs::path cfg = write_config(small_run(sweep_model(SweepFamily::kTanhPerturbed, 0.1), 3));
  ASSERT_EQ(run(cfg, dir_ / "out"), kExitOk) << err_.str();
  for (const char* f : {"steps.csv", "summary.csv", "trajectory.csv", "metadata.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "out" / f)) << f;
  }
  const std::string steps = slurp(dir_ / "out" / "steps.csv");
  EXPECT_EQ(steps.substr(0, steps.find('\n')), "step,kind,mean_0,cov_0_0,eps,dg_to_true");
  // three kinds, steps 0..3
  EXPECT_EQ(std::count(steps.begin(), steps.end(), '\n'), 1 + 3 * 4);
  const json meta = json::parse(slurp(dir_ / "out" / "metadata.json"));
  EXPECT_EQ(meta["seed"], 11);
  EXPECT_GT(meta["lipschitz_p"].get<double>(), 1.0);
}

TEST_F(CliTest, ZeroStepsRunsThePriorOnly) {
  const fs::path cfg = write_config(small_run(sweep_model(SweepFamily::kTanhPerturbed, 0.1), 0));
  ASSERT_EQ(run(cfg, dir_ / "out"), kExitOk) << err_.str();
  const std::string steps = slurp(dir_ / "out" / "steps.csv");
  EXPECT_EQ(std::count(steps.begin(), steps.end(), '\n'), 1 + 3);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  json j = small_run(sweep_model(SweepFamily::kTanhPerturbed, 0.2), 3);
  j["kinds"] = {"true", "enkf_mf", "gpf_bg", "gpf_gt", "enkf_N"};
  j["ensemble_size"] = 200;
  const fs::path cfg = write_config(j);
  ASSERT_EQ(run(cfg, dir_ / "a"), kExitOk) << err_.str();
  ASSERT_EQ(run(cfg, dir_ / "b"), kExitOk) << err_.str();
  for (const char* f : {"steps.csv", "summary.csv", "trajectory.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
}

TEST_F(CliTest, SingleDeltaSweepMatchesRun) {
  const double delta = 0.1;
  json run_cfg = small_run(sweep_model(SweepFamily::kLinearPerturbed, delta), 5);
  ASSERT_EQ(run(write_config(run_cfg, "run.json"), dir_ / "run"), kExitOk) << err_.str();

  json sweep_cfg = {{"seed", 11},
                    {"steps", 5},
                    {"resolution", {{"state", 256}, {"data", 64}}},
                    {"sweep", {{"family", "linear_perturbed"}, {"deltas", {delta}}}}};
  CommandOptions o;
  o.config = write_config(sweep_cfg, "sweep.json");
  o.out = dir_ / "sweep";
  ASSERT_EQ(cmd_sweep(o, out_, err_), kExitOk) << err_.str();

  std::string dg;
  std::istringstream summary(slurp(dir_ / "run" / "summary.csv"));
  for (std::string line; std::getline(summary, line);) {
    if (line.rfind("max_dg,true,enkf_mf,", 0) == 0) dg = line.substr(line.rfind(',') + 1);
  }
  std::istringstream sweep(slurp(dir_ / "sweep" / "sweep.csv"));
  std::string header, row;
  std::getline(sweep, header);
  std::getline(sweep, row);
  EXPECT_EQ(header, "delta,eps_measured,err_enkf,err_gpf");
  std::vector<std::string> cols;
  std::istringstream cells(row);
  for (std::string c; std::getline(cells, c, ',');) cols.push_back(c);
  ASSERT_EQ(cols.size(), 4u);
  EXPECT_FALSE(dg.empty());
  EXPECT_EQ(cols[2], dg);
}

TEST_F(CliTest, ConfigErrorsExitWithTwo) {
  const fs::path cfg = write_config({{"steps", 2}, {"colour", "blue"}});
  EXPECT_EQ(run(cfg, dir_ / "out"), kExitConfig);
  const json e = json::parse(err_.str());
  EXPECT_EQ(e["error"], "config");
  EXPECT_FALSE(fs::exists(dir_ / "out" / "steps.csv"));

  EXPECT_EQ(run(dir_ / "missing.json", dir_ / "out"), kExitConfig);
  EXPECT_EQ(run(write_config({{"steps", 2}}, "nomodel.json"), dir_ / "out"), kExitConfig);
}

TEST_F(CliTest, NumericalFailureExitsWithOneAndStep) {
  json j = small_run(sweep_model(SweepFamily::kTanhPerturbed, 0.1), 2);
  j["box"] = {{"state_lo", {-0.5}}, {"state_hi", {0.5}}};
  EXPECT_EQ(run(write_config(j), dir_ / "out"), kExitFailure);
  const json e = json::parse(err_.str());
  EXPECT_EQ(e["error"], "coverage");
  EXPECT_TRUE(e.contains("step"));
  EXPECT_FALSE(fs::exists(dir_ / "out" / "steps.csv"));
}

TEST_F(CliTest, ConfigRoundTrip) {
  json j = small_run(sweep_model(SweepFamily::kTanhPerturbed, 0.1), 4);
  j["box"] = {{"data_lo", {-4.0}}, {"data_hi", {4.0}}};
  j["sweep"] = {{"family", "tanh_perturbed"}, {"deltas", {0.0, 0.1}}, {"scale", 0.8}};
  j["output_dir"] = "/tmp/x";
  const ExperimentConfig c = config_from_json(j, dir_);
  const ExperimentConfig back = config_from_json(to_json(c), dir_);
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_EQ(*back.steps, 4);
  EXPECT_EQ(back.sweep.scale, 0.8);
}

// Exit codes of the installed executable.
int shell(const std::string& args) {
  const int status = std::system((std::string(MEANFIELD_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CliTest, ExecutableExitCodes) {
  EXPECT_EQ(shell("--help"), 0);
  EXPECT_EQ(shell("run --no-such-flag"), 2);
  EXPECT_EQ(shell("run"), 2);
  EXPECT_EQ(shell("verify --suite nonsense"), 2);
  EXPECT_EQ(shell("verify --suite gaussian"), 0);
  const fs::path cfg = write_config(small_run(sweep_model(SweepFamily::kTanhPerturbed, 0.1), 1));
  EXPECT_EQ(shell("run --config " + cfg.string() + " --out /proc/forbidden"), 2);
  EXPECT_EQ(shell("run --config " + cfg.string() + " --out " + (dir_ / "ok").string() + " --seed 3"), 0);
  EXPECT_TRUE(fs::exists(dir_ / "ok" / "summary.csv"));
}

TEST(ShippedConfigs, Parse) {
  for (const auto& entry : fs::directory_iterator(MEANFIELD_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
  }
}

}  // namespace
}  // namespace meanfield::cli
