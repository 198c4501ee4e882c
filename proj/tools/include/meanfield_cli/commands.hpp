#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace meanfield::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // property failure or numerical error during a run
  kExitConfig = 2,   // bad configuration, unusable output directory
};

struct CommandOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<int> resolution;
  std::string suite = "all";
};

// Each command writes its data files only after all computation succeeded.
// Errors are reported on `err` as one JSON object per line.
int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_verify(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Parses argv (subcommands run, sweep, verify) and dispatches.
int run_cli(int argc, const char* const* argv);

}  // namespace meanfield::cli
