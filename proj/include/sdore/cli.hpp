#pragma once

#include "sdore/config.hpp"
#include "sdore/experiments.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sdore::cli {

enum ExitCode : int { kSuccess = 0, kRuntimeFailure = 1, kConfigError = 2 };

/// Flags given before the subcommand; they override the config file.
struct GlobalOptions {
  std::optional<std::string> output_dir;
  std::optional<int> threads;
};

struct SettingReport {
  /// Empty for single-setting runs, else the subdirectory name ("sigma0.1").
  std::string label;
  experiments::ExperimentReport report;
};

/// Runs every setting of a validated config and writes, below
/// config.output_dir:
///   config.json   the effective config (rerunnable as is)
///   report.csv    one row per (setting, variant, seed)
///   report.json   config echo, version, sigma provenance, runtime, rows, aggregates
///   [<label>/]<variant>_seed<seed>/   per-cell artifacts
std::vector<SettingReport> execute(const config::RunConfig& config, std::ostream& log);

/// report.json content for a finished run.
nlohmann::json report_json(const config::RunConfig& config, const std::vector<SettingReport>& reports,
                           double runtime_seconds);

int cmd_run(const std::filesystem::path& config_path, const GlobalOptions& options, std::ostream& out,
            std::ostream& err);

/// `corrupt_requ_prime` is a test hook scaling every requ' evaluation.
int cmd_gradcheck(std::uint64_t seed, int networks, std::optional<double> corrupt_requ_prime,
                  std::ostream& out, std::ostream& err);

int cmd_list(std::ostream& out);

/// Parses argv and dispatches; returns the process exit code.
int run_main(int argc, char** argv, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace sdore::cli
