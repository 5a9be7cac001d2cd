#pragma once

#include "sdore/experiments.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sdore::config {

/// CSV dataset source for the csv_selection experiment.
struct CsvConfig {
  std::string path;
  std::string target;
  int noise_features = 7;
  std::uint64_t noise_seed = 0;
  double test_fraction = 0.2;
  double unlabeled_fraction = 0.0;

  friend bool operator==(const CsvConfig&, const CsvConfig&) = default;
};

/// Overrides of the built-in problem. Exactly one of snr or sigma is set for
/// generated problems; sigma may list several levels, each run separately.
struct ProblemConfig {
  std::int64_t n = 0;
  std::int64_t m = 0;
  std::optional<double> snr;
  std::vector<double> sigma;
  std::optional<CsvConfig> csv;

  friend bool operator==(const ProblemConfig&, const ProblemConfig&) = default;
};

struct VariantConfig {
  std::string name;
  /// "LS", "DORE", "SDORE" or "SDORE_POOLED".
  std::string variant;
  double lambda = 0.0;
  std::optional<std::int64_t> nu_sample;

  friend bool operator==(const VariantConfig&, const VariantConfig&) = default;
};

struct SelectionConfig {
  std::string rule = "relative";
  double value = 0.1;
  int top_k = 0;

  friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

struct RunConfig {
  std::string experiment;
  ProblemConfig problem;
  std::vector<VariantConfig> variants;
  std::vector<int> hidden = {64, 64};
  int ensemble_size = 1;
  training::TrainConfig train;
  std::vector<std::uint64_t> seeds;
  int test_sets = 1;
  std::int64_t test_size = 1000;
  SelectionConfig selection;
  std::string output_dir = "out";
  int threads = 1;

  friend bool operator==(const RunConfig& a, const RunConfig& b);
};

struct RegistryEntry {
  std::string name;
  std::string description;
  RunConfig defaults;
};

/// The built-in experiments, in listing order.
const std::vector<RegistryEntry>& registry();

/// Defaults of a built-in experiment. Throws ConfigError("experiment", ...).
RunConfig default_config(const std::string& experiment);

/// Starts from the experiment defaults and applies every field present in `j`.
/// Unknown keys, wrong types, missing required fields and out-of-range values
/// throw ConfigError naming the field path (e.g. "variants[0].lambda").
RunConfig parse_config(const nlohmann::json& j);
/// Reads and parses a JSON file; unreadable or malformed files throw ConfigError.
RunConfig load_config(const std::filesystem::path& path);
/// Full, explicit serialization: parse_config(emit_config(c)) == c.
nlohmann::json emit_config(const RunConfig& config);

/// Checks ranges and cross-field consistency. Throws ConfigError.
void validate(const RunConfig& config);

/// One problem instance to run: a config with several sigma levels expands
/// into one setting per level.
struct Setting {
  /// Empty for a single setting; otherwise "sigma<value>".
  std::string label;
  experiments::ProblemSpec spec;
};
std::vector<Setting> build_settings(const RunConfig& config);
std::vector<experiments::VariantSpec> build_variants(const RunConfig& config);
experiments::EvalConfig build_eval(const RunConfig& config);

std::string to_string(training::Optimizer o);
std::string to_string(training::Schedule s);

}  // namespace sdore::config
