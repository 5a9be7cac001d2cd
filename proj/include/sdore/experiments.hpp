#pragma once

#include "sdore/estimators.hpp"
#include "sdore/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace sdore::experiments {

using model::Matrix;
using model::Vector;
using training::LabeledSet;
using training::UnlabeledSet;

using ScalarFn = std::function<double(const Eigen::Ref<const Vector>&)>;
using GradientFn = std::function<Vector(const Eigen::Ref<const Vector>&)>;
/// Draws n points (rows) from a covariate distribution.
using Sampler = std::function<Matrix(std::mt19937_64&, Eigen::Index)>;

/// Exactly one of sigma (absolute noise sd) or snr.
struct NoiseSpec {
  std::optional<double> sigma;
  std::optional<double> snr;
};

/// A fixed table of labeled rows (CSV datasets). Generators leave it empty.
struct FixedData {
  LabeledSet data;
  std::vector<std::string> feature_names;
  /// Fraction of rows held out as the test set for each seed.
  double test_fraction = 0.2;
  /// Fraction of the remaining rows whose labels are dropped to form the
  /// unlabeled sample.
  double unlabeled_fraction = 0.0;
};

struct ProblemSpec {
  std::string name;
  int d = 1;
  ScalarFn f0;
  GradientFn grad_f0;
  Sampler mu_sampler;
  Sampler nu_sampler;
  NoiseSpec noise;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  double lambda = 0.0;
  /// True relevant variables (0-based); empty when unknown.
  std::vector<int> relevant;
  /// Inverse problems: potential w and true source f*.
  ScalarFn potential;
  ScalarFn source;
  /// Points where err(f0) and err(grad f0) are measured. Defaults to 10^4
  /// draws from mu.
  std::function<Matrix()> eval_points;
  /// Points where the recovered source is compared with `source`.
  std::function<Matrix()> source_points;
  /// Points written to curve.csv. Defaults to the first 500 eval points.
  std::function<Matrix()> plot_points;
  std::optional<FixedData> fixed;

  /// Throws ContractViolation on an inconsistent spec.
  void validate() const;
};

/// One seed's data.
struct ProblemData {
  LabeledSet labeled;
  UnlabeledSet unlabeled;
  /// Held-out rows of a fixed dataset; empty for generated problems.
  LabeledSet test;
  double sigma = 0.0;
};

/// Noise level and how it was derived.
struct SigmaInfo {
  double sigma = 0.0;
  std::string provenance;
};

/// sigma as given, or sd(f0) over 10^5 draws from mu (fixed stream,
/// independent of the run seed) divided by the SNR.
SigmaInfo resolve_sigma(const ProblemSpec& spec);

/// Pure function of (spec, seed).
ProblemData generate(const ProblemSpec& spec, std::uint64_t seed);
ProblemData generate(const ProblemSpec& spec, std::uint64_t seed, double sigma);

/// Fresh labeled draws for test set `index` of a seed.
LabeledSet test_set(const ProblemSpec& spec, std::uint64_t seed, int index, Eigen::Index size,
                    double sigma);

/// 64-bit value derived from (seed, stream); used for init and test seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Built-in problem specs. Data for a seed comes from generate(spec, seed).
ProblemSpec example_1d(Eigen::Index n = 500, Eigen::Index m = 5000);
ProblemSpec example_selection(Eigen::Index n = 100, Eigen::Index m = 1000);
ProblemSpec example_inverse(Eigen::Index n = 10000, double sigma = 0.1, Eigen::Index m = 10000);
ProblemSpec appendix_toy(Eigen::Index n = 1000, Eigen::Index m = 1000);
ProblemSpec appendix_sim(Eigen::Index n = 1000, Eigen::Index m = 1000);
ProblemSpec csv_selection(FixedData data);

struct Generated {
  ProblemSpec spec;
  ProblemData data;
};
Generated gen_example_1d(Eigen::Index n, Eigen::Index m, std::uint64_t seed);
Generated gen_example_selection(Eigen::Index n, Eigen::Index m, std::uint64_t seed);
Generated gen_example_inverse(Eigen::Index n, std::uint64_t seed, double sigma);
Generated gen_appendix_toy(Eigen::Index n, Eigen::Index m, std::uint64_t seed);
Generated gen_appendix_sim(Eigen::Index n, Eigen::Index m, std::uint64_t seed);

/// Reads a headered numeric CSV, standardizes every feature column (zero mean,
/// unit population variance) and appends `n_noise_features` U[0,1] columns
/// named noise1, noise2, ... Throws ParseError with row/column locations.
FixedData load_csv_dataset(const std::filesystem::path& path, const std::string& target_column,
                           int n_noise_features, std::uint64_t noise_seed);

/// One training configuration compared across seeds.
struct VariantSpec {
  std::string name;
  training::LossSpec loss;
  /// DORE only: draw this many penalty points from nu per seed instead of
  /// penalizing the labeled covariates.
  std::optional<Eigen::Index> nu_sample;
};

struct EvalConfig {
  std::vector<int> hidden = {64, 64};
  int ensemble_size = 1;
  training::TrainConfig train;
  int test_sets = 1;
  Eigen::Index test_size = 1000;
  estimators::SelectionRule rule;
  int threads = 1;
  /// When set, per-cell artifacts are written below this directory.
  std::optional<std::filesystem::path> output_dir;
};

/// Metrics for one (variant, seed) cell. NaN marks "not applicable".
struct ReportRow {
  std::string variant;
  std::string loss;
  double lambda = 0.0;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double rmse_std = 0.0;
  double err_f = 0.0;
  double err_grad = 0.0;
  double err_source = 0.0;
  double selection_error = 0.0;
  double selection_error_test = 0.0;
  std::vector<int> selected;
  Vector norms;
  double final_loss = 0.0;
  Eigen::Index nonzero_params = 0;
};

struct Aggregate {
  std::string variant;
  int count = 0;
  /// metric name -> (mean, sample sd)
  std::vector<std::pair<std::string, std::pair<double, double>>> metrics;
};

struct ExperimentReport {
  std::string problem;
  SigmaInfo sigma;
  std::vector<ReportRow> rows;
  std::vector<Aggregate> aggregates;
  double runtime_seconds = 0.0;
};

/// Names of the scalar metrics in report rows, in column order.
const std::vector<std::string>& metric_names();
double metric(const ReportRow& row, const std::string& name);

/// Mean and sample standard deviation (n-1; 0 for a single value) per variant,
/// NaN entries skipped. Rows are grouped in first-appearance order.
std::vector<Aggregate> aggregate(const std::vector<ReportRow>& rows);

/// Trains and evaluates every (variant, seed) cell, up to `eval.threads` at a
/// time. Rows come back sorted by (variant position, seed position) whatever
/// the completion order, and every cell is a pure function of its inputs.
ExperimentReport run_experiment(const ProblemSpec& spec, const std::vector<VariantSpec>& variants,
                                const std::vector<std::uint64_t>& seeds, const EvalConfig& eval);

/// report.csv: header plus one row per cell. `prefix` columns are prepended.
void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& prefix = {});
std::string report_csv_header();
std::string report_csv_line(const ReportRow& row);
nlohmann::json to_json(const ReportRow& row);
nlohmann::json to_json(const Aggregate& agg);

/// Least-squares slope of log(error) against log(n).
double rate_slope(const std::vector<double>& ns, const std::vector<double>& errors);

/// (X^T X / n + lambda I)^{-1} X^T y / n by LU. Throws std::domain_error if
/// the system is singular.
Vector ridge_oracle(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, double lambda);

}  // namespace sdore::experiments
