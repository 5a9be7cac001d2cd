#include "sdore/cli.hpp"

#include "sdore/errors.hpp"
#include "sdore/format.hpp"
#include "sdore/gradcheck.hpp"
#include "sdore/tape.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace sdore::cli {

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

std::string describe_noise(const config::ProblemConfig& p) {
  if (p.csv) return "csv=" + p.csv->path + " target=" + p.csv->target +
                    " noise_features=" + std::to_string(p.csv->noise_features);
  std::string s = "n=" + std::to_string(p.n) + " m=" + std::to_string(p.m);
  if (p.snr) return s + " snr=" + format_double(*p.snr);
  s += " sigma=";
  for (std::size_t i = 0; i < p.sigma.size(); ++i) s += (i ? "," : "") + format_double(p.sigma[i]);
  return s;
}

}  // namespace

std::string version() { return SDORE_VERSION; }

nlohmann::json report_json(const config::RunConfig& config, const std::vector<SettingReport>& reports,
                           double runtime_seconds) {
  nlohmann::json j;
  j["experiment"] = config.experiment;
  j["version"] = version();
  j["config"] = config::emit_config(config);
  j["runtime_seconds"] = runtime_seconds;
  j["settings"] = nlohmann::json::array();
  for (const auto& s : reports) {
    nlohmann::json e;
    e["label"] = s.label;
    e["problem"] = s.report.problem;
    e["sigma"] = s.report.sigma.sigma;
    e["sigma_provenance"] = s.report.sigma.provenance;
    e["runtime_seconds"] = s.report.runtime_seconds;
    e["rows"] = nlohmann::json::array();
    for (const auto& row : s.report.rows) e["rows"].push_back(experiments::to_json(row));
    e["aggregates"] = nlohmann::json::array();
    for (const auto& agg : s.report.aggregates) e["aggregates"].push_back(experiments::to_json(agg));
    j["settings"].push_back(e);
  }
  return j;
}

std::vector<SettingReport> execute(const config::RunConfig& config, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const auto settings = config::build_settings(config);
  const auto variants = config::build_variants(config);
  const std::filesystem::path root(config.output_dir);
  std::filesystem::create_directories(root);
  write_text(root / "config.json", config::emit_config(config).dump(2) + "\n");

  std::vector<SettingReport> reports;
  for (const auto& setting : settings) {
    auto eval = config::build_eval(config);
    eval.output_dir = setting.label.empty() ? root : root / setting.label;
    log << config.experiment << (setting.label.empty() ? "" : " " + setting.label) << ": " << variants.size()
        << " variant(s) x " << config.seeds.size() << " seed(s)" << std::endl;
    reports.push_back({setting.label, experiments::run_experiment(setting.spec, variants, config.seeds, eval)});
    const auto& r = reports.back().report;
    log << "  sigma = " << format_double(r.sigma.sigma) << " (" << r.sigma.provenance << ")" << std::endl;
    for (const auto& agg : r.aggregates) {
      log << "  " << agg.variant;
      for (const auto& [name, ms] : agg.metrics) {
        if (!std::isnan(ms.first) && name != "rmse_std") log << "  " << name << "=" << format_double(ms.first);
      }
      log << std::endl;
    }
  }

  std::ostringstream csv;
  csv << "sigma," << experiments::report_csv_header() << '\n';
  for (const auto& s : reports) {
    for (const auto& row : s.report.rows) {
      csv << format_double(s.report.sigma.sigma) << ',' << experiments::report_csv_line(row) << '\n';
    }
  }
  write_text(root / "report.csv", csv.str());
  const double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_text(root / "report.json", report_json(config, reports, runtime).dump(2) + "\n");
  log << "wrote " << (root / "report.csv").string() << " and " << (root / "report.json").string() << std::endl;
  return reports;
}

int cmd_run(const std::filesystem::path& config_path, const GlobalOptions& options, std::ostream& out,
            std::ostream& err) {
  config::RunConfig config;
  try {
    config = config::load_config(config_path);
    if (options.output_dir) config.output_dir = *options.output_dir;
    if (options.threads) config.threads = *options.threads;
    config::validate(config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << std::endl;
    return kConfigError;
  }
  try {
    execute(config, out);
  } catch (const std::exception& e) {
    err << "run failed (" << config.experiment << ", " << config_path.string() << "): " << e.what() << std::endl;
    return kRuntimeFailure;
  }
  return kSuccess;
}

int cmd_gradcheck(std::uint64_t seed, int networks, std::optional<double> corrupt_requ_prime, std::ostream& out,
                  std::ostream& err) {
  std::optional<autodiff::testing::ScopedRequPrimeCorruption> corruption;
  if (corrupt_requ_prime) corruption.emplace(*corrupt_requ_prime);
  gradcheck::Options options;
  options.seed = seed;
  options.networks = networks;
  std::vector<gradcheck::CheckResult> results;
  try {
    results = gradcheck::run_all(options);
  } catch (const std::exception& e) {
    err << "gradcheck failed: " << e.what() << std::endl;
    return kRuntimeFailure;
  }
  std::vector<std::string> failing;
  for (const auto& r : results) {
    std::ostringstream line;
    line << std::left << std::setw(12) << r.name << " max_rel_error=" << std::setw(12) << std::scientific
         << std::setprecision(3) << r.max_error << " tol=" << std::setprecision(0) << r.tolerance
         << " cases=" << r.cases << "  " << (r.passed() ? "ok" : "FAIL");
    out << line.str() << '\n';
    if (!r.passed()) failing.push_back(r.name);
  }
  if (failing.empty()) return kSuccess;
  err << "gradcheck: failing check(s):";
  for (const auto& f : failing) err << ' ' << f;
  err << std::endl;
  return kRuntimeFailure;
}

int cmd_list(std::ostream& out) {
  for (const auto& e : config::registry()) {
    const auto& c = e.defaults;
    out << e.name << "\n  " << e.description << "\n  " << describe_noise(c.problem) << "\n  variants:";
    for (const auto& v : c.variants) out << ' ' << v.name << "(" << v.variant << ", lambda=" << format_double(v.lambda) << ")";
    out << "\n  model: hidden=[";
    for (std::size_t i = 0; i < c.hidden.size(); ++i) out << (i ? "," : "") << c.hidden[i];
    out << "] train: adam lr=" << format_double(c.train.learning_rate) << " batch=" << c.train.batch_size
        << " epochs=" << c.train.epochs << "\n  seeds=" << c.seeds.size() << " test_sets=" << c.test_sets
        << "x" << c.test_size << "\n";
  }
  out << config::registry().size() << " experiments\n";
  return kSuccess;
}

int run_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised deep Sobolev regression", "sdore"};
  app.set_version_flag("--version", version());
  GlobalOptions global;
  std::string output_dir;
  int threads = 0;
  auto* out_opt = app.add_option("--output-dir", output_dir, "Override the config's output directory");
  auto* threads_opt =
      app.add_option("--threads", threads, "Cap on concurrent training cells")->check(CLI::PositiveNumber);
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config file");
  std::string config_path;
  run->add_option("config", config_path, "Config file")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of the autodiff stack");
  std::uint64_t seed = 0;
  int networks = 100;
  double corrupt = 1.0;
  grad->add_option("--seed", seed, "Random seed");
  grad->add_option("--networks", networks, "Random networks per derivative check")->check(CLI::PositiveNumber);
  auto* corrupt_opt = grad->add_option("--corrupt-requ-prime", corrupt, "Testing hook")->group("");

  auto* list = app.add_subcommand("list", "List the built-in experiments");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run 'sdore --help' for usage" << std::endl;
    return kConfigError;
  }
  if (*out_opt) global.output_dir = output_dir;
  if (*threads_opt) global.threads = threads;

  if (*run) return cmd_run(config_path, global, out, err);
  if (*grad) {
    return cmd_gradcheck(seed, networks, *corrupt_opt ? std::optional<double>(corrupt) : std::nullopt, out, err);
  }
  if (*list) return cmd_list(out);
  return kConfigError;
}

}  // namespace sdore::cli
