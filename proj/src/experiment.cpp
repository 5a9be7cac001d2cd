#include "sdore/errors.hpp"
#include "sdore/experiments.hpp"
#include "sdore/format.hpp"
#include "sdore/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace sdore::experiments {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vector evaluate(const ScalarFn& f, const Matrix& X) {
  Vector y(X.rows());
  Vector x(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    x = X.row(i).transpose();
    y(i) = f(x);
  }
  return y;
}

Matrix evaluate_grad(const GradientFn& g, const Matrix& X) {
  Matrix G(X.rows(), X.cols());
  Vector x(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    x = X.row(i).transpose();
    G.row(i) = g(x).transpose();
  }
  return G;
}

double rmse(const model::Ensemble& model, const LabeledSet& set) {
  const Vector r = model::predict(model, set.X) - set.Y;
  return std::sqrt(r.squaredNorm() / static_cast<double>(r.size()));
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  if (v.empty()) return {kNaN, kNaN};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<std::string> variable_names(const ProblemSpec& spec) {
  if (spec.fixed && !spec.fixed->feature_names.empty()) return spec.fixed->feature_names;
  std::vector<std::string> names;
  for (int k = 0; k < spec.d; ++k) names.push_back("x" + std::to_string(k + 1));
  return names;
}

void write_curve(const ProblemSpec& spec, const model::Ensemble& model, const Matrix& P,
                 const std::filesystem::path& path) {
  const auto jets = model::predict_jet_batch(model, P, 1);
  const bool truth = static_cast<bool>(spec.f0);
  const bool truth_grad = static_cast<bool>(spec.grad_f0);
  const Vector f = truth ? evaluate(spec.f0, P) : Vector();
  const Matrix g = truth_grad ? evaluate_grad(spec.grad_f0, P) : Matrix();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto d = P.cols();
  for (Eigen::Index k = 0; k < d; ++k) out << 'x' << k + 1 << ',';
  if (truth) out << "truth,";
  out << "estimate";
  for (Eigen::Index k = 0; k < d; ++k) {
    if (truth_grad) out << ",d" << k + 1 << "_truth";
    out << ",d" << k + 1 << "_estimate";
  }
  out << '\n';
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) out << format_double(P(i, k)) << ',';
    if (truth) out << format_double(f(i)) << ',';
    out << format_double(jets.value(i));
    for (Eigen::Index k = 0; k < d; ++k) {
      if (truth_grad) out << ',' << format_double(g(i, k));
      out << ',' << format_double(jets.grad(i, k));
    }
    out << '\n';
  }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ReportRow run_cell(const ProblemSpec& spec, const VariantSpec& variant, std::uint64_t seed, double sigma,
                   const EvalConfig& eval) {
  const ProblemData data = generate(spec, seed, sigma);
  std::vector<int> dims{spec.d};
  dims.insert(dims.end(), eval.hidden.begin(), eval.hidden.end());
  dims.push_back(1);
  const auto init = model::init_ensemble(dims, eval.ensemble_size, derive_seed(seed, 20));
  training::TrainConfig tc = eval.train;
  tc.seed = seed;
  const UnlabeledSet* unlabeled = data.unlabeled.size() > 0 ? &data.unlabeled : nullptr;
  training::LossSpec loss = variant.loss;
  if (variant.nu_sample && loss.variant == training::Variant::kDORE && !spec.fixed) {
    auto rng = stream_rng(seed, 14);
    loss.nu_points = spec.nu_sampler(rng, *variant.nu_sample);
  }
  const auto result = training::train(init, data.labeled, unlabeled, loss, tc);
  const model::Ensemble& fitted = result.model;

  ReportRow row;
  row.variant = variant.name;
  row.loss = training::to_string(variant.loss.variant);
  row.lambda = variant.loss.lambda;
  row.seed = seed;
  row.final_loss = result.history.empty() ? kNaN : result.history.back().total_loss;
  row.nonzero_params = 0;
  for (const auto& member : fitted.members()) row.nonzero_params += member.nonzero_count();

  const bool has_truth_sets = !spec.fixed;
  const bool selection_defined =
      !spec.relevant.empty() && static_cast<int>(spec.relevant.size()) < spec.d;

  // Held-out error.
  std::vector<double> rmses;
  std::vector<double> test_selection;
  if (has_truth_sets) {
    for (int t = 0; t < eval.test_sets; ++t) {
      const auto ts = test_set(spec, seed, t, eval.test_size, sigma);
      rmses.push_back(rmse(fitted, ts));
      if (selection_defined) {
        const auto sel = estimators::select_variables(estimators::derivative_norms(fitted, ts.X), eval.rule);
        test_selection.push_back(estimators::selection_error(sel.relevant, spec.relevant, spec.d));
      }
    }
  } else if (data.test.size() > 0) {
    rmses.push_back(rmse(fitted, data.test));
  }
  std::tie(row.rmse, row.rmse_std) = mean_sd(rmses);
  row.selection_error_test = mean_sd(test_selection).first;

  // Function and gradient error against the truth.
  row.err_f = kNaN;
  row.err_grad = kNaN;
  if (spec.f0 && !spec.fixed) {
    Matrix E;
    if (spec.eval_points) {
      E = spec.eval_points();
    } else {
      auto rng = stream_rng(seed, 13);
      E = spec.mu_sampler(rng, 10000);
    }
    const auto jets = model::predict_jet_batch(fitted, E, 1);
    row.err_f = estimators::rel_l2_error(jets.value, evaluate(spec.f0, E));
    if (spec.grad_f0) row.err_grad = estimators::rel_l2_error(jets.grad, evaluate_grad(spec.grad_f0, E));
  }

  // Variable selection on the penalty sample.
  const Matrix& sample = data.unlabeled.size() > 0 ? data.unlabeled.Z : data.labeled.X;
  const auto selection = estimators::select_variables(estimators::derivative_norms(fitted, sample), eval.rule);
  row.norms = selection.norms;
  row.selected = selection.relevant;
  row.selection_error =
      selection_defined ? estimators::selection_error(selection.relevant, spec.relevant, spec.d) : kNaN;

  // Source recovery.
  row.err_source = kNaN;
  std::optional<estimators::SourceRecovery> recovery;
  if (spec.source && spec.potential && spec.source_points) {
    const Matrix Q = spec.source_points();
    recovery = estimators::recover_source(fitted, spec.potential, Q);
    row.err_source = estimators::rel_l2_error(recovery->f_hat_values, evaluate(spec.source, Q));
  }

  if (eval.output_dir) {
    const auto dir = *eval.output_dir / (variant.name + "_seed" + std::to_string(seed));
    std::filesystem::create_directories(dir);
    training::write_history_csv(result.history, dir / "history.csv");
    model::save_checkpoint(fitted, dir / "model.ckpt");
    Matrix P;
    if (spec.plot_points) {
      P = spec.plot_points();
    } else if (!spec.fixed && spec.eval_points) {
      P = spec.eval_points().topRows(500);
    } else {
      P = sample.topRows(std::min<Eigen::Index>(500, sample.rows()));
    }
    write_curve(spec, fitted, P, dir / "curve.csv");
    auto sel_json = estimators::to_json(selection, variable_names(spec));
    sel_json["rule"] = estimators::to_string(eval.rule.kind);
    if (selection_defined) {
      sel_json["true_relevant"] = spec.relevant;
      sel_json["selection_error"] = row.selection_error;
    }
    write_json(sel_json, dir / "selection.json");
    if (recovery) {
      estimators::write_recovery_csv(*recovery, dir / "recovery.csv");
      write_json(estimators::to_json(*recovery), dir / "recovery.json");
    }
  }
  return row;
}

}  // namespace

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"rmse",      "rmse_std",        "err_f",
                                              "err_grad",  "err_source",      "selection_error",
                                              "selection_error_test", "final_loss"};
  return names;
}

double metric(const ReportRow& row, const std::string& name) {
  if (name == "rmse") return row.rmse;
  if (name == "rmse_std") return row.rmse_std;
  if (name == "err_f") return row.err_f;
  if (name == "err_grad") return row.err_grad;
  if (name == "err_source") return row.err_source;
  if (name == "selection_error") return row.selection_error;
  if (name == "selection_error_test") return row.selection_error_test;
  if (name == "final_loss") return row.final_loss;
  throw ContractViolation("unknown metric '" + name + "'");
}

std::vector<Aggregate> aggregate(const std::vector<ReportRow>& rows) {
  std::vector<Aggregate> out;
  for (const auto& row : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) { return a.variant == row.variant; });
    if (it == out.end()) {
      out.push_back({row.variant, 0, {}});
      it = std::prev(out.end());
    }
    ++it->count;
  }
  for (auto& agg : out) {
    for (const auto& name : metric_names()) {
      std::vector<double> values;
      for (const auto& row : rows) {
        if (row.variant != agg.variant) continue;
        const double v = metric(row, name);
        if (!std::isnan(v)) values.push_back(v);
      }
      agg.metrics.emplace_back(name, mean_sd(values));
    }
  }
  return out;
}

ExperimentReport run_experiment(const ProblemSpec& spec, const std::vector<VariantSpec>& variants,
                                const std::vector<std::uint64_t>& seeds, const EvalConfig& eval) {
  spec.validate();
  if (variants.empty()) throw ContractViolation("run_experiment needs at least one variant");
  if (seeds.empty()) throw ContractViolation("run_experiment needs at least one seed");
  if (eval.test_sets < 0 || eval.test_size < 1) throw ContractViolation("invalid test-set protocol");
  if (eval.ensemble_size < 1) throw ContractViolation("ensemble_size must be at least 1");
  for (std::size_t i = 0; i < variants.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (variants[i].name == variants[j].name) {
        throw ContractViolation("duplicate variant name '" + variants[i].name + "'");
      }
    }
  }
  eval.train.validate();
  const auto start = std::chrono::steady_clock::now();

  ExperimentReport report;
  report.problem = spec.name;
  report.sigma = resolve_sigma(spec);

  const std::size_t cells = variants.size() * seeds.size();
  std::vector<ReportRow> rows(cells);
  std::vector<std::exception_ptr> errors(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      try {
        rows[c] = run_cell(spec, variants[c / seeds.size()], seeds[c % seeds.size()], report.sigma.sigma, eval);
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(eval.threads, static_cast<int>(cells)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  report.rows = std::move(rows);
  report.aggregates = aggregate(report.rows);
  report.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string report_csv_header() {
  std::string h = "variant,loss,lambda,seed";
  for (const auto& name : metric_names()) h += "," + name;
  h += ",nonzero_params,selected,norms";
  return h;
}

std::string report_csv_line(const ReportRow& row) {
  std::string s = row.variant + "," + row.loss + "," + format_double(row.lambda) + "," + std::to_string(row.seed);
  for (const auto& name : metric_names()) s += "," + format_double(metric(row, name));
  s += "," + std::to_string(row.nonzero_params) + ",";
  for (std::size_t i = 0; i < row.selected.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(row.selected[i] + 1);
  }
  s += ",";
  for (Eigen::Index k = 0; k < row.norms.size(); ++k) {
    if (k) s += ';';
    s += format_double(row.norms(k));
  }
  return s;
}

void write_report_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& prefix) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& [key, value] : prefix) out << key << ',';
  out << report_csv_header() << '\n';
  for (const auto& row : rows) {
    for (const auto& [key, value] : prefix) out << value << ',';
    out << report_csv_line(row) << '\n';
  }
}

namespace {

nlohmann::json number_or_null(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

}  // namespace

nlohmann::json to_json(const ReportRow& row) {
  nlohmann::json j;
  j["variant"] = row.variant;
  j["loss"] = row.loss;
  j["lambda"] = row.lambda;
  j["seed"] = row.seed;
  for (const auto& name : metric_names()) j[name] = number_or_null(metric(row, name));
  j["nonzero_params"] = row.nonzero_params;
  std::vector<int> selected;
  for (int k : row.selected) selected.push_back(k + 1);
  j["selected"] = selected;
  j["norms"] = std::vector<double>(row.norms.data(), row.norms.data() + row.norms.size());
  return j;
}

nlohmann::json to_json(const Aggregate& agg) {
  nlohmann::json j;
  j["variant"] = agg.variant;
  j["count"] = agg.count;
  for (const auto& [name, ms] : agg.metrics) {
    j["mean"][name] = number_or_null(ms.first);
    j["sd"][name] = number_or_null(ms.second);
  }
  return j;
}

double rate_slope(const std::vector<double>& ns, const std::vector<double>& errors) {
  if (ns.size() != errors.size()) throw ContractViolation("rate_slope: sizes and errors differ in length");
  if (ns.size() < 3) throw ContractViolation("rate_slope needs at least 3 sample sizes");
  const auto k = static_cast<double>(ns.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 0.0) || !(errors[i] > 0.0)) throw ContractViolation("rate_slope needs positive inputs");
    mx += std::log(ns[i]);
    my += std::log(errors[i]);
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double dx = std::log(ns[i]) - mx;
    sxy += dx * (std::log(errors[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw ContractViolation("rate_slope needs at least two distinct sizes");
  return sxy / sxx;
}

Vector ridge_oracle(const Eigen::Ref<const Matrix>& X, const Eigen::Ref<const Vector>& y, double lambda) {
  if (X.rows() != y.size() || X.rows() == 0) throw ContractViolation("ridge_oracle: X and y disagree in length");
  if (!(lambda >= 0.0)) throw ContractViolation("ridge_oracle: lambda must be nonnegative");
  const double n = static_cast<double>(X.rows());
  const Matrix A = X.transpose() * X / n + lambda * Matrix::Identity(X.cols(), X.cols());
  Eigen::FullPivLU<Matrix> lu(A);
  if (!lu.isInvertible()) throw std::domain_error("ridge_oracle: singular system (X^T X / n + lambda I)");
  return lu.solve(X.transpose() * y / n);
}

}  // namespace sdore::experiments
