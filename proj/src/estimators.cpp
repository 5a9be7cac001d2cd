#include "sdore/estimators.hpp"

#include "sdore/errors.hpp"
#include "sdore/format.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace sdore::estimators {

Vector derivative_norms(const model::Ensemble& model, const Eigen::Ref<const Matrix>& sample) {
  if (sample.rows() == 0) throw ContractViolation("derivative_norms needs a nonempty sample");
  const auto jets = model::predict_jet_batch(model, sample, 1);
  return (jets.grad.array().square().colwise().sum() / static_cast<double>(sample.rows()))
      .sqrt()
      .transpose();
}

std::string to_string(RuleKind kind) {
  switch (kind) {
    case RuleKind::kRelative: return "relative";
    case RuleKind::kAbsolute: return "absolute";
    case RuleKind::kTopK: return "top_k";
  }
  return "?";
}

RuleKind parse_rule_kind(const std::string& name) {
  if (name == "relative") return RuleKind::kRelative;
  if (name == "absolute") return RuleKind::kAbsolute;
  if (name == "top_k") return RuleKind::kTopK;
  throw ContractViolation("unknown selection rule '" + name + "'");
}

SelectionResult select_variables(const Vector& norms, const SelectionRule& rule) {
  if (!norms.allFinite()) throw ContractViolation("select_variables: non-finite norms");
  SelectionResult out;
  out.norms = norms;
  const auto d = norms.size();
  switch (rule.kind) {
    case RuleKind::kRelative:
      out.threshold = d > 0 ? rule.value * norms.maxCoeff() : 0.0;
      break;
    case RuleKind::kAbsolute:
      out.threshold = rule.value;
      break;
    case RuleKind::kTopK: {
      if (rule.top_k < 0) throw ContractViolation("top_k must be nonnegative");
      std::vector<double> sorted(norms.data(), norms.data() + d);
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      out.threshold = rule.top_k < d ? sorted[rule.top_k] : -1.0;
      break;
    }
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    if (norms(k) > out.threshold) out.relevant.push_back(static_cast<int>(k));
  }
  return out;
}

double selection_error(const std::vector<int>& predicted, const std::vector<int>& truth, int dim) {
  const std::set<int> pred(predicted.begin(), predicted.end());
  const std::set<int> real(truth.begin(), truth.end());
  for (int k : pred) {
    if (k < 0 || k >= dim) throw ContractViolation("predicted index outside [0, d)");
  }
  for (int k : real) {
    if (k < 0 || k >= dim) throw ContractViolation("true index outside [0, d)");
  }
  if (real.empty() || static_cast<int>(real.size()) == dim) {
    throw std::domain_error("selection error undefined: truth set is empty or contains every variable");
  }
  int false_pos = 0;
  int false_neg = 0;
  for (int k : pred) false_pos += real.count(k) == 0;
  for (int k : real) false_neg += pred.count(k) == 0;
  const double fpr = static_cast<double>(false_pos) / static_cast<double>(dim - real.size());
  const double fnr = static_cast<double>(false_neg) / static_cast<double>(real.size());
  return 0.5 * (fpr + fnr);
}

namespace {

Vector evaluate_potential(const PotentialFn& w, const Eigen::Ref<const Matrix>& points) {
  Vector out(points.rows());
  for (Eigen::Index i = 0; i < points.rows(); ++i) out(i) = w(points.row(i).transpose());
  return out;
}

}  // namespace

SourceRecovery recover_source(const model::Ensemble& u_hat, const PotentialFn& w,
                              const Eigen::Ref<const Matrix>& query_points) {
  const auto jets = model::predict_jet_batch(u_hat, query_points, 2);
  SourceRecovery out;
  out.query_points = query_points;
  out.u_values = jets.value;
  out.laplacian = jets.laplacian;
  out.w_values = evaluate_potential(w, query_points);
  out.f_hat_values = -out.laplacian + out.w_values.cwiseProduct(out.u_values);
  return out;
}

SourceRecovery recover_source(const std::vector<model::Jet>& jets, const PotentialFn& w,
                              const Eigen::Ref<const Matrix>& query_points) {
  if (static_cast<Eigen::Index>(jets.size()) != query_points.rows()) {
    throw ContractViolation("recover_source: one jet per query point required");
  }
  SourceRecovery out;
  out.query_points = query_points;
  out.u_values.resize(query_points.rows());
  out.laplacian.resize(query_points.rows());
  for (std::size_t i = 0; i < jets.size(); ++i) {
    out.u_values(i) = jets[i].value;
    out.laplacian(i) = jets[i].laplacian();
  }
  out.w_values = evaluate_potential(w, query_points);
  out.f_hat_values = -out.laplacian + out.w_values.cwiseProduct(out.u_values);
  return out;
}

double rel_l2_error(const Eigen::Ref<const Matrix>& estimate, const Eigen::Ref<const Matrix>& truth) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw ContractViolation("rel_l2_error: estimate and truth differ in shape");
  }
  const double denom = truth.norm();
  if (denom == 0.0) throw std::domain_error("rel_l2_error: truth has zero norm");
  return (estimate - truth).norm() / denom;
}

nlohmann::json to_json(const SelectionResult& result, const std::vector<std::string>& names) {
  nlohmann::json j;
  std::vector<double> norms(result.norms.data(), result.norms.data() + result.norms.size());
  j["norms"] = norms;
  j["threshold"] = result.threshold;
  j["relevant"] = result.relevant;
  if (!names.empty()) {
    std::vector<std::string> picked;
    for (int k : result.relevant) picked.push_back(names.at(k));
    j["names"] = names;
    j["relevant_names"] = picked;
  }
  return j;
}

nlohmann::json to_json(const SourceRecovery& recovery) {
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  nlohmann::json j;
  nlohmann::json points = nlohmann::json::array();
  for (Eigen::Index i = 0; i < recovery.query_points.rows(); ++i) {
    points.push_back(vec(recovery.query_points.row(i).transpose()));
  }
  j["query_points"] = points;
  j["u_hat"] = vec(recovery.u_values);
  j["laplacian"] = vec(recovery.laplacian);
  j["w"] = vec(recovery.w_values);
  j["f_hat"] = vec(recovery.f_hat_values);
  return j;
}

void write_recovery_csv(const SourceRecovery& recovery, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto d = recovery.query_points.cols();
  for (Eigen::Index k = 0; k < d; ++k) out << 'x' << (k + 1) << ',';
  out << "u_hat,laplacian,w,f_hat\n";
  for (Eigen::Index i = 0; i < recovery.query_points.rows(); ++i) {
    for (Eigen::Index k = 0; k < d; ++k) out << format_double(recovery.query_points(i, k)) << ',';
    out << format_double(recovery.u_values(i)) << ',' << format_double(recovery.laplacian(i)) << ','
        << format_double(recovery.w_values(i)) << ',' << format_double(recovery.f_hat_values(i))
        << '\n';
  }
}

}  // namespace sdore::estimators
