#pragma once

#include "sdore/model.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace sdore::estimators {

using model::Matrix;
using model::Vector;

/// norms[k] = sqrt(mean_i (D_k f(Z_i))^2), the empirical L2 norm of each
/// partial derivative over `sample` (one point per row).
Vector derivative_norms(const model::Ensemble& model, const Eigen::Ref<const Matrix>& sample);

enum class RuleKind { kRelative, kAbsolute, kTopK };

/// kRelative: tau = value * max_k norms[k]   (default, value = 0.1)
/// kAbsolute: tau = value
/// kTopK:     keep the `top_k` largest norms; tau is the next largest norm
struct SelectionRule {
  RuleKind kind = RuleKind::kRelative;
  double value = 0.1;
  int top_k = 0;
};

std::string to_string(RuleKind kind);
RuleKind parse_rule_kind(const std::string& name);

/// Variables are 0-based indices. relevant = { k : norms[k] > threshold }.
struct SelectionResult {
  Vector norms;
  double threshold = 0.0;
  std::vector<int> relevant;
};

SelectionResult select_variables(const Vector& norms, const SelectionRule& rule = {});

/// (FPR + FNR) / 2. Throws std::domain_error when truth is empty or every
/// variable, since one of the rates is then undefined.
double selection_error(const std::vector<int>& predicted, const std::vector<int>& truth, int dim);

using PotentialFn = std::function<double(const Eigen::Ref<const Vector>&)>;

/// f_hat = -laplacian(u_hat) + w u_hat at each query point.
struct SourceRecovery {
  Matrix query_points;
  Vector u_values;
  Vector laplacian;
  Vector w_values;
  Vector f_hat_values;
};

SourceRecovery recover_source(const model::Ensemble& u_hat, const PotentialFn& w,
                              const Eigen::Ref<const Matrix>& query_points);

/// Same, from precomputed jets. Throws CapabilityError if any jet lacks a Hessian.
SourceRecovery recover_source(const std::vector<model::Jet>& jets, const PotentialFn& w,
                              const Eigen::Ref<const Matrix>& query_points);

/// sqrt(sum (e - t)^2) / sqrt(sum t^2). Matrices (stacked gradient components)
/// are compared entrywise. Throws std::domain_error if truth is identically zero.
double rel_l2_error(const Eigen::Ref<const Matrix>& estimate, const Eigen::Ref<const Matrix>& truth);

nlohmann::json to_json(const SelectionResult& result, const std::vector<std::string>& names = {});
nlohmann::json to_json(const SourceRecovery& recovery);

/// CSV with columns x1..xd,u_hat,laplacian,w,f_hat[,extra columns].
void write_recovery_csv(const SourceRecovery& recovery, const std::filesystem::path& path);

}  // namespace sdore::estimators
