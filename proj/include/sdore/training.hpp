#pragma once

#include "sdore/model.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sdore::training {

using model::Matrix;
using model::Vector;

/// n labeled pairs; X is n x d, one row per point.
struct LabeledSet {
  Matrix X;
  Vector Y;

  Eigen::Index size() const { return X.rows(); }
  int dim() const { return static_cast<int>(X.cols()); }
  /// Throws ContractViolation on mismatched lengths or non-finite entries.
  void validate() const;
};

/// m unlabeled covariates; Z is m x d.
struct UnlabeledSet {
  Matrix Z;

  Eigen::Index size() const { return Z.rows(); }
  int dim() const { return static_cast<int>(Z.cols()); }
  void validate() const;
};

enum class Variant { kLS, kDORE, kSDORE, kSDOREPooled };

std::string to_string(Variant v);
/// Accepts "LS", "DORE", "SDORE", "SDORE_POOLED". Throws ContractViolation.
Variant parse_variant(const std::string& name);

/// Which objective to minimize.
///
///   LS           (1/n) sum (f(X_i) - Y_i)^2
///   DORE         LS + lambda * mean_{p in P} |grad f(p)|^2, P = nu_points if
///                given, otherwise the labeled covariates
///   SDORE        LS + lambda * mean over the unlabeled sample
///   SDORE_POOLED LS + lambda * mean over labeled and unlabeled covariates
struct LossSpec {
  Variant variant = Variant::kSDORE;
  double lambda = 0.0;
  std::optional<Matrix> nu_points;
};

enum class Optimizer { kAdam, kGradientDescent };
enum class Schedule { kConstant, kExponential, kCosine };

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 128;
  int epochs = 1000;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Optimizer optimizer = Optimizer::kAdam;
  Schedule schedule = Schedule::kConstant;
  /// Learning rate reached at the last epoch for non-constant schedules.
  double final_learning_rate = 1e-6;
  /// Stop when the epoch loss has not improved for this many epochs; 0 = off.
  int early_stopping_patience = 0;

  void validate() const;
  double learning_rate_at(int epoch) const;
};

/// Scalar loss nodes. `penalty` is the lambda-weighted term and is invalid when
/// lambda = 0 (the objective is then exactly the fit term).
struct LossNodes {
  model::NodeId total;
  model::NodeId fit;
  model::NodeId penalty;
};

/// Mean squared residual over the batch. Throws on an empty batch.
model::NodeId loss_ls(model::Tape& tape, const model::BoundEnsemble& bound, const LabeledSet& batch);

/// loss_ls + lambda * mean over Z of the squared input-gradient norm.
LossNodes loss_sdore(model::Tape& tape, const model::BoundEnsemble& bound, const LabeledSet& batch,
                     const UnlabeledSet& penalty_batch, double lambda);

/// Same form as loss_sdore with the penalty averaged over a fixed point set
/// representing the penalty measure.
LossNodes loss_dore(model::Tape& tape, const model::BoundEnsemble& bound, const LabeledSet& batch,
                    const Eigen::Ref<const Matrix>& nu_points, double lambda);

/// Convenience: evaluates a loss without keeping the tape.
struct LossValue {
  double total = 0.0;
  double fit = 0.0;
  double penalty = 0.0;
};
LossValue evaluate_loss(const model::Ensemble& model, const LabeledSet& batch,
                        const Matrix* penalty_points, double lambda);

struct AdamParams {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Vector params;
  Vector m;
  Vector v;
  std::int64_t step = 0;

  static AdamState start(Vector params);
};

/// One bias-corrected Adam update. Throws ContractViolation on shape mismatch.
void adam_step(AdamState& state, const Vector& grads, const AdamParams& params);

struct EpochRecord {
  int epoch = 0;
  double total_loss = 0.0;
  double fit_term = 0.0;
  double penalty_term = 0.0;
};

struct TrainResult {
  model::Ensemble model;
  std::vector<EpochRecord> history;
};

/// Minibatch training. The labeled set is reshuffled every epoch; penalty
/// points come from an independent shuffled stream of the same batch size
/// that cycles on its own. Fully determined by (model, data, spec, config).
TrainResult train(model::Ensemble initial, const LabeledSet& labeled,
                  const UnlabeledSet* unlabeled, const LossSpec& spec, const TrainConfig& config);

/// CSV with header epoch,total_loss,fit_term,penalty_term.
void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path);

}  // namespace sdore::training
