#include "sdore/training.hpp"

#include "sdore/errors.hpp"
#include "sdore/format.hpp"
#include "sdore/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

namespace sdore::training {

using model::BoundEnsemble;
using model::NodeId;
using model::Tape;

void LabeledSet::validate() const {
  if (X.rows() != Y.size()) {
    throw ContractViolation("labeled set: " + std::to_string(X.rows()) + " points but " +
                            std::to_string(Y.size()) + " labels");
  }
  if (!X.allFinite() || !Y.allFinite()) throw ContractViolation("labeled set has non-finite entries");
}

void UnlabeledSet::validate() const {
  if (!Z.allFinite()) throw ContractViolation("unlabeled set has non-finite entries");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kLS: return "LS";
    case Variant::kDORE: return "DORE";
    case Variant::kSDORE: return "SDORE";
    case Variant::kSDOREPooled: return "SDORE_POOLED";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "LS") return Variant::kLS;
  if (name == "DORE") return Variant::kDORE;
  if (name == "SDORE") return Variant::kSDORE;
  if (name == "SDORE_POOLED") return Variant::kSDOREPooled;
  throw ContractViolation("unknown loss variant '" + name + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ContractViolation("learning_rate must be positive");
  if (batch_size < 1) throw ContractViolation("batch_size must be at least 1");
  if (epochs < 0) throw ContractViolation("epochs must be nonnegative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ContractViolation("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ContractViolation("adam eps must be positive");
  if (schedule != Schedule::kConstant && !(final_learning_rate > 0.0)) {
    throw ContractViolation("final_learning_rate must be positive");
  }
  if (early_stopping_patience < 0) throw ContractViolation("early_stopping_patience must be >= 0");
}

double TrainConfig::learning_rate_at(int epoch) const {
  if (schedule == Schedule::kConstant || epochs <= 1) return learning_rate;
  const double t = static_cast<double>(epoch) / (epochs - 1);
  if (schedule == Schedule::kExponential) {
    return learning_rate * std::pow(final_learning_rate / learning_rate, t);
  }
  return final_learning_rate +
         0.5 * (learning_rate - final_learning_rate) * (1.0 + std::cos(std::numbers::pi * t));
}

namespace {

NodeId mean_squared_residual(Tape& tape, NodeId predictions, const Vector& Y) {
  const NodeId target = tape.constant(Matrix(Y.transpose()));
  const NodeId r = tape.sub(predictions, target);
  return tape.scale(tape.sum(tape.hadamard(r, r)), 1.0 / static_cast<double>(Y.size()));
}

NodeId mean_gradient_norm(Tape& tape, const model::JetNodes& jet) {
  return tape.scale(tape.sum(tape.hadamard(jet.grad, jet.grad)),
                    1.0 / static_cast<double>(jet.points));
}

NodeId columns(Tape& tape, const Eigen::Ref<const Matrix>& rows) {
  return tape.constant(rows.transpose());
}

void check_batch(const BoundEnsemble& bound, const LabeledSet& batch) {
  if (batch.size() == 0) throw ContractViolation("loss on an empty labeled batch");
  if (batch.Y.size() != batch.size()) throw ContractViolation("labeled batch length mismatch");
  (void)bound;
}

LossNodes penalized(Tape& tape, const BoundEnsemble& bound, const LabeledSet& batch,
                    const Eigen::Ref<const Matrix>& points, double lambda) {
  check_batch(bound, batch);
  if (!(lambda >= 0.0)) throw ContractViolation("lambda must be nonnegative");
  const int d = batch.dim();
  LossNodes out;
  if (lambda == 0.0) {
    out.fit = loss_ls(tape, bound, batch);
    out.total = out.fit;
    return out;
  }
  if (points.rows() == 0) throw ContractViolation("empty penalty batch with lambda > 0");
  if (points.cols() != d) throw ContractViolation("penalty points have the wrong dimension");
  const auto fit_jet = model::propagate_jet(tape, bound, columns(tape, batch.X), d, 0);
  out.fit = mean_squared_residual(tape, fit_jet.value, batch.Y);
  const auto pen_jet = model::propagate_jet(tape, bound, columns(tape, points), d, 1);
  out.penalty = tape.scale(mean_gradient_norm(tape, pen_jet), lambda);
  out.total = tape.add(out.fit, out.penalty);
  return out;
}

}  // namespace

NodeId loss_ls(Tape& tape, const BoundEnsemble& bound, const LabeledSet& batch) {
  check_batch(bound, batch);
  const auto jet = model::propagate_jet(tape, bound, columns(tape, batch.X), batch.dim(), 0);
  return mean_squared_residual(tape, jet.value, batch.Y);
}

LossNodes loss_sdore(Tape& tape, const BoundEnsemble& bound, const LabeledSet& batch,
                     const UnlabeledSet& penalty_batch, double lambda) {
  return penalized(tape, bound, batch, penalty_batch.Z, lambda);
}

LossNodes loss_dore(Tape& tape, const BoundEnsemble& bound, const LabeledSet& batch,
                    const Eigen::Ref<const Matrix>& nu_points, double lambda) {
  return penalized(tape, bound, batch, nu_points, lambda);
}

LossValue evaluate_loss(const model::Ensemble& model, const LabeledSet& batch,
                        const Matrix* penalty_points, double lambda) {
  Tape tape;
  const auto bound = model::bind(tape, model, false);
  const Matrix empty(0, batch.dim());
  const LossNodes nodes =
      penalized(tape, bound, batch, penalty_points ? *penalty_points : empty, lambda);
  LossValue v;
  v.total = tape.scalar(nodes.total);
  v.fit = tape.scalar(nodes.fit);
  v.penalty = nodes.penalty.valid() ? tape.scalar(nodes.penalty) : 0.0;
  return v;
}

AdamState AdamState::start(Vector params) {
  AdamState s;
  s.m = Vector::Zero(params.size());
  s.v = Vector::Zero(params.size());
  s.params = std::move(params);
  return s;
}

void adam_step(AdamState& state, const Vector& grads, const AdamParams& p) {
  if (grads.size() != state.params.size() || state.m.size() != state.params.size() ||
      state.v.size() != state.params.size()) {
    throw ContractViolation("adam_step: gradient has " + std::to_string(grads.size()) +
                            " entries, state has " + std::to_string(state.params.size()));
  }
  state.step += 1;
  state.m = p.beta1 * state.m + (1.0 - p.beta1) * grads;
  state.v = p.beta2 * state.v + (1.0 - p.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(p.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(p.beta2, static_cast<double>(state.step));
  state.params.array() -=
      p.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + p.eps);
}

namespace {

std::vector<Eigen::Index> identity_order(Eigen::Index n) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  return order;
}

Matrix gather_rows(const Matrix& src, const std::vector<Eigen::Index>& order, std::size_t begin,
                   std::size_t count) {
  Matrix out(static_cast<Eigen::Index>(count), src.cols());
  for (std::size_t i = 0; i < count; ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(order[begin + i]);
  return out;
}

/// Shuffled, independently cycling minibatch stream over a point set.
class PointStream {
 public:
  PointStream(const Matrix& points, std::size_t batch, std::uint64_t seed)
      : points_(points), batch_(std::min<std::size_t>(batch, static_cast<std::size_t>(points.rows()))),
        rng_(stream_rng(seed, 2)),
        order_(identity_order(points.rows())) {
    reshuffle();
  }

  Matrix next() {
    if (pos_ + batch_ > order_.size()) reshuffle();
    Matrix out = gather_rows(points_, order_, pos_, batch_);
    pos_ += batch_;
    return out;
  }

 private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  const Matrix& points_;
  std::size_t batch_;
  std::mt19937_64 rng_;
  std::vector<Eigen::Index> order_;
  std::size_t pos_ = 0;
};

}  // namespace

TrainResult train(model::Ensemble initial, const LabeledSet& labeled, const UnlabeledSet* unlabeled,
                  const LossSpec& spec, const TrainConfig& config) {
  config.validate();
  labeled.validate();
  initial.validate();
  if (labeled.size() == 0) throw ContractViolation("training needs at least one labeled pair");
  if (labeled.dim() != initial.input_dim()) {
    throw ContractViolation("labeled data dimension does not match the model input width");
  }
  if (unlabeled) {
    unlabeled->validate();
    if (unlabeled->size() > 0 && unlabeled->dim() != labeled.dim()) {
      throw ContractViolation("unlabeled data dimension does not match labeled data");
    }
  }
  if (!(spec.lambda >= 0.0)) throw ContractViolation("lambda must be nonnegative");

  const bool penalize = spec.variant != Variant::kLS && spec.lambda > 0.0;
  bool penalty_on_batch = false;
  Matrix pooled;
  const Matrix* penalty_points = nullptr;
  if (spec.variant == Variant::kDORE) {
    if (spec.nu_points) {
      penalty_points = &*spec.nu_points;
    } else {
      penalty_on_batch = true;
    }
  } else if (spec.variant == Variant::kSDORE || spec.variant == Variant::kSDOREPooled) {
    if (!unlabeled || unlabeled->size() == 0) {
      throw ContractViolation(to_string(spec.variant) + " requires an unlabeled set");
    }
    if (spec.variant == Variant::kSDORE) {
      penalty_points = &unlabeled->Z;
    } else {
      pooled.resize(labeled.size() + unlabeled->size(), labeled.dim());
      pooled << labeled.X, unlabeled->Z;
      penalty_points = &pooled;
    }
  }
  if (penalize && penalty_points && penalty_points->rows() == 0) {
    throw ContractViolation("empty penalty point set with lambda > 0");
  }

  const auto batch = static_cast<std::size_t>(config.batch_size);
  std::mt19937_64 shuffle_rng = stream_rng(config.seed, 1);
  std::optional<PointStream> stream;
  if (penalize && penalty_points) {
    stream.emplace(*penalty_points, batch, config.seed);
  }

  TrainResult result{std::move(initial), {}};
  model::Ensemble& model = result.model;
  AdamState state = AdamState::start(model.parameters());
  std::vector<Eigen::Index> order = identity_order(labeled.size());

  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const AdamParams adam{config.learning_rate_at(epoch), config.beta1, config.beta2, config.eps};
    EpochRecord record{epoch};
    int steps = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t count = std::min(batch, order.size() - start);
      LabeledSet mb;
      mb.X = gather_rows(labeled.X, order, start, count);
      mb.Y.resize(static_cast<Eigen::Index>(count));
      for (std::size_t i = 0; i < count; ++i) mb.Y(static_cast<Eigen::Index>(i)) = labeled.Y(order[start + i]);

      Tape tape;
      const auto bound = model::bind(tape, model, true);
      LossNodes loss;
      if (!penalize) {
        loss.fit = loss_ls(tape, bound, mb);
        loss.total = loss.fit;
      } else if (penalty_on_batch) {
        const auto jet = model::propagate_jet(tape, bound, columns(tape, mb.X), mb.dim(), 1);
        loss.fit = mean_squared_residual(tape, jet.value, mb.Y);
        loss.penalty = tape.scale(mean_gradient_norm(tape, jet), spec.lambda);
        loss.total = tape.add(loss.fit, loss.penalty);
      } else {
        loss = loss_dore(tape, bound, mb, stream->next(), spec.lambda);
      }

      const auto grads = tape.backward(loss.total);
      const Vector g = model::gradient_vector(grads, bound, model);
      if (config.optimizer == Optimizer::kAdam) {
        adam_step(state, g, adam);
      } else {
        state.params -= adam.learning_rate * g;
        state.step += 1;
      }
      model.set_parameters(state.params);

      record.total_loss += tape.scalar(loss.total);
      record.fit_term += tape.scalar(loss.fit);
      record.penalty_term += loss.penalty.valid() ? tape.scalar(loss.penalty) : 0.0;
      ++steps;
    }
    record.total_loss /= steps;
    record.fit_term /= steps;
    record.penalty_term /= steps;
    result.history.push_back(record);

    if (config.early_stopping_patience > 0) {
      if (record.total_loss < best) {
        best = record.total_loss;
        since_best = 0;
      } else if (++since_best >= config.early_stopping_patience) {
        break;
      }
    }
  }
  return result;
}

void write_history_csv(const std::vector<EpochRecord>& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history: " + path.string());
  out << "epoch,total_loss,fit_term,penalty_term\n";
  for (const auto& r : history) {
    out << r.epoch << ',' << format_double(r.total_loss) << ',' << format_double(r.fit_term) << ','
        << format_double(r.penalty_term) << '\n';
  }
}

}  // namespace sdore::training
