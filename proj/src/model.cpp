#include "sdore/model.hpp"

#include "sdore/errors.hpp"

#include <algorithm>
#include <string>

namespace sdore::model {

BoundEnsemble bind(Tape& tape, const Ensemble& model, bool trainable) {
  BoundEnsemble bound;
  for (const auto& m : model.members()) bound.members.push_back(autodiff::bind(tape, m, trainable));
  if (model.size() > 1 && trainable) {
    Vector logits(model.size());
    const Vector theta = model.parameters();
    logits = theta.tail(model.size());
    bound.logits = tape.variable(logits);
    bound.alpha = tape.softmax(bound.logits);
  } else {
    bound.alpha = tape.constant(Matrix(model.alpha()));
  }
  return bound;
}

JetNodes propagate_jet(Tape& tape, const BoundEnsemble& bound, NodeId inputs, int dim, int order) {
  if (bound.members.size() == 1) {
    return autodiff::propagate_jet(tape, bound.members.front(), inputs, dim, order);
  }
  JetNodes out;
  for (std::size_t k = 0; k < bound.members.size(); ++k) {
    const JetNodes member = autodiff::propagate_jet(tape, bound.members[k], inputs, dim, order);
    const NodeId weight = tape.entry(bound.alpha, static_cast<Eigen::Index>(k));
    auto fold = [&](NodeId acc, NodeId term) {
      if (!term.valid()) return acc;
      const NodeId scaled = tape.scale_by(term, weight);
      return acc.valid() ? tape.add(acc, scaled) : scaled;
    };
    out.value = fold(out.value, member.value);
    out.grad = fold(out.grad, member.grad);
    out.hess = fold(out.hess, member.hess);
    out.dim = member.dim;
    out.points = member.points;
  }
  return out;
}

Vector gradient_vector(const autodiff::Gradients& grads, const BoundEnsemble& bound,
                       const Ensemble& model) {
  Vector g(model.parameter_count());
  Eigen::Index at = 0;
  for (const auto& member : bound.members) {
    for (std::size_t l = 0; l < member.weights.size(); ++l) {
      const Matrix& gw = grads[member.weights[l]];
      g.segment(at, gw.size()) = Eigen::Map<const Vector>(gw.data(), gw.size());
      at += gw.size();
      const Matrix& gb = grads[member.biases[l]];
      g.segment(at, gb.size()) = Eigen::Map<const Vector>(gb.data(), gb.size());
      at += gb.size();
    }
  }
  if (model.size() > 1) {
    if (!bound.logits.valid()) throw ContractViolation("gradient_vector needs a trainable binding");
    g.tail(model.size()) = grads[bound.logits].col(0);
  }
  return g;
}

namespace {

constexpr Eigen::Index kChunk = 1024;

void check_width(int expected, Eigen::Index got) {
  if (got != expected) {
    throw ContractViolation("points have " + std::to_string(got) + " columns, model expects " +
                            std::to_string(expected));
  }
}

template <typename Sink>
void for_each_chunk(const Ensemble& model, const Eigen::Ref<const Matrix>& X, int order, Sink sink) {
  check_width(model.input_dim(), X.cols());
  const int d = model.input_dim();
  for (Eigen::Index start = 0; start < X.rows(); start += kChunk) {
    const Eigen::Index count = std::min(kChunk, X.rows() - start);
    Tape tape;
    const BoundEnsemble bound = bind(tape, model, false);
    const NodeId inputs = tape.constant(X.middleRows(start, count).transpose());
    const JetNodes nodes = propagate_jet(tape, bound, inputs, d, order);
    sink(tape, nodes, start, count);
  }
}

}  // namespace

std::vector<Jet> predict_jet(const Ensemble& model, const Eigen::Ref<const Matrix>& X, int order) {
  std::vector<Jet> jets;
  jets.reserve(X.rows());
  for_each_chunk(model, X, order,
                 [&](const Tape& tape, const JetNodes& nodes, Eigen::Index, Eigen::Index count) {
                   for (Eigen::Index i = 0; i < count; ++i) {
                     jets.push_back(autodiff::extract_jet(tape, nodes, i));
                   }
                 });
  return jets;
}

std::vector<Jet> predict_jet(const ReQUNetwork& net, const Eigen::Ref<const Matrix>& X, int order) {
  return predict_jet(Ensemble(net), X, order);
}

JetBatch predict_jet_batch(const Ensemble& model, const Eigen::Ref<const Matrix>& X, int order) {
  const int d = model.input_dim();
  JetBatch out;
  out.value.resize(X.rows());
  if (order >= 1) out.grad.resize(X.rows(), d);
  if (order >= 2) out.laplacian.resize(X.rows());
  for_each_chunk(
      model, X, order,
      [&](const Tape& tape, const JetNodes& nodes, Eigen::Index start, Eigen::Index count) {
        out.value.segment(start, count) = tape.value(nodes.value).row(0).transpose();
        if (order >= 1) {
          const Matrix& g = tape.value(nodes.grad);
          for (int k = 0; k < d; ++k) {
            out.grad.col(k).segment(start, count) = g.row(0).segment(k * count, count).transpose();
          }
        }
        if (order >= 2) {
          const Matrix& h = tape.value(nodes.hess);
          Vector lap = Vector::Zero(count);
          for (int k = 0; k < d; ++k) {
            lap += h.row(0).segment(autodiff::pair_index(k, k, d) * count, count).transpose();
          }
          out.laplacian.segment(start, count) = lap;
        }
      });
  return out;
}

}  // namespace sdore::model
