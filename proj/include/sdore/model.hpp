#pragma once

#include "sdore/jet.hpp"
#include "sdore/network.hpp"
#include "sdore/tape.hpp"

#include <filesystem>
#include <vector>

namespace sdore::model {

using autodiff::Jet;
using autodiff::JetNodes;
using autodiff::NodeId;
using autodiff::Tape;

/// An ensemble registered on a tape. `alpha` is a K x 1 node: softmax of
/// trainable logits when K > 1 and trainable, otherwise a constant.
struct BoundEnsemble {
  std::vector<autodiff::BoundNetwork> members;
  NodeId logits;
  NodeId alpha;
};

BoundEnsemble bind(Tape& tape, const Ensemble& model, bool trainable);

/// alpha-weighted combination of member jets.
JetNodes propagate_jet(Tape& tape, const BoundEnsemble& bound, NodeId inputs, int dim, int order);

/// Flattens the adjoints of a trainable binding in `Ensemble::parameters()` order.
Vector gradient_vector(const autodiff::Gradients& grads, const BoundEnsemble& bound,
                       const Ensemble& model);

/// Per-point jets for the rows of X (n x d).
std::vector<Jet> predict_jet(const ReQUNetwork& net, const Eigen::Ref<const Matrix>& X, int order);
std::vector<Jet> predict_jet(const Ensemble& model, const Eigen::Ref<const Matrix>& X, int order);

/// Dense batched jets: value (n), grad (n x d), laplacian (n, only for order 2).
struct JetBatch {
  Vector value;
  Matrix grad;
  Vector laplacian;
};
JetBatch predict_jet_batch(const Ensemble& model, const Eigen::Ref<const Matrix>& X, int order);

/// Binary checkpoint; layout documented in docs/checkpoint_format.md.
void save_checkpoint(const Ensemble& model, const std::filesystem::path& path);
void save_checkpoint(const ReQUNetwork& net, const std::filesystem::path& path);
/// Throws ParseError naming the offending section, or ValidationError when the
/// decoded shapes break the chain. Never returns a partial model.
Ensemble load_checkpoint(const std::filesystem::path& path);

}  // namespace sdore::model
