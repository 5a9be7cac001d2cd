#pragma once

#include "sdore/network.hpp"
#include "sdore/tape.hpp"

#include <optional>
#include <vector>

namespace sdore::autodiff {

/// Value, input gradient, and optionally input Hessian of a scalar function at
/// one point.
struct Jet {
  double value = 0.0;
  Vector grad;
  std::optional<Matrix> hess;

  /// Trace of the Hessian. Throws CapabilityError if no Hessian was computed.
  double laplacian() const;
};

/// Variable (or constant) nodes holding one network's parameters on a tape.
struct BoundNetwork {
  std::vector<NodeId> weights;
  std::vector<NodeId> biases;
};

/// Registers every parameter of `net`. With `trainable` false the parameters
/// are constants and receive no adjoint.
BoundNetwork bind(Tape& tape, const model::ReQUNetwork& net, bool trainable);

/// Batched jet nodes for B points.
///   value: 1 x B
///   grad : 1 x (d*B), column block k holds D_k f at the B points
///   hess : 1 x (P*B), P = d(d+1)/2, block (k,l), k <= l, in upper-triangle
///          row order holds D_k D_l f
/// Unrequested orders are left invalid.
struct JetNodes {
  NodeId value;
  NodeId grad;
  NodeId hess;
  int dim = 0;
  Eigen::Index points = 0;
};

/// Propagates values, Jacobians (J_{l+1} = diag(requ'(z_l)) A_l J_l) and, for
/// order 2, second derivatives through the network, with every intermediate on
/// the tape. `inputs` is a d x B node (one column per point).
JetNodes propagate_jet(Tape& tape, const BoundNetwork& bound, NodeId inputs, int dim, int order);

/// Index of the (k,l) pair, k <= l, in the packed upper-triangle order.
inline int pair_index(int k, int l, int dim) {
  if (k > l) std::swap(k, l);
  return k * dim - k * (k - 1) / 2 + (l - k);
}

/// Unpacks column `point` of batched jet nodes into a Jet.
Jet extract_jet(const Tape& tape, const JetNodes& nodes, Eigen::Index point);

/// Jet of `net` at a single point. Throws ContractViolation on a dimension
/// mismatch or order outside 0..2.
Jet forward_jet(const model::ReQUNetwork& net, const Eigen::Ref<const Vector>& x, int order);

}  // namespace sdore::autodiff
