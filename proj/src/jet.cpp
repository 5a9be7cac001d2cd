#include "sdore/jet.hpp"

#include "sdore/errors.hpp"

#include <string>

namespace sdore::autodiff {

double Jet::laplacian() const {
  if (!hess) throw CapabilityError("jet was computed without second derivatives");
  return hess->trace();
}

BoundNetwork bind(Tape& tape, const model::ReQUNetwork& net, bool trainable) {
  BoundNetwork bound;
  for (int l = 0; l < net.num_layers(); ++l) {
    if (trainable) {
      bound.weights.push_back(tape.variable(net.weight(l)));
      bound.biases.push_back(tape.variable(net.bias(l)));
    } else {
      bound.weights.push_back(tape.constant(net.weight(l)));
      bound.biases.push_back(tape.constant(net.bias(l)));
    }
  }
  return bound;
}

JetNodes propagate_jet(Tape& tape, const BoundNetwork& bound, NodeId inputs, int dim, int order) {
  if (order < 0 || order > 2) throw ContractViolation("jet order must be 0, 1 or 2");
  const Matrix& x = tape.value(inputs);
  if (x.rows() != dim) {
    throw ContractViolation("jet inputs have " + std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(dim));
  }
  const Eigen::Index points = x.cols();
  const int layers = static_cast<int>(bound.weights.size());

  NodeId h = inputs;
  NodeId ht;  // d * B tangent blocks
  NodeId hs;  // P * B second-order blocks; invalid means identically zero
  if (order >= 1) {
    Matrix eye = Matrix::Zero(dim, dim * points);
    for (int k = 0; k < dim; ++k) eye.row(k).segment(k * points, points).setOnes();
    ht = tape.constant(std::move(eye));
  }

  for (int l = 0; l + 1 < layers; ++l) {
    const NodeId z = tape.add_bias(tape.matmul(bound.weights[l], h), bound.biases[l]);
    NodeId zt;
    NodeId zs;
    if (order >= 1) zt = tape.matmul(bound.weights[l], ht);
    if (order >= 2 && hs.valid()) zs = tape.matmul(bound.weights[l], hs);

    h = tape.requ(z);
    if (order >= 1) {
      const NodeId slope = tape.requ_prime(z);
      if (order >= 2) {
        const NodeId curvature = tape.requ_second(z);
        NodeId second = tape.hadamard_tiled(curvature, tape.pair_products(zt, dim));
        if (zs.valid()) second = tape.add(second, tape.hadamard_tiled(slope, zs));
        hs = second;
      }
      ht = tape.hadamard_tiled(slope, zt);
    }
  }

  JetNodes out;
  out.dim = dim;
  out.points = points;
  const int last = layers - 1;
  out.value = tape.add_bias(tape.matmul(bound.weights[last], h), bound.biases[last]);
  if (order >= 1) out.grad = tape.matmul(bound.weights[last], ht);
  if (order >= 2) {
    if (hs.valid()) {
      out.hess = tape.matmul(bound.weights[last], hs);
    } else {
      const Eigen::Index pairs = static_cast<Eigen::Index>(dim) * (dim + 1) / 2;
      out.hess = tape.constant(Matrix::Zero(1, pairs * points));
    }
  }
  return out;
}

Jet extract_jet(const Tape& tape, const JetNodes& nodes, Eigen::Index point) {
  if (point < 0 || point >= nodes.points) throw ContractViolation("jet point index out of range");
  const Eigen::Index B = nodes.points;
  const int d = nodes.dim;
  Jet jet;
  jet.value = tape.value(nodes.value)(0, point);
  if (nodes.grad.valid()) {
    const Matrix& g = tape.value(nodes.grad);
    jet.grad.resize(d);
    for (int k = 0; k < d; ++k) jet.grad(k) = g(0, k * B + point);
  }
  if (nodes.hess.valid()) {
    const Matrix& hv = tape.value(nodes.hess);
    Matrix hess(d, d);
    for (int k = 0; k < d; ++k) {
      for (int l = k; l < d; ++l) {
        hess(k, l) = hess(l, k) = hv(0, pair_index(k, l, d) * B + point);
      }
    }
    jet.hess = std::move(hess);
  }
  return jet;
}

Jet forward_jet(const model::ReQUNetwork& net, const Eigen::Ref<const Vector>& x, int order) {
  if (x.size() != net.input_dim()) {
    throw ContractViolation("forward_jet: point has dimension " + std::to_string(x.size()) +
                            ", network expects " + std::to_string(net.input_dim()));
  }
  Tape tape;
  const BoundNetwork bound = bind(tape, net, false);
  const NodeId inputs = tape.constant(Matrix(x));
  const JetNodes nodes = propagate_jet(tape, bound, inputs, net.input_dim(), order);
  return extract_jet(tape, nodes, 0);
}

}  // namespace sdore::autodiff
