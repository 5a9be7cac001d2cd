#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

namespace sdore::autodiff {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Squared ReLU, (max{z,0})^2.
inline double requ(double z) { return z > 0.0 ? z * z : 0.0; }

/// First derivative of requ: 2 max{z,0}. Defined as 0 at the kink.
double requ_prime(double z);

/// Second derivative of requ: 2 [z > 0]. Defined as 0 at the kink.
inline double requ_second(double z) { return z > 0.0 ? 2.0 : 0.0; }

struct NodeId {
  std::uint32_t index = UINT32_MAX;
  bool valid() const { return index != UINT32_MAX; }
  friend bool operator==(NodeId, NodeId) = default;
};

class Gradients;

/// Append-only record of matrix-valued primitive operations.
///
/// Values are computed eagerly when a node is appended; `backward` replays the
/// record in reverse and accumulates adjoints for every node that depends on a
/// variable. Operands always precede the nodes that use them, so a reverse
/// sweep over the node list is a valid topological order.
///
/// Several ops work on "tiled" matrices: an N x (k*B) matrix made of k
/// column blocks of width B. Tangent directions for a batch of B points are
/// stored that way so one matmul propagates all of them.
class Tape {
 public:
  enum class Op : std::uint8_t {
    kConstant,
    kVariable,
    kMatMul,
    kAddBias,
    kAdd,
    kSub,
    kScale,
    kCombine,
    kScaleBy,
    kRequ,
    kRequPrime,
    kRequSecond,
    kHadamard,
    kHadamardTiled,
    kPairProducts,
    kSum,
    kSoftmax,
    kEntry,
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  void reserve(std::size_t n) { nodes_.reserve(n); }
  std::size_t size() const { return nodes_.size(); }

  NodeId constant(Matrix value);
  NodeId constant(double value);
  /// Leaf whose adjoint is reported by `backward`.
  NodeId variable(Matrix value);

  NodeId matmul(NodeId a, NodeId b);
  /// x + bias * 1^T, with bias a column vector of x.rows() entries.
  NodeId add_bias(NodeId x, NodeId bias);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId scale(NodeId x, double c);
  /// a*x + b*y.
  NodeId combine(double a, NodeId x, double b, NodeId y);
  /// x scaled by the 1x1 node `s`.
  NodeId scale_by(NodeId x, NodeId s);
  NodeId requ(NodeId x);
  /// Elementwise requ'(x) = 2 relu(x); differentiable (derivative 2 [x>0]).
  NodeId requ_prime(NodeId x);
  /// Elementwise requ''(x) = 2 [x>0]; piecewise constant, so no adjoint flows.
  NodeId requ_second(NodeId x);
  NodeId hadamard(NodeId a, NodeId b);
  /// p is N x B, t is N x (k*B): every column block of t times p.
  NodeId hadamard_tiled(NodeId p, NodeId t);
  /// t is N x (d*B). Returns N x (P*B), P = d(d+1)/2, with block (k,l),
  /// k <= l in row-major upper-triangle order, equal to t_k .* t_l.
  NodeId pair_products(NodeId t, int directions);
  /// Sum of all entries, 1x1.
  NodeId sum(NodeId x);
  /// Normalized exponential of a column vector.
  NodeId softmax(NodeId logits);
  /// Entry i of a column vector as a 1x1 node.
  NodeId entry(NodeId v, Eigen::Index i);

  const Matrix& value(NodeId id) const;
  double scalar(NodeId id) const;
  bool requires_grad(NodeId id) const;

  /// Reverse sweep from a 1x1 node. Does not modify the tape.
  Gradients backward(NodeId loss) const;

 private:
  struct Node {
    explicit Node(Op o, bool g = false, NodeId x = {}, NodeId y = {}) : op(o), grad(g), a(x), b(y) {}
    Op op;
    bool grad = false;
    NodeId a;
    NodeId b;
    double c0 = 0.0;
    double c1 = 0.0;
    Eigen::Index k = 0;
    Matrix value;
  };

  NodeId push(Node node);
  const Node& at(NodeId id) const;

  std::vector<Node> nodes_;
};

/// Adjoints produced by `Tape::backward`, queried per variable node.
class Gradients {
 public:
  /// d loss / d variable. Variables the loss does not depend on get zeros.
  const Matrix& operator[](NodeId variable) const;

 private:
  friend class Tape;
  std::vector<Matrix> adjoint_;
};

namespace testing {

/// Multiplies every requ' evaluation by `factor` while alive. Used to check
/// that gradient verification catches a broken activation derivative.
class ScopedRequPrimeCorruption {
 public:
  explicit ScopedRequPrimeCorruption(double factor);
  ~ScopedRequPrimeCorruption();
  ScopedRequPrimeCorruption(const ScopedRequPrimeCorruption&) = delete;
  ScopedRequPrimeCorruption& operator=(const ScopedRequPrimeCorruption&) = delete;

 private:
  double previous_;
};

}  // namespace testing

}  // namespace sdore::autodiff
