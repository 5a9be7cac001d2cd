#include "sdore/tape.hpp"

#include "sdore/errors.hpp"

#include <atomic>
#include <cmath>
#include <string>

namespace sdore::autodiff {

namespace {

std::atomic<double> g_requ_prime_factor{1.0};

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation("tape: " + what);
}

void accumulate(Matrix& adj, const Matrix& delta) {
  if (adj.size() == 0) {
    adj = delta;
  } else {
    adj += delta;
  }
}

template <typename Product>
void accumulate_product(Matrix& adj, const Product& delta) {
  if (adj.size() == 0) {
    adj.noalias() = delta;
  } else {
    adj.noalias() += delta;
  }
}

}  // namespace

double requ_prime(double z) {
  return z > 0.0 ? 2.0 * z * g_requ_prime_factor.load(std::memory_order_relaxed) : 0.0;
}

NodeId Tape::push(Node node) {
  NodeId id{static_cast<std::uint32_t>(nodes_.size())};
  nodes_.push_back(std::move(node));
  return id;
}

const Tape::Node& Tape::at(NodeId id) const {
  require(id.valid() && id.index < nodes_.size(), "node reference out of range");
  return nodes_[id.index];
}

NodeId Tape::constant(Matrix value) {
  Node n(Op::kConstant);
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

NodeId Tape::variable(Matrix value) {
  Node n(Op::kVariable);
  n.grad = true;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Node& x = at(a);
  const Node& y = at(b);
  require(x.value.cols() == y.value.rows(),
          "matmul shape mismatch " + shape(x.value) + " * " + shape(y.value));
  Node n(Op::kMatMul, x.grad || y.grad, a, b);
  n.value.noalias() = x.value * y.value;
  return push(std::move(n));
}

NodeId Tape::add_bias(NodeId x, NodeId bias) {
  const Node& v = at(x);
  const Node& bv = at(bias);
  require(bv.value.cols() == 1 && bv.value.rows() == v.value.rows(),
          "bias " + shape(bv.value) + " does not match " + shape(v.value));
  Node n(Op::kAddBias, v.grad || bv.grad, x, bias);
  n.value = v.value.colwise() + bv.value.col(0);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return combine(1.0, a, 1.0, b); }

NodeId Tape::sub(NodeId a, NodeId b) { return combine(1.0, a, -1.0, b); }

NodeId Tape::scale(NodeId x, double c) {
  const Node& v = at(x);
  Node n(Op::kScale, v.grad, x);
  n.c0 = c;
  n.value = c * v.value;
  return push(std::move(n));
}

NodeId Tape::combine(double a, NodeId x, double b, NodeId y) {
  const Node& u = at(x);
  const Node& v = at(y);
  require(u.value.rows() == v.value.rows() && u.value.cols() == v.value.cols(),
          "combine shape mismatch " + shape(u.value) + " vs " + shape(v.value));
  Node n(Op::kCombine, u.grad || v.grad, x, y);
  n.c0 = a;
  n.c1 = b;
  if (a == 1.0 && b == 1.0) {
    n.value = u.value + v.value;
  } else if (a == 1.0 && b == -1.0) {
    n.value = u.value - v.value;
  } else {
    n.value = a * u.value + b * v.value;
  }
  return push(std::move(n));
}

NodeId Tape::scale_by(NodeId x, NodeId s) {
  const Node& v = at(x);
  const Node& sv = at(s);
  require(sv.value.size() == 1, "scale_by expects a 1x1 factor, got " + shape(sv.value));
  Node n(Op::kScaleBy, v.grad || sv.grad, x, s);
  n.value = sv.value(0, 0) * v.value;
  return push(std::move(n));
}

NodeId Tape::requ(NodeId x) {
  const Node& v = at(x);
  Node n(Op::kRequ, v.grad, x);
  n.value = v.value.unaryExpr([](double z) { return autodiff::requ(z); });
  return push(std::move(n));
}

NodeId Tape::requ_prime(NodeId x) {
  const Node& v = at(x);
  Node n(Op::kRequPrime, v.grad, x);
  n.value = v.value.unaryExpr([](double z) { return autodiff::requ_prime(z); });
  return push(std::move(n));
}

NodeId Tape::requ_second(NodeId x) {
  const Node& v = at(x);
  Node n(Op::kRequSecond, false, x);
  n.value = v.value.unaryExpr([](double z) { return autodiff::requ_second(z); });
  return push(std::move(n));
}

NodeId Tape::hadamard(NodeId a, NodeId b) {
  const Node& u = at(a);
  const Node& v = at(b);
  require(u.value.rows() == v.value.rows() && u.value.cols() == v.value.cols(),
          "hadamard shape mismatch " + shape(u.value) + " vs " + shape(v.value));
  Node n(Op::kHadamard, u.grad || v.grad, a, b);
  n.value = u.value.cwiseProduct(v.value);
  return push(std::move(n));
}

NodeId Tape::hadamard_tiled(NodeId p, NodeId t) {
  const Node& pv = at(p);
  const Node& tv = at(t);
  const Eigen::Index width = pv.value.cols();
  require(pv.value.rows() == tv.value.rows() && width > 0 && tv.value.cols() % width == 0,
          "hadamard_tiled shape mismatch " + shape(pv.value) + " vs " + shape(tv.value));
  Node n(Op::kHadamardTiled, pv.grad || tv.grad, p, t);
  const Eigen::Index blocks = tv.value.cols() / width;
  n.k = blocks;
  n.value.resize(tv.value.rows(), tv.value.cols());
  for (Eigen::Index j = 0; j < blocks; ++j) {
    n.value.middleCols(j * width, width) =
        tv.value.middleCols(j * width, width).cwiseProduct(pv.value);
  }
  return push(std::move(n));
}

NodeId Tape::pair_products(NodeId t, int directions) {
  const Node& tv = at(t);
  require(directions > 0 && tv.value.cols() % directions == 0,
          "pair_products: " + shape(tv.value) + " not divisible into " +
              std::to_string(directions) + " blocks");
  const Eigen::Index width = tv.value.cols() / directions;
  const Eigen::Index pairs = static_cast<Eigen::Index>(directions) * (directions + 1) / 2;
  Node n(Op::kPairProducts, tv.grad, t);
  n.k = directions;
  n.value.resize(tv.value.rows(), pairs * width);
  Eigen::Index p = 0;
  for (int k = 0; k < directions; ++k) {
    for (int l = k; l < directions; ++l, ++p) {
      n.value.middleCols(p * width, width) =
          tv.value.middleCols(k * width, width).cwiseProduct(tv.value.middleCols(l * width, width));
    }
  }
  return push(std::move(n));
}

NodeId Tape::sum(NodeId x) {
  const Node& v = at(x);
  Node n(Op::kSum, v.grad, x);
  n.value = Matrix::Constant(1, 1, v.value.sum());
  return push(std::move(n));
}

NodeId Tape::softmax(NodeId logits) {
  const Node& v = at(logits);
  require(v.value.cols() == 1 && v.value.rows() > 0, "softmax expects a column vector");
  Node n(Op::kSoftmax, v.grad, logits);
  const double top = v.value.maxCoeff();
  Matrix e = (v.value.array() - top).exp().matrix();
  n.value = e / e.sum();
  return push(std::move(n));
}

NodeId Tape::entry(NodeId v, Eigen::Index i) {
  const Node& x = at(v);
  require(x.value.cols() == 1 && i >= 0 && i < x.value.rows(), "entry index out of range");
  Node n(Op::kEntry, x.grad, v);
  n.k = i;
  n.value = Matrix::Constant(1, 1, x.value(i, 0));
  return push(std::move(n));
}

const Matrix& Tape::value(NodeId id) const { return at(id).value; }

double Tape::scalar(NodeId id) const {
  const Matrix& v = value(id);
  require(v.size() == 1, "scalar() on non-scalar node " + shape(v));
  return v(0, 0);
}

bool Tape::requires_grad(NodeId id) const { return at(id).grad; }

Gradients Tape::backward(NodeId loss) const {
  const Node& root = at(loss);
  require(root.value.rows() == 1 && root.value.cols() == 1,
          "backward requires a scalar loss node, got " + shape(root.value));

  Gradients out;
  std::vector<Matrix>& adj = out.adjoint_;
  adj.resize(nodes_.size());
  adj[loss.index] = Matrix::Ones(1, 1);

  for (std::size_t i = loss.index + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.grad || adj[i].size() == 0) continue;
    const Matrix& g = adj[i];
    auto wants = [&](NodeId id) { return nodes_[id.index].grad; };

    switch (n.op) {
      case Op::kConstant:
      case Op::kVariable:
      case Op::kRequSecond:
        break;
      case Op::kMatMul: {
        const Matrix& a = nodes_[n.a.index].value;
        const Matrix& b = nodes_[n.b.index].value;
        if (wants(n.a)) accumulate_product(adj[n.a.index], g * b.transpose());
        if (wants(n.b)) accumulate_product(adj[n.b.index], a.transpose() * g);
        break;
      }
      case Op::kAddBias:
        if (wants(n.a)) accumulate(adj[n.a.index], g);
        if (wants(n.b)) accumulate(adj[n.b.index], g.rowwise().sum());
        break;
      case Op::kAdd:
      case Op::kSub:
      case Op::kCombine:
        if (wants(n.a)) accumulate(adj[n.a.index], n.c0 == 1.0 ? g : Matrix(n.c0 * g));
        if (wants(n.b)) accumulate(adj[n.b.index], n.c1 == 1.0 ? g : Matrix(n.c1 * g));
        break;
      case Op::kScale:
        accumulate(adj[n.a.index], n.c0 * g);
        break;
      case Op::kScaleBy: {
        const Matrix& x = nodes_[n.a.index].value;
        const double s = nodes_[n.b.index].value(0, 0);
        if (wants(n.a)) accumulate(adj[n.a.index], s * g);
        if (wants(n.b)) accumulate(adj[n.b.index], Matrix::Constant(1, 1, g.cwiseProduct(x).sum()));
        break;
      }
      case Op::kRequ: {
        const Matrix& z = nodes_[n.a.index].value;
        accumulate(adj[n.a.index],
                   g.cwiseProduct(z.unaryExpr([](double v) { return autodiff::requ_prime(v); })));
        break;
      }
      case Op::kRequPrime: {
        const Matrix& z = nodes_[n.a.index].value;
        accumulate(adj[n.a.index],
                   g.cwiseProduct(z.unaryExpr([](double v) { return autodiff::requ_second(v); })));
        break;
      }
      case Op::kHadamard: {
        const Matrix& a = nodes_[n.a.index].value;
        const Matrix& b = nodes_[n.b.index].value;
        if (wants(n.a)) accumulate(adj[n.a.index], g.cwiseProduct(b));
        if (wants(n.b)) accumulate(adj[n.b.index], g.cwiseProduct(a));
        break;
      }
      case Op::kHadamardTiled: {
        const Matrix& p = nodes_[n.a.index].value;
        const Matrix& t = nodes_[n.b.index].value;
        const Eigen::Index width = p.cols();
        if (wants(n.a)) {
          Matrix dp = Matrix::Zero(p.rows(), width);
          for (Eigen::Index j = 0; j < n.k; ++j) {
            dp += g.middleCols(j * width, width).cwiseProduct(t.middleCols(j * width, width));
          }
          accumulate(adj[n.a.index], dp);
        }
        if (wants(n.b)) {
          Matrix dt(t.rows(), t.cols());
          for (Eigen::Index j = 0; j < n.k; ++j) {
            dt.middleCols(j * width, width) = g.middleCols(j * width, width).cwiseProduct(p);
          }
          accumulate(adj[n.b.index], dt);
        }
        break;
      }
      case Op::kPairProducts: {
        const Matrix& t = nodes_[n.a.index].value;
        const Eigen::Index dirs = n.k;
        const Eigen::Index width = t.cols() / dirs;
        Matrix dt = Matrix::Zero(t.rows(), t.cols());
        Eigen::Index p = 0;
        for (Eigen::Index k = 0; k < dirs; ++k) {
          for (Eigen::Index l = k; l < dirs; ++l, ++p) {
            auto gp = g.middleCols(p * width, width);
            dt.middleCols(k * width, width) += gp.cwiseProduct(t.middleCols(l * width, width));
            dt.middleCols(l * width, width) += gp.cwiseProduct(t.middleCols(k * width, width));
          }
        }
        accumulate(adj[n.a.index], dt);
        break;
      }
      case Op::kSum: {
        const Matrix& x = nodes_[n.a.index].value;
        accumulate(adj[n.a.index], Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::kSoftmax: {
        // d logits = s .* (g - <g, s>)
        const double inner = g.col(0).dot(n.value.col(0));
        accumulate(adj[n.a.index], n.value.cwiseProduct((g.array() - inner).matrix()));
        break;
      }
      case Op::kEntry: {
        const Matrix& x = nodes_[n.a.index].value;
        Matrix d = Matrix::Zero(x.rows(), 1);
        d(n.k, 0) = g(0, 0);
        accumulate(adj[n.a.index], d);
        break;
      }
    }
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.op == Op::kVariable) {
      if (adj[i].size() == 0) adj[i] = Matrix::Zero(n.value.rows(), n.value.cols());
    } else {
      adj[i].resize(0, 0);
    }
  }
  return out;
}

const Matrix& Gradients::operator[](NodeId variable) const {
  if (!variable.valid() || variable.index >= adjoint_.size() ||
      adjoint_[variable.index].size() == 0) {
    throw ContractViolation("gradients: node is not a variable of this tape");
  }
  return adjoint_[variable.index];
}

namespace testing {

ScopedRequPrimeCorruption::ScopedRequPrimeCorruption(double factor)
    : previous_(g_requ_prime_factor.exchange(factor)) {}

ScopedRequPrimeCorruption::~ScopedRequPrimeCorruption() { g_requ_prime_factor.store(previous_); }

}  // namespace testing

}  // namespace sdore::autodiff
