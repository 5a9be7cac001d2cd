#include "sdore/network.hpp"

#include "sdore/errors.hpp"
#include "sdore/tape.hpp"

#include <cmath>
#include <random>
#include <string>

namespace sdore::model {

namespace {

void check_dims(const std::vector<int>& dims) {
  if (dims.size() < 2) {
    throw ContractViolation("layer_dims needs at least input and output widths");
  }
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (dims[i] <= 0) {
      throw ContractViolation("layer_dims[" + std::to_string(i) + "] must be positive");
    }
  }
  if (dims.back() != 1) throw ContractViolation("last layer width must be 1");
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

ReQUNetwork::ReQUNetwork(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  check_dims(dims_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.push_back(Matrix::Zero(dims_[l + 1], dims_[l]));
    biases_.push_back(Vector::Zero(dims_[l + 1]));
  }
}

Eigen::Index ReQUNetwork::parameter_count() const {
  Eigen::Index count = 0;
  for (int l = 0; l < num_layers(); ++l) count += weights_[l].size() + biases_[l].size();
  return count;
}

Eigen::Index ReQUNetwork::nonzero_count() const {
  Eigen::Index count = 0;
  for (int l = 0; l < num_layers(); ++l) {
    count += (weights_[l].array() != 0.0).count() + (biases_[l].array() != 0.0).count();
  }
  return count;
}

Vector ReQUNetwork::parameters() const {
  Vector theta(parameter_count());
  Eigen::Index at = 0;
  for (int l = 0; l < num_layers(); ++l) {
    const auto nw = weights_[l].size();
    theta.segment(at, nw) = Eigen::Map<const Vector>(weights_[l].data(), nw);
    at += nw;
    theta.segment(at, biases_[l].size()) = biases_[l];
    at += biases_[l].size();
  }
  return theta;
}

void ReQUNetwork::set_parameters(const Eigen::Ref<const Vector>& theta) {
  if (theta.size() != parameter_count()) {
    throw ContractViolation("set_parameters: expected " + std::to_string(parameter_count()) +
                            " values, got " + std::to_string(theta.size()));
  }
  Eigen::Index at = 0;
  for (int l = 0; l < num_layers(); ++l) {
    const auto nw = weights_[l].size();
    Eigen::Map<Vector>(weights_[l].data(), nw) = theta.segment(at, nw);
    at += nw;
    biases_[l] = theta.segment(at, biases_[l].size());
    at += biases_[l].size();
  }
}

void ReQUNetwork::validate() const {
  try {
    check_dims(dims_);
  } catch (const ContractViolation& e) {
    throw ValidationError(e.what());
  }
  if (weights_.size() + 1 != dims_.size() || biases_.size() != weights_.size()) {
    throw ValidationError("layer count does not match layer_dims");
  }
  for (int l = 0; l < num_layers(); ++l) {
    if (weights_[l].rows() != dims_[l + 1] || weights_[l].cols() != dims_[l] ||
        biases_[l].size() != dims_[l + 1]) {
      throw ValidationError("layer " + std::to_string(l) + " breaks the shape chain");
    }
  }
}

bool operator==(const ReQUNetwork& a, const ReQUNetwork& b) {
  if (a.dims_ != b.dims_ || a.weights_.size() != b.weights_.size()) return false;
  for (std::size_t l = 0; l < a.weights_.size(); ++l) {
    if (!same(a.weights_[l], b.weights_[l]) || !same(a.biases_[l], b.biases_[l])) return false;
  }
  return true;
}

Ensemble::Ensemble(ReQUNetwork single) : alpha_(Vector::Ones(1)) {
  single.validate();
  members_.push_back(std::move(single));
}

Ensemble::Ensemble(std::vector<ReQUNetwork> members, Vector alpha)
    : members_(std::move(members)), alpha_(std::move(alpha)) {
  try {
    validate();
  } catch (const ValidationError& e) {
    throw ContractViolation(e.what());
  }
}

Eigen::Index Ensemble::parameter_count() const {
  Eigen::Index count = 0;
  for (const auto& m : members_) count += m.parameter_count();
  return count + (size() > 1 ? size() : 0);
}

Vector Ensemble::parameters() const {
  Vector theta(parameter_count());
  Eigen::Index at = 0;
  for (const auto& m : members_) {
    theta.segment(at, m.parameter_count()) = m.parameters();
    at += m.parameter_count();
  }
  if (size() > 1) {
    for (int k = 0; k < size(); ++k) {
      theta(at + k) = alpha_(k) > 0.0 ? std::max(std::log(alpha_(k)), -700.0) : -700.0;
    }
  }
  return theta;
}

void Ensemble::set_parameters(const Eigen::Ref<const Vector>& theta) {
  if (theta.size() != parameter_count()) {
    throw ContractViolation("set_parameters: expected " + std::to_string(parameter_count()) +
                            " values, got " + std::to_string(theta.size()));
  }
  Eigen::Index at = 0;
  for (auto& m : members_) {
    m.set_parameters(theta.segment(at, m.parameter_count()));
    at += m.parameter_count();
  }
  if (size() > 1) {
    const Vector logits = theta.tail(size());
    const Vector e = (logits.array() - logits.maxCoeff()).exp().matrix();
    alpha_ = e / e.sum();
  }
}

void Ensemble::validate() const {
  if (members_.empty()) throw ValidationError("ensemble has no members");
  if (alpha_.size() != size()) throw ValidationError("alpha length differs from member count");
  for (const auto& m : members_) {
    m.validate();
    if (m.input_dim() != members_.front().input_dim()) {
      throw ValidationError("ensemble members disagree on input width");
    }
  }
  if ((alpha_.array() < 0.0).any() || !alpha_.allFinite() || std::abs(alpha_.sum() - 1.0) > 1e-12) {
    throw ValidationError("alpha is not on the probability simplex");
  }
}

bool operator==(const Ensemble& a, const Ensemble& b) {
  return a.members_ == b.members_ && same(a.alpha_, b.alpha_);
}

ReQUNetwork init_network(const std::vector<int>& layer_dims, std::uint64_t seed) {
  ReQUNetwork net(layer_dims);
  std::mt19937_64 rng(seed);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / (layer_dims[l] + layer_dims[l + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix& w = net.weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
    }
  }
  return net;
}

Ensemble init_ensemble(const std::vector<int>& layer_dims, int members, std::uint64_t seed) {
  if (members < 1) throw ContractViolation("ensemble needs at least one member");
  if (members == 1) return Ensemble(init_network(layer_dims, seed));
  std::seed_seq seq{seed, static_cast<std::uint64_t>(members)};
  std::vector<std::uint64_t> seeds(members);
  seq.generate(seeds.begin(), seeds.end());
  std::vector<ReQUNetwork> nets;
  for (int k = 0; k < members; ++k) nets.push_back(init_network(layer_dims, seeds[k]));
  return Ensemble(std::move(nets), Vector::Constant(members, 1.0 / members));
}

Vector predict(const ReQUNetwork& net, const Eigen::Ref<const Matrix>& X) {
  if (X.cols() != net.input_dim()) {
    throw ContractViolation("predict: points have " + std::to_string(X.cols()) +
                            " columns, network expects " + std::to_string(net.input_dim()));
  }
  Matrix h = X.transpose();
  for (int l = 0; l < net.num_layers(); ++l) {
    Matrix z = (net.weight(l) * h).colwise() + net.bias(l);
    if (l + 1 < net.num_layers()) {
      h = z.unaryExpr([](double v) { return autodiff::requ(v); });
    } else {
      h = std::move(z);
    }
  }
  return h.row(0).transpose();
}

Vector predict(const Ensemble& model, const Eigen::Ref<const Matrix>& X) {
  if (model.size() == 1) return predict(model.member(0), X);
  Vector out = Vector::Zero(X.rows());
  for (int k = 0; k < model.size(); ++k) out += model.alpha()(k) * predict(model.member(k), X);
  return out;
}

}  // namespace sdore::model
