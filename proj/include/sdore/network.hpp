#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace sdore::model {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense network x -> T_L(requ(T_{L-1}(... requ(T_0 x)))), T_l(h) = A_l h + b_l.
///
/// `layer_dims` is [d, N_1, ..., N_L, 1]. The final affine layer has no
/// activation. A network with layer_dims [d, 1] is an affine function.
class ReQUNetwork {
 public:
  ReQUNetwork() = default;
  /// Zero-initialized network. Throws ContractViolation on an invalid chain.
  explicit ReQUNetwork(std::vector<int> layer_dims);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  /// Number of affine layers (L + 1 in the hidden-layer count L).
  int num_layers() const { return static_cast<int>(weights_.size()); }
  int num_hidden_layers() const { return num_layers() - 1; }

  const Matrix& weight(int layer) const { return weights_.at(layer); }
  const Vector& bias(int layer) const { return biases_.at(layer); }
  Matrix& weight(int layer) { return weights_.at(layer); }
  Vector& bias(int layer) { return biases_.at(layer); }

  /// Total parameter count (weights + biases).
  Eigen::Index parameter_count() const;
  /// Count of nonzero parameters (reported, never constrained).
  Eigen::Index nonzero_count() const;

  /// Parameters in layer order: A_0 (column-major), b_0, A_1, b_1, ...
  Vector parameters() const;
  void set_parameters(const Eigen::Ref<const Vector>& theta);

  /// Checks the shape chain; throws ValidationError.
  void validate() const;

  /// Exact equality of dims and every parameter.
  friend bool operator==(const ReQUNetwork& a, const ReQUNetwork& b);

 private:
  std::vector<int> dims_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// Convex combination sum_k alpha_k psi_k of networks sharing an input width.
/// K = 1 with alpha = (1) is the plain network.
class Ensemble {
 public:
  Ensemble() = default;
  explicit Ensemble(ReQUNetwork single);
  /// Throws ContractViolation unless widths agree and alpha is on the simplex.
  Ensemble(std::vector<ReQUNetwork> members, Vector alpha);

  int size() const { return static_cast<int>(members_.size()); }
  int input_dim() const { return members_.front().input_dim(); }
  const std::vector<ReQUNetwork>& members() const { return members_; }
  const ReQUNetwork& member(int k) const { return members_.at(k); }
  const Vector& alpha() const { return alpha_; }

  /// Trainable parameter vector: member parameters in order, then (only when
  /// K > 1) the K logits log(alpha_k) that map to alpha via softmax.
  Eigen::Index parameter_count() const;
  Vector parameters() const;
  void set_parameters(const Eigen::Ref<const Vector>& theta);

  void validate() const;

  friend bool operator==(const Ensemble& a, const Ensemble& b);

 private:
  std::vector<ReQUNetwork> members_;
  Vector alpha_;
};

/// Glorot-uniform weights U[-sqrt(6/(fan_in+fan_out)), +...], zero biases.
ReQUNetwork init_network(const std::vector<int>& layer_dims, std::uint64_t seed);

/// K independently initialized members with uniform alpha.
Ensemble init_ensemble(const std::vector<int>& layer_dims, int members, std::uint64_t seed);

/// Row-per-point outputs. X is n x d.
Vector predict(const ReQUNetwork& net, const Eigen::Ref<const Matrix>& X);
Vector predict(const Ensemble& model, const Eigen::Ref<const Matrix>& X);

}  // namespace sdore::model
