#pragma once

// Test-only reference computations. Nothing here touches the tape: networks
// are evaluated with scalar loops and derivatives come from forward-mode
// tangent recursion or central finite differences.

#include "sdore/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

namespace sdore::oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline double relu2(double z) { return z > 0 ? z * z : 0.0; }

/// Straight-line evaluation of a network at one point: value and gradient via
/// per-direction tangent recursion written with explicit loops.
struct PointEval {
  double value = 0.0;
  Vector grad;
  std::vector<double> preacts;  // every hidden pre-activation, layer by layer
};

inline PointEval eval_point(const model::ReQUNetwork& net, const Vector& x) {
  const int d = static_cast<int>(x.size());
  std::vector<double> h(x.data(), x.data() + d);
  std::vector<std::vector<double>> t(d, std::vector<double>(d, 0.0));
  for (int k = 0; k < d; ++k) t[k][k] = 1.0;
  PointEval out;
  for (int l = 0; l < net.num_layers(); ++l) {
    const Matrix& A = net.weight(l);
    const Vector& b = net.bias(l);
    const bool last = l + 1 == net.num_layers();
    std::vector<double> nh(A.rows());
    std::vector<std::vector<double>> nt(d, std::vector<double>(A.rows()));
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      double z = b(i);
      for (Eigen::Index j = 0; j < A.cols(); ++j) z += A(i, j) * h[j];
      std::vector<double> zt(d, 0.0);
      for (int k = 0; k < d; ++k) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) zt[k] += A(i, j) * t[k][j];
      }
      if (last) {
        nh[i] = z;
        for (int k = 0; k < d; ++k) nt[k][i] = zt[k];
      } else {
        out.preacts.push_back(z);
        nh[i] = relu2(z);
        const double slope = z > 0 ? 2 * z : 0.0;
        for (int k = 0; k < d; ++k) nt[k][i] = slope * zt[k];
      }
    }
    h = std::move(nh);
    t = std::move(nt);
  }
  out.value = h[0];
  out.grad.resize(d);
  for (int k = 0; k < d; ++k) out.grad(k) = t[k][0];
  return out;
}

inline double min_abs_preact(const model::ReQUNetwork& net, const Vector& x) {
  const auto e = eval_point(net, x);
  double m = std::numeric_limits<double>::infinity();
  for (double z : e.preacts) m = std::min(m, std::abs(z));
  return m;
}

inline std::vector<bool> sign_pattern(const model::ReQUNetwork& net, const Vector& x) {
  std::vector<bool> s;
  for (double z : eval_point(net, x).preacts) s.push_back(z > 0);
  return s;
}

/// (1/n) sum (f(x_i) - y_i)^2 + lambda (1/m) sum |grad f(z_j)|^2, straight-line.
inline double sdore_objective(const model::ReQUNetwork& net, const Matrix& X, const Vector& Y,
                              const Matrix& Z, double lambda) {
  double fit = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double r = eval_point(net, X.row(i).transpose()).value - Y(i);
    fit += r * r;
  }
  fit /= static_cast<double>(X.rows());
  if (lambda == 0.0) return fit;
  double pen = 0.0;
  for (Eigen::Index j = 0; j < Z.rows(); ++j) pen += eval_point(net, Z.row(j).transpose()).grad.squaredNorm();
  return fit + lambda * pen / static_cast<double>(Z.rows());
}

/// Central differences of a scalar function of a vector.
inline Vector central_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                               double h) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    g(i) = (f(xp) - f(xm)) / (2 * h);
  }
  return g;
}

/// max |a - b| / max |b|, the norm-wise relative error used by gradient checks.
inline double rel_error(const Vector& a, const Vector& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// Random ReQU network with `hidden` hidden layers of width <= max_width and
/// nonzero biases.
inline model::ReQUNetwork random_network(std::mt19937_64& rng, int d, int hidden, int max_width) {
  std::uniform_int_distribution<int> width(1, max_width);
  std::vector<int> dims{d};
  for (int l = 0; l < hidden; ++l) dims.push_back(width(rng));
  dims.push_back(1);
  auto net = model::init_network(dims, rng());
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  for (int l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = bias(rng);
  }
  return net;
}

inline Matrix uniform_points(std::mt19937_64& rng, Eigen::Index n, int d, double lo = 0.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) X(i, k) = u(rng);
  }
  return X;
}

/// Ridge minimizer (X^T X / n + lambda I)^{-1} X^T y / n via Cholesky.
inline Vector ridge_normal_equations(const Matrix& X, const Vector& y, double lambda) {
  const double n = static_cast<double>(X.rows());
  const Matrix A = X.transpose() * X / n + lambda * Matrix::Identity(X.cols(), X.cols());
  return A.llt().solve(X.transpose() * y / n);
}

}  // namespace sdore::oracle
