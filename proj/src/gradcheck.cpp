#include "sdore/gradcheck.hpp"

#include "sdore/experiments.hpp"
#include "sdore/jet.hpp"
#include "sdore/rng.hpp"
#include "sdore/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sdore::gradcheck {

namespace {

using model::Matrix;
using model::ReQUNetwork;
using model::Vector;

constexpr double kStep = 1e-4;
constexpr double kMargin = 1e-3;

/// Straight-line forward pass carrying the input Jacobian; independent of the
/// tape so that a corrupted activation derivative shows up as a mismatch.
struct PointEval {
  double value = 0.0;
  Vector grad;
  std::vector<char> pattern;
  double margin = std::numeric_limits<double>::infinity();
};

PointEval eval_point(const ReQUNetwork& net, const Vector& x) {
  PointEval out;
  Vector h = x;
  Matrix J = Matrix::Identity(x.size(), x.size());
  for (int l = 0; l < net.num_layers(); ++l) {
    Vector z = net.weight(l) * h + net.bias(l);
    J = net.weight(l) * J;
    if (l + 1 == net.num_layers()) {
      h = z;
      break;
    }
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      out.margin = std::min(out.margin, std::abs(z(i)));
      out.pattern.push_back(z(i) > 0.0);
      const double pos = std::max(z(i), 0.0);
      J.row(i) *= 2.0 * pos;
      z(i) = pos * pos;
    }
    h = z;
  }
  out.value = h(0);
  out.grad = J.row(0).transpose();
  return out;
}

ReQUNetwork random_network(std::mt19937_64& rng, int d) {
  std::uniform_int_distribution<int> depth(2, 4);
  std::uniform_int_distribution<int> width(1, 16);
  std::vector<int> dims{d};
  for (int l = depth(rng); l > 0; --l) dims.push_back(width(rng));
  dims.push_back(1);
  auto net = model::init_network(dims, rng());
  std::uniform_real_distribution<double> bias(-0.5, 0.5);
  for (int l = 0; l < net.num_layers(); ++l) {
    for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) net.bias(l)(i) = bias(rng);
  }
  return net;
}

Vector uniform_point(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vector x(d);
  for (int k = 0; k < d; ++k) x(k) = u(rng);
  return x;
}

int random_dim(std::mt19937_64& rng) { return std::uniform_int_distribution<int>(1, 4)(rng); }

double rel_error(const Vector& a, const Vector& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

/// True when every central-difference probe of x keeps the activation pattern.
bool stable_in_input(const ReQUNetwork& net, const Vector& x, const std::vector<char>& pattern) {
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    for (double s : {kStep, -kStep}) {
      Vector y = x;
      y(k) += s;
      if (eval_point(net, y).pattern != pattern) return false;
    }
  }
  return true;
}

/// Network at x away from kinks, with a stable stencil and a nonzero gradient.
bool draw_point(std::mt19937_64& rng, const ReQUNetwork& net, Vector& x, PointEval& e) {
  for (int attempt = 0; attempt < 50; ++attempt) {
    x = uniform_point(rng, net.input_dim());
    e = eval_point(net, x);
    if (e.margin >= kMargin && e.grad.cwiseAbs().maxCoeff() > 1e-8 && stable_in_input(net, x, e.pattern)) {
      return true;
    }
  }
  return false;
}

struct Objective {
  double value = 0.0;
  std::vector<char> pattern;
  double margin = std::numeric_limits<double>::infinity();
};

Objective sdore_objective(const ReQUNetwork& net, const Matrix& X, const Vector& Y, const Matrix& Z,
                          double lambda) {
  Objective out;
  double fit = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const auto e = eval_point(net, X.row(i).transpose());
    fit += (e.value - Y(i)) * (e.value - Y(i));
    out.pattern.insert(out.pattern.end(), e.pattern.begin(), e.pattern.end());
    out.margin = std::min(out.margin, e.margin);
  }
  double pen = 0.0;
  for (Eigen::Index j = 0; j < Z.rows(); ++j) {
    const auto e = eval_point(net, Z.row(j).transpose());
    pen += e.grad.squaredNorm();
    out.pattern.insert(out.pattern.end(), e.pattern.begin(), e.pattern.end());
    out.margin = std::min(out.margin, e.margin);
  }
  out.value = fit / static_cast<double>(X.rows()) + lambda * pen / static_cast<double>(Z.rows());
  return out;
}

Matrix uniform_matrix(std::mt19937_64& rng, Eigen::Index n, int d, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix X(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) X(i, k) = u(rng);
  }
  return X;
}

}  // namespace

CheckResult check_input_grad(const Options& options) {
  CheckResult r{"input_grad", 0.0, 1e-5, 0};
  auto rng = stream_rng(options.seed, 1);
  while (r.cases < options.networks) {
    const auto net = random_network(rng, random_dim(rng));
    Vector x;
    PointEval e;
    if (!draw_point(rng, net, x, e)) continue;
    const Vector analytic = autodiff::forward_jet(net, x, 1).grad;
    Vector fd(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      Vector xp = x, xm = x;
      xp(k) += kStep;
      xm(k) -= kStep;
      fd(k) = (eval_point(net, xp).value - eval_point(net, xm).value) / (2 * kStep);
    }
    r.max_error = std::max(r.max_error, rel_error(analytic, fd));
    ++r.cases;
  }
  return r;
}

CheckResult check_param_grad(const Options& options) {
  CheckResult r{"param_grad", 0.0, 1e-4, 0};
  auto rng = stream_rng(options.seed, 2);
  std::uniform_real_distribution<double> lambda_dist(0.05, 1.0);
  while (r.cases < options.networks) {
    const int d = random_dim(rng);
    const auto net = random_network(rng, d);
    const Matrix X = uniform_matrix(rng, 5, d, -1.0, 1.0);
    const Matrix Z = uniform_matrix(rng, 5, d, -1.0, 1.0);
    const Vector Y = uniform_matrix(rng, 5, 1, -1.0, 1.0).col(0);
    const double lambda = lambda_dist(rng);
    const auto base = sdore_objective(net, X, Y, Z, lambda);
    if (base.margin < kMargin) continue;

    const Vector theta = net.parameters();
    Vector fd(theta.size());
    bool stable = true;
    auto probe = net;
    for (Eigen::Index i = 0; i < theta.size() && stable; ++i) {
      Vector t = theta;
      t(i) = theta(i) + kStep;
      probe.set_parameters(t);
      const auto plus = sdore_objective(probe, X, Y, Z, lambda);
      t(i) = theta(i) - kStep;
      probe.set_parameters(t);
      const auto minus = sdore_objective(probe, X, Y, Z, lambda);
      stable = plus.pattern == base.pattern && minus.pattern == base.pattern;
      fd(i) = (plus.value - minus.value) / (2 * kStep);
    }
    if (!stable || fd.cwiseAbs().maxCoeff() < 1e-8) continue;

    const model::Ensemble ens(net);
    model::Tape tape;
    const auto bound = model::bind(tape, ens, true);
    const training::LabeledSet batch{X, Y};
    const training::UnlabeledSet pen{Z};
    const auto loss = training::loss_sdore(tape, bound, batch, pen, lambda);
    const Vector analytic = model::gradient_vector(tape.backward(loss.total), bound, ens);
    r.max_error = std::max(r.max_error, rel_error(analytic, fd));
    ++r.cases;
  }
  return r;
}

CheckResult check_hessian(const Options& options) {
  CheckResult r{"hessian", 0.0, 1e-4, 0};
  auto rng = stream_rng(options.seed, 3);
  while (r.cases < options.networks) {
    const auto net = random_network(rng, random_dim(rng));
    Vector x;
    PointEval e;
    if (!draw_point(rng, net, x, e)) continue;
    const double trace = autodiff::forward_jet(net, x, 2).laplacian();
    double div = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      Vector xp = x, xm = x;
      xp(k) += kStep;
      xm(k) -= kStep;
      div += (eval_point(net, xp).grad(k) - eval_point(net, xm).grad(k)) / (2 * kStep);
    }
    r.max_error = std::max(r.max_error, std::abs(trace - div) / std::max(std::abs(div), 1e-3));
    ++r.cases;
  }
  return r;
}

CheckResult check_ridge(const Options& options) {
  CheckResult r{"ridge", 0.0, 1e-4, 0};
  auto rng = stream_rng(options.seed, 4);
  std::uniform_int_distribution<int> dim(1, 10);
  for (double lambda : {1e-3, 1e-1, 1.0}) {
    for (int t = 0; t < options.ridge_instances; ++t) {
      const int d = dim(rng);
      const Eigen::Index n = 200;
      Matrix X = uniform_matrix(rng, n, d, -1.0, 1.0);
      X.rowwise() -= X.colwise().mean();
      const Vector beta = uniform_matrix(rng, d, 1, -2.0, 2.0).col(0);
      Vector y = X * beta + 0.1 * uniform_matrix(rng, n, 1, -1.0, 1.0).col(0);
      y.array() -= y.mean();

      training::TrainConfig tc;
      tc.optimizer = training::Optimizer::kGradientDescent;
      tc.learning_rate = 0.2;
      tc.batch_size = static_cast<int>(n);
      tc.epochs = 400;
      tc.seed = options.seed;
      const training::LabeledSet labeled{X, y};
      const training::UnlabeledSet unlabeled{X};
      const model::Ensemble init(model::ReQUNetwork(std::vector<int>{d, 1}));
      const auto fit = training::train(init, labeled, &unlabeled, {training::Variant::kSDORE, lambda, {}}, tc);

      Vector expected = Vector::Zero(d + 1);
      expected.head(d) = experiments::ridge_oracle(X, y, lambda);
      const Vector got = fit.model.parameters();
      r.max_error = std::max(r.max_error, (got - expected).norm() / expected.norm());
      ++r.cases;
    }
  }
  return r;
}

std::vector<CheckResult> run_all(const Options& options) {
  return {check_input_grad(options), check_param_grad(options), check_hessian(options), check_ridge(options)};
}

}  // namespace sdore::gradcheck
