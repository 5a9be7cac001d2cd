#include "doctest.h"
#include "oracles.hpp"

#include "sdore/errors.hpp"
#include "sdore/training.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

using namespace sdore;
using model::Ensemble;
using model::Matrix;
using model::ReQUNetwork;
using model::Vector;
using training::LabeledSet;
using training::LossSpec;
using training::TrainConfig;
using training::UnlabeledSet;
using training::Variant;

namespace {

ReQUNetwork affine(const Vector& theta, double bias) {
  ReQUNetwork net({static_cast<int>(theta.size()), 1});
  net.weight(0) = theta.transpose();
  net.bias(0)(0) = bias;
  return net;
}

Vector gaussian(std::mt19937_64& rng, Eigen::Index n, double sd = 1.0) {
  std::normal_distribution<double> g(0.0, sd);
  Vector v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

/// Centered linear-regression instance, so the optimal intercept is zero.
struct RidgeInstance {
  LabeledSet data;
  UnlabeledSet unlabeled;
};

RidgeInstance ridge_instance(std::uint64_t seed, int n, int d, int m) {
  std::mt19937_64 rng(seed);
  RidgeInstance inst;
  Matrix X(n, d);
  for (int k = 0; k < d; ++k) X.col(k) = gaussian(rng, n);
  X.rowwise() -= X.colwise().mean();
  const Vector beta = gaussian(rng, d);
  Vector y = X * beta + gaussian(rng, n, 0.3);
  y.array() -= y.mean();
  inst.data = {X, y};
  inst.unlabeled.Z = oracle::uniform_points(rng, m, d, -1.0, 1.0);
  return inst;
}

double f0_example1(double x) {
  return 1 + 36 * x * x - 59 * x * x * x + 21 * std::pow(x, 5) + 0.5 * std::cos(std::numbers::pi * x);
}

}  // namespace

TEST_CASE("loss_ls") {
  SUBCASE("hand example") {
    ReQUNetwork net({1, 1});
    net.weight(0)(0, 0) = 1.0;
    Matrix X(2, 1);
    X << 1, 2;
    Vector Y(2);
    Y << 1, 3;
    model::Tape tape;
    const auto bound = model::bind(tape, Ensemble(net), false);
    // residuals 0 and -1
    CHECK(tape.scalar(training::loss_ls(tape, bound, {X, Y})) == 0.5);
  }
  SUBCASE("empty batch") {
    model::Tape tape;
    const auto bound = model::bind(tape, Ensemble(ReQUNetwork({2, 1})), false);
    CHECK_THROWS_AS(training::loss_ls(tape, bound, {Matrix(0, 2), Vector(0)}), ContractViolation);
  }
}

TEST_CASE("lambda = 0 collapses every variant to least squares bit for bit") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto net = oracle::random_network(rng, 3, 2, 12);
    const Matrix X = oracle::uniform_points(rng, 17, 3);
    const Vector Y = gaussian(rng, 17);
    const Matrix Z = oracle::uniform_points(rng, 40, 3);
    model::Tape tape;
    const auto bound = model::bind(tape, Ensemble(net), true);
    const double ls = tape.scalar(training::loss_ls(tape, bound, {X, Y}));
    const auto s = training::loss_sdore(tape, bound, {X, Y}, {Z}, 0.0);
    const auto d = training::loss_dore(tape, bound, {X, Y}, Z, 0.0);
    CHECK(tape.scalar(s.total) == ls);
    CHECK(tape.scalar(d.total) == ls);
    CHECK_FALSE(s.penalty.valid());
    CHECK(tape.scalar(s.total) == doctest::Approx(oracle::sdore_objective(net, X, Y, Z, 0.0)).epsilon(1e-13));
  }
}

TEST_CASE("penalty of an affine model is lambda |theta|^2") {
  Vector theta(3);
  theta << 0.5, -1.5, 2.0;
  const auto net = affine(theta, 0.25);
  std::mt19937_64 rng(1);
  const Matrix X = oracle::uniform_points(rng, 9, 3);
  const Vector Y = gaussian(rng, 9);
  const Matrix Z = oracle::uniform_points(rng, 30, 3);
  const double lambda = 0.3;
  const auto v = training::evaluate_loss(Ensemble(net), {X, Y}, &Z, lambda);
  CHECK(v.penalty == doctest::Approx(lambda * theta.squaredNorm()).epsilon(1e-14));
  CHECK(v.total == doctest::Approx(v.fit + v.penalty).epsilon(1e-15));

  // d/dtheta of |grad f|^2 is 2 theta.
  model::Tape tape;
  const auto bound = model::bind(tape, Ensemble(net), true);
  const auto loss = training::loss_sdore(tape, bound, {X, Y}, {Z}, 1.0);
  const auto grads = tape.backward(loss.penalty);
  const Matrix expected = 2.0 * theta.transpose();
  CHECK((grads[bound.members[0].weights[0]] - expected).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(grads[bound.members[0].biases[0]](0, 0) == 0.0);
}

TEST_CASE("adam_step against hand arithmetic") {
  training::AdamParams p{0.1, 0.9, 0.999, 1e-8};
  Vector start(2);
  start << 1.0, -2.0;
  auto state = training::AdamState::start(start);
  Vector g1(2), g2(2);
  g1 << 0.5, -0.1;
  g2 << -0.25, 0.3;
  training::adam_step(state, g1, p);
  // First bias-corrected step is lr * g / (|g| + eps).
  CHECK(state.params(0) == doctest::Approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-15));
  CHECK(state.params(1) == doctest::Approx(-2.0 + 0.1 * 0.1 / (0.1 + 1e-8)).epsilon(1e-15));
  training::adam_step(state, g2, p);
  for (int i = 0; i < 2; ++i) {
    const double m = 0.9 * (0.1 * g1(i)) + 0.1 * g2(i);
    const double v = 0.999 * (0.001 * g1(i) * g1(i)) + 0.001 * g2(i) * g2(i);
    const double mhat = m / (1 - 0.81);
    const double vhat = v / (1 - 0.999 * 0.999);
    const double first = start(i) - 0.1 * g1(i) / (std::abs(g1(i)) + 1e-8);
    CHECK(state.params(i) == doctest::Approx(first - 0.1 * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-14));
  }
  CHECK(state.step == 2);
  CHECK_THROWS_AS(training::adam_step(state, Vector::Zero(3), p), ContractViolation);
}

TEST_CASE("learning-rate schedules") {
  TrainConfig c;
  c.epochs = 11;
  c.learning_rate = 1e-2;
  c.final_learning_rate = 1e-4;
  CHECK(c.learning_rate_at(5) == 1e-2);
  c.schedule = training::Schedule::kExponential;
  CHECK(c.learning_rate_at(0) == doctest::Approx(1e-2));
  CHECK(c.learning_rate_at(5) == doctest::Approx(1e-3));
  CHECK(c.learning_rate_at(10) == doctest::Approx(1e-4));
  c.schedule = training::Schedule::kCosine;
  CHECK(c.learning_rate_at(0) == doctest::Approx(1e-2));
  CHECK(c.learning_rate_at(5) == doctest::Approx(0.5 * (1e-2 + 1e-4)));
  CHECK(c.learning_rate_at(10) == doctest::Approx(1e-4));

  TrainConfig bad;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
  bad = {};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("variant names") {
  for (auto v : {Variant::kLS, Variant::kDORE, Variant::kSDORE, Variant::kSDOREPooled}) {
    CHECK(training::parse_variant(training::to_string(v)) == v);
  }
  CHECK_THROWS_AS(training::parse_variant("ridge"), ContractViolation);
}

TEST_CASE("full-batch SDORE on an affine model converges to the ridge solution") {
  for (int trial = 0; trial < 4; ++trial) {
    const auto inst = ridge_instance(50 + trial, 200, 2 + 2 * trial, 100);
    for (double lambda : {1e-3, 1e-1, 1.0}) {
      const Vector expected = oracle::ridge_normal_equations(inst.data.X, inst.data.Y, lambda);
      Vector reference(expected.size() + 1);
      reference << expected, 0.0;

      SUBCASE("gradient descent") {
        TrainConfig c;
        c.optimizer = training::Optimizer::kGradientDescent;
        c.learning_rate = 0.2;
        c.batch_size = 200;
        c.epochs = 400;
        const auto r = training::train(model::init_ensemble({inst.data.dim(), 1}, 1, 3), inst.data,
                                       &inst.unlabeled, {Variant::kSDORE, lambda, {}}, c);
        CHECK(oracle::rel_error(r.model.parameters(), reference) < 1e-4);
      }
      SUBCASE("adam with cosine decay") {
        TrainConfig c;
        c.learning_rate = 2e-2;
        c.final_learning_rate = 1e-6;
        c.schedule = training::Schedule::kCosine;
        c.batch_size = 200;
        c.epochs = 3000;
        const auto r = training::train(model::init_ensemble({inst.data.dim(), 1}, 1, 3), inst.data,
                                       &inst.unlabeled, {Variant::kSDORE, lambda, {}}, c);
        CHECK(oracle::rel_error(r.model.parameters(), reference) < 1e-4);
      }
    }
  }
}

TEST_CASE("full-batch gradient descent decreases the objective monotonically") {
  const auto inst = ridge_instance(8, 60, 4, 60);
  TrainConfig c;
  c.optimizer = training::Optimizer::kGradientDescent;
  c.learning_rate = 0.05;
  c.batch_size = 1000;
  c.epochs = 200;
  const auto r = training::train(model::init_ensemble({4, 1}, 1, 9), inst.data, &inst.unlabeled,
                                 {Variant::kSDORE, 0.5, {}}, c);
  CHECK(r.history.back().total_loss < 0.5 * r.history.front().total_loss);
  // Once converged, successive losses agree to the last bit or two.
  for (std::size_t e = 1; e < r.history.size(); ++e) {
    CHECK(r.history[e].total_loss <= r.history[e - 1].total_loss * (1.0 + 1e-14));
  }
}

TEST_CASE("training is determined by seed, config and data") {
  std::mt19937_64 rng(2);
  const Matrix X = oracle::uniform_points(rng, 90, 2);
  const Vector Y = X.col(0).array().square() + X.col(1).array();
  const UnlabeledSet U{oracle::uniform_points(rng, 300, 2)};
  TrainConfig c;
  c.batch_size = 32;
  c.epochs = 15;
  c.seed = 77;
  const auto init = model::init_ensemble({2, 8, 8, 1}, 1, 5);
  const LossSpec spec{Variant::kSDORE, 1e-2, {}};
  const auto a = training::train(init, {X, Y}, &U, spec, c);
  const auto b = training::train(init, {X, Y}, &U, spec, c);
  CHECK(a.model == b.model);
  c.seed = 78;
  const auto other = training::train(init, {X, Y}, &U, spec, c);
  CHECK_FALSE(a.model == other.model);

  SUBCASE("lambda = 0 variants produce identical models") {
    c.seed = 77;
    const auto ls = training::train(init, {X, Y}, &U, {Variant::kLS, 0.0, {}}, c);
    const auto dore = training::train(init, {X, Y}, &U, {Variant::kDORE, 0.0, {}}, c);
    const auto sdore = training::train(init, {X, Y}, &U, {Variant::kSDORE, 0.0, {}}, c);
    CHECK(ls.model == dore.model);
    CHECK(ls.model == sdore.model);
  }
  SUBCASE("pooled variant equals SDORE on the stacked covariates") {
    c.seed = 77;
    UnlabeledSet stacked{Matrix(X.rows() + U.size(), 2)};
    stacked.Z << X, U.Z;
    const auto pooled = training::train(init, {X, Y}, &U, {Variant::kSDOREPooled, 1e-2, {}}, c);
    const auto manual = training::train(init, {X, Y}, &stacked, {Variant::kSDORE, 1e-2, {}}, c);
    CHECK(pooled.model == manual.model);
  }
  SUBCASE("DORE with nu points equals SDORE on those points") {
    c.seed = 77;
    const auto dore = training::train(init, {X, Y}, nullptr, {Variant::kDORE, 1e-2, U.Z}, c);
    const auto sdore = training::train(init, {X, Y}, &U, {Variant::kSDORE, 1e-2, {}}, c);
    CHECK(dore.model == sdore.model);
  }
}

TEST_CASE("training contract errors") {
  const LabeledSet data{Matrix::Zero(4, 2), Vector::Zero(4)};
  const auto init = model::init_ensemble({2, 4, 1}, 1, 0);
  TrainConfig c;
  c.epochs = 1;
  CHECK_THROWS_AS(training::train(init, data, nullptr, {Variant::kSDORE, 1.0, {}}, c), ContractViolation);
  CHECK_THROWS_AS(training::train(init, {Matrix::Zero(4, 3), Vector::Zero(4)}, nullptr, {Variant::kLS, 0, {}}, c),
                  ContractViolation);
  CHECK_THROWS_AS(training::train(init, {Matrix::Zero(4, 2), Vector::Zero(3)}, nullptr, {Variant::kLS, 0, {}}, c),
                  ContractViolation);
  CHECK_THROWS_AS(training::train(init, data, nullptr, {Variant::kLS, -1.0, {}}, c), ContractViolation);
  const UnlabeledSet wrong{Matrix::Zero(5, 3)};
  CHECK_THROWS_AS(training::train(init, data, &wrong, {Variant::kSDORE, 1.0, {}}, c), ContractViolation);
}

TEST_CASE("DORE without nu points penalizes the labeled minibatch") {
  std::mt19937_64 rng(6);
  const Matrix X = oracle::uniform_points(rng, 40, 2);
  const Vector Y = gaussian(rng, 40);
  const auto init = model::init_ensemble({2, 6, 1}, 1, 2);
  TrainConfig c;
  c.batch_size = 40;
  c.epochs = 1;
  const auto r = training::train(init, {X, Y}, nullptr, {Variant::kDORE, 0.2, {}}, c);
  const auto v = training::evaluate_loss(init, {X, Y}, &X, 0.2);
  CHECK(r.history[0].total_loss == doctest::Approx(v.total).epsilon(1e-13));
  CHECK(r.history[0].penalty_term == doctest::Approx(v.penalty).epsilon(1e-13));
}

TEST_CASE("a huge penalty drives the input gradient to zero") {
  std::mt19937_64 rng(12);
  const Matrix X = oracle::uniform_points(rng, 64, 1);
  const Vector Y = (X.col(0).array() * 6.0).sin();
  const UnlabeledSet U{oracle::uniform_points(rng, 64, 1)};
  TrainConfig c;
  c.batch_size = 64;
  c.epochs = 600;
  c.learning_rate = 1e-2;
  c.final_learning_rate = 1e-5;
  c.schedule = training::Schedule::kCosine;
  const auto init = model::init_ensemble({1, 8, 8, 1}, 1, 4);
  const auto r = training::train(init, {X, Y}, &U, {Variant::kSDORE, 1e6, {}}, c);
  const double initial_fit = r.history.front().fit_term;
  const auto final_loss = training::evaluate_loss(r.model, {X, Y}, &U.Z, 1e6);
  MESSAGE("initial fit " << initial_fit << ", final penalty " << final_loss.penalty);
  CHECK(final_loss.penalty < initial_fit);
  const std::size_t tail = r.history.size() / 10;
  for (std::size_t e = r.history.size() - tail; e < r.history.size(); ++e) {
    CHECK(r.history[e].penalty_term <= r.history[e - 1].penalty_term);
  }
}

TEST_CASE("example6_1 configuration trains with a decreasing loss trend") {
  std::mt19937_64 rng(2024);
  const Matrix X = oracle::uniform_points(rng, 500, 1);
  const Matrix Z = oracle::uniform_points(rng, 5000, 1);
  Vector f(500);
  for (int i = 0; i < 500; ++i) f(i) = f0_example1(X(i, 0));
  const double sd = std::sqrt((f.array() - f.mean()).square().sum() / 499.0);
  const Vector Y = f + gaussian(rng, 500, sd / 30.0);

  const UnlabeledSet U{Z};
  TrainConfig c;
  c.seed = 1;
  const auto r = training::train(model::init_ensemble({1, 64, 64, 1}, 1, 1), {X, Y}, &U,
                                 {Variant::kSDORE, 1e-3, {}}, c);
  REQUIRE(r.history.size() == 1000);
  for (const auto& e : r.history) {
    CHECK(std::isfinite(e.total_loss));
  }
  // Non-overlapping 100-epoch means never increase.
  double previous = std::numeric_limits<double>::infinity();
  for (int block = 0; block < 10; ++block) {
    double mean = 0.0;
    for (int e = 100 * block; e < 100 * (block + 1); ++e) mean += r.history[e].total_loss / 100.0;
    MESSAGE("block " << block << " mean loss " << mean);
    CHECK(mean <= previous);
    previous = mean;
  }
}

TEST_CASE("ensemble training keeps alpha on the simplex") {
  std::mt19937_64 rng(13);
  const Matrix X = oracle::uniform_points(rng, 50, 2);
  const Vector Y = X.rowwise().sum();
  const UnlabeledSet U{oracle::uniform_points(rng, 50, 2)};
  TrainConfig c;
  c.epochs = 20;
  c.batch_size = 25;
  c.learning_rate = 1e-2;
  const auto r = training::train(model::init_ensemble({2, 6, 1}, 3, 1), {X, Y}, &U,
                                 {Variant::kSDORE, 1e-3, {}}, c);
  CHECK(r.model.alpha().sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((r.model.alpha().array() >= 0).all());
  CHECK_FALSE(r.model.alpha().isApproxToConstant(1.0 / 3.0, 1e-6));
}

TEST_CASE("early stopping and history output") {
  std::mt19937_64 rng(3);
  const Matrix X = oracle::uniform_points(rng, 20, 1);
  const Vector Y = Vector::Zero(20);
  TrainConfig c;
  c.epochs = 500;
  c.batch_size = 20;
  c.early_stopping_patience = 5;
  c.optimizer = training::Optimizer::kGradientDescent;
  c.learning_rate = 1e-12;
  // Zero model on zero targets: the loss never improves after the first epoch.
  const auto r = training::train(Ensemble(ReQUNetwork({1, 3, 1})), {X, Y}, nullptr,
                                 {Variant::kLS, 0.0, {}}, c);
  CHECK(r.history.size() == 6);

  const auto path = std::filesystem::temp_directory_path() / "sdore_test_history.csv";
  training::write_history_csv(r.history, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,total_loss,fit_term,penalty_term");
  std::getline(in, line);
  CHECK(line == "0,0,0,0");
}
