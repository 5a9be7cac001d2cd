#include "sdore/errors.hpp"
#include "sdore/experiments.hpp"
#include "sdore/format.hpp"
#include "sdore/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sdore::experiments {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr Eigen::Index kSigmaDraws = 100000;
constexpr std::uint64_t kSigmaSeed = 0x5D0E5EEDull;

/// Independent U[lo_k, hi_k] coordinates.
Sampler box_sampler(std::vector<std::pair<double, double>> ranges) {
  return [ranges](std::mt19937_64& rng, Eigen::Index n) {
    Matrix X(n, static_cast<Eigen::Index>(ranges.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < ranges.size(); ++k) {
        std::uniform_real_distribution<double> u(ranges[k].first, ranges[k].second);
        X(i, static_cast<Eigen::Index>(k)) = u(rng);
      }
    }
    return X;
  };
}

Sampler unit_cube(int d) { return box_sampler(std::vector<std::pair<double, double>>(d, {0.0, 1.0})); }

/// Midpoint grid with `per_axis` cells per axis on [lo, hi]^d (d = 1 or 2).
Matrix midpoint_grid(int d, int per_axis, double lo, double hi) {
  const double h = (hi - lo) / per_axis;
  if (d == 1) {
    Matrix X(per_axis, 1);
    for (int i = 0; i < per_axis; ++i) X(i, 0) = lo + (i + 0.5) * h;
    return X;
  }
  Matrix X(per_axis * per_axis, 2);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) X.row(i * per_axis + j) << lo + (i + 0.5) * h, lo + (j + 0.5) * h;
  }
  return X;
}

/// Grid including both endpoints.
Matrix linspace_grid(int d, int per_axis, double lo, double hi) {
  const double h = (hi - lo) / (per_axis - 1);
  if (d == 1) {
    Matrix X(per_axis, 1);
    for (int i = 0; i < per_axis; ++i) X(i, 0) = lo + i * h;
    return X;
  }
  Matrix X(per_axis * per_axis, 2);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) X.row(i * per_axis + j) << lo + i * h, lo + j * h;
  }
  return X;
}

void add_noise(Vector& y, double sigma, std::mt19937_64& rng) {
  if (sigma == 0.0) return;
  std::normal_distribution<double> g(0.0, sigma);
  for (auto& v : y) v += g(rng);
}

Vector evaluate(const ScalarFn& f, const Matrix& X) {
  Vector y(X.rows());
  Vector x(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    x = X.row(i).transpose();
    y(i) = f(x);
  }
  return y;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) { return stream_rng(seed, stream)(); }

void ProblemSpec::validate() const {
  if (d < 1) throw ContractViolation("problem '" + name + "': d must be at least 1");
  if (fixed) {
    if (fixed->data.dim() != d) throw ContractViolation("problem '" + name + "': data width differs from d");
    if (!(fixed->test_fraction >= 0.0 && fixed->test_fraction < 1.0) ||
        !(fixed->unlabeled_fraction >= 0.0 && fixed->unlabeled_fraction < 1.0)) {
      throw ContractViolation("problem '" + name + "': fractions must lie in [0, 1)");
    }
    return;
  }
  if (noise.sigma.has_value() == noise.snr.has_value()) {
    throw ContractViolation("problem '" + name + "': specify exactly one of sigma and snr");
  }
  if (noise.sigma && !(*noise.sigma >= 0.0)) throw ContractViolation("sigma must be nonnegative");
  if (noise.snr && !(*noise.snr > 0.0)) throw ContractViolation("snr must be positive");
  if (n < 1) throw ContractViolation("problem '" + name + "': n must be at least 1");
  if (m < 0) throw ContractViolation("problem '" + name + "': m must be nonnegative");
  if (!f0 || !mu_sampler) throw ContractViolation("problem '" + name + "': missing f0 or sampler");
  if (m > 0 && !nu_sampler) throw ContractViolation("problem '" + name + "': m > 0 needs a nu sampler");
}

SigmaInfo resolve_sigma(const ProblemSpec& spec) {
  if (spec.fixed) return {0.0, "observed labels; no synthetic noise"};
  if (spec.noise.sigma) return {*spec.noise.sigma, "sigma given directly: " + format_double(*spec.noise.sigma)};
  auto rng = stream_rng(kSigmaSeed, 0);
  const Vector f = evaluate(spec.f0, spec.mu_sampler(rng, kSigmaDraws));
  const double mean = f.mean();
  const double sd = std::sqrt((f.array() - mean).square().sum() / static_cast<double>(f.size() - 1));
  SigmaInfo info;
  info.sigma = sd / *spec.noise.snr;
  info.provenance = "sigma = sd(f0) / snr with sd(f0) = " + format_double(sd) + " over " +
                    std::to_string(kSigmaDraws) + " draws from mu (fixed stream), snr = " +
                    format_double(*spec.noise.snr);
  return info;
}

ProblemData generate(const ProblemSpec& spec, std::uint64_t seed) {
  spec.validate();
  return generate(spec, seed, resolve_sigma(spec).sigma);
}

ProblemData generate(const ProblemSpec& spec, std::uint64_t seed, double sigma) {
  spec.validate();
  ProblemData out;
  out.sigma = sigma;
  if (spec.fixed) {
    const auto& all = spec.fixed->data;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(all.size()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    auto rng = stream_rng(seed, 10);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_all = static_cast<Eigen::Index>(order.size());
    const auto n_test = static_cast<Eigen::Index>(std::floor(spec.fixed->test_fraction * n_all));
    const auto n_rest = n_all - n_test;
    const auto n_unlab = static_cast<Eigen::Index>(std::floor(spec.fixed->unlabeled_fraction * n_rest));
    const auto n_lab = n_rest - n_unlab;
    if (n_lab < 1) throw ContractViolation("problem '" + spec.name + "': no labeled rows left after splitting");
    auto take = [&](Eigen::Index begin, Eigen::Index count, Matrix& X, Vector* Y) {
      X.resize(count, all.dim());
      if (Y) Y->resize(count);
      for (Eigen::Index i = 0; i < count; ++i) {
        X.row(i) = all.X.row(order[begin + i]);
        if (Y) (*Y)(i) = all.Y(order[begin + i]);
      }
    };
    take(0, n_test, out.test.X, &out.test.Y);
    take(n_test, n_lab, out.labeled.X, &out.labeled.Y);
    take(n_test + n_lab, n_unlab, out.unlabeled.Z, nullptr);
    return out;
  }
  auto rx = stream_rng(seed, 10);
  out.labeled.X = spec.mu_sampler(rx, spec.n);
  out.labeled.Y = evaluate(spec.f0, out.labeled.X);
  auto re = stream_rng(seed, 12);
  add_noise(out.labeled.Y, sigma, re);
  if (spec.m > 0) {
    auto rz = stream_rng(seed, 11);
    out.unlabeled.Z = spec.nu_sampler(rz, spec.m);
  } else {
    out.unlabeled.Z.resize(0, spec.d);
  }
  return out;
}

LabeledSet test_set(const ProblemSpec& spec, std::uint64_t seed, int index, Eigen::Index size, double sigma) {
  auto rng = stream_rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(index)), 0);
  LabeledSet t;
  t.X = spec.mu_sampler(rng, size);
  t.Y = evaluate(spec.f0, t.X);
  add_noise(t.Y, sigma, rng);
  return t;
}

ProblemSpec example_1d(Eigen::Index n, Eigen::Index m) {
  ProblemSpec s;
  s.name = "example6_1";
  s.d = 1;
  s.f0 = [](const Eigen::Ref<const Vector>& x) {
    const double t = x(0);
    return 1 + 36 * t * t - 59 * t * t * t + 21 * std::pow(t, 5) + 0.5 * std::cos(kPi * t);
  };
  s.grad_f0 = [](const Eigen::Ref<const Vector>& x) {
    const double t = x(0);
    Vector g(1);
    g(0) = 72 * t - 177 * t * t + 105 * std::pow(t, 4) - 0.5 * kPi * std::sin(kPi * t);
    return g;
  };
  s.mu_sampler = unit_cube(1);
  s.nu_sampler = unit_cube(1);
  s.noise.snr = 30.0;
  s.n = n;
  s.m = m;
  s.lambda = 1e-3;
  s.eval_points = [] { return midpoint_grid(1, 1000, 0.05, 0.95); };
  s.plot_points = [] { return linspace_grid(1, 501, 0.0, 1.0); };
  return s;
}

ProblemSpec example_selection(Eigen::Index n, Eigen::Index m) {
  ProblemSpec s;
  s.name = "example6_2";
  s.d = 20;
  s.f0 = [](const Eigen::Ref<const Vector>& x) {
    double v = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = i + 1; j < 4; ++j) v += x(i) * x(j);
    return v;
  };
  s.grad_f0 = [](const Eigen::Ref<const Vector>& x) {
    Vector g = Vector::Zero(x.size());
    const double total = x(0) + x(1) + x(2) + x(3);
    for (int k = 0; k < 4; ++k) g(k) = total - x(k);
    return g;
  };
  s.mu_sampler = unit_cube(20);
  s.nu_sampler = unit_cube(20);
  s.noise.snr = 25.0;
  s.n = n;
  s.m = m;
  s.lambda = 1e-2;
  s.relevant = {0, 1, 2, 3};
  return s;
}

ProblemSpec example_inverse(Eigen::Index n, double sigma, Eigen::Index m) {
  ProblemSpec s;
  s.name = "example6_3";
  s.d = 2;
  s.f0 = [](const Eigen::Ref<const Vector>& x) { return std::cos(2 * kPi * x(0)) * std::cos(3 * kPi * x(1)); };
  s.grad_f0 = [](const Eigen::Ref<const Vector>& x) {
    Vector g(2);
    g << -2 * kPi * std::sin(2 * kPi * x(0)) * std::cos(3 * kPi * x(1)),
        -3 * kPi * std::cos(2 * kPi * x(0)) * std::sin(3 * kPi * x(1));
    return g;
  };
  s.potential = [](const Eigen::Ref<const Vector>&) { return 3 * kPi * kPi; };
  s.source = [](const Eigen::Ref<const Vector>& x) {
    return 16 * kPi * kPi * std::cos(2 * kPi * x(0)) * std::cos(3 * kPi * x(1));
  };
  s.mu_sampler = unit_cube(2);
  s.nu_sampler = unit_cube(2);
  s.noise.sigma = sigma;
  s.n = n;
  s.m = m;
  s.lambda = 1e-8;
  s.eval_points = [] { return midpoint_grid(2, 100, 0.0, 1.0); };
  s.source_points = [] { return linspace_grid(2, 64, 0.1, 0.9); };
  s.plot_points = [] { return linspace_grid(2, 51, 0.0, 1.0); };
  return s;
}

ProblemSpec appendix_toy(Eigen::Index n, Eigen::Index m) {
  ProblemSpec s;
  s.name = "appendix_toy";
  s.d = 2;
  s.f0 = [](const Eigen::Ref<const Vector>& x) { return x(0) * x(0); };
  s.grad_f0 = [](const Eigen::Ref<const Vector>& x) {
    Vector g(2);
    g << 2 * x(0), 0.0;
    return g;
  };
  // N(mean, variance) notation: x2 has variance 0.05, the noise variance 0.1.
  const Sampler sampler = [](std::mt19937_64& rng, Eigen::Index count) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::normal_distribution<double> g(0.0, std::sqrt(0.05));
    Matrix X(count, 2);
    for (Eigen::Index i = 0; i < count; ++i) {
      X(i, 0) = u(rng);
      X(i, 1) = g(rng);
    }
    return X;
  };
  s.mu_sampler = sampler;
  // The unlabeled sample covers the whole square, off the labeled support.
  s.nu_sampler = box_sampler({{-1.0, 1.0}, {-1.0, 1.0}});
  s.noise.sigma = std::sqrt(0.1);
  s.n = n;
  s.m = m;
  s.lambda = 1e-4;
  s.relevant = {0};
  s.plot_points = [] { return linspace_grid(2, 41, -1.0, 1.0); };
  return s;
}

ProblemSpec appendix_sim(Eigen::Index n, Eigen::Index m) {
  ProblemSpec s;
  s.name = "appendix_sim";
  s.d = 10;
  s.f0 = [](const Eigen::Ref<const Vector>& x) {
    return 2 * x(0) * x(0) + std::exp(x(1)) + 2 * std::sin(x(2)) + 2 * std::cos(x(3) + 1);
  };
  s.grad_f0 = [](const Eigen::Ref<const Vector>& x) {
    Vector g = Vector::Zero(10);
    g(0) = 4 * x(0);
    g(1) = std::exp(x(1));
    g(2) = 2 * std::cos(x(2));
    g(3) = -2 * std::sin(x(3) + 1);
    return g;
  };
  std::vector<std::pair<double, double>> ranges(4, {0.0, 1.0});
  ranges.resize(10, {0.0, 0.05});
  s.mu_sampler = box_sampler(ranges);
  s.nu_sampler = box_sampler(ranges);
  s.noise.snr = 25.0;
  s.n = n;
  s.m = m;
  s.lambda = 1e-4;
  s.relevant = {0, 1, 2, 3};
  return s;
}

ProblemSpec csv_selection(FixedData data) {
  ProblemSpec s;
  s.name = "csv_selection";
  s.d = data.data.dim();
  s.n = data.data.size();
  s.lambda = 1e-2;
  s.fixed = std::move(data);
  return s;
}

Generated gen_example_1d(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  auto spec = example_1d(n, m);
  auto data = generate(spec, seed);
  return {std::move(spec), std::move(data)};
}

Generated gen_example_selection(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  auto spec = example_selection(n, m);
  auto data = generate(spec, seed);
  return {std::move(spec), std::move(data)};
}

Generated gen_example_inverse(Eigen::Index n, std::uint64_t seed, double sigma) {
  auto spec = example_inverse(n, sigma, n);
  auto data = generate(spec, seed);
  return {std::move(spec), std::move(data)};
}

Generated gen_appendix_toy(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  auto spec = appendix_toy(n, m);
  auto data = generate(spec, seed);
  return {std::move(spec), std::move(data)};
}

Generated gen_appendix_sim(Eigen::Index n, Eigen::Index m, std::uint64_t seed) {
  auto spec = appendix_sim(n, m);
  auto data = generate(spec, seed);
  return {std::move(spec), std::move(data)};
}

}  // namespace sdore::experiments
