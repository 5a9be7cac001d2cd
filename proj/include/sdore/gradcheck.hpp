#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sdore::gradcheck {

struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  int cases = 0;
  bool passed() const { return max_error < tolerance; }
};

struct Options {
  std::uint64_t seed = 0;
  /// Random networks per derivative check.
  int networks = 100;
  /// Affine ridge instances per lambda.
  int ridge_instances = 3;
};

/// Finite-difference checks of the autodiff stack:
///   input_grad   forward-jet gradient vs central differences (h = 1e-4), tol 1e-5
///   param_grad   tape gradient of the SDORE loss vs central differences, tol 1e-4
///   hessian      trace of the forward-jet Hessian vs divergence of the
///                gradient by central differences, tol 1e-4
///   ridge        full-batch SDORE on an affine model vs the closed-form ridge
///                solution, tol 1e-4
/// Errors are norm-wise relative: max |a - b| / max |b|.
std::vector<CheckResult> run_all(const Options& options);

CheckResult check_input_grad(const Options& options);
CheckResult check_param_grad(const Options& options);
CheckResult check_hessian(const Options& options);
CheckResult check_ridge(const Options& options);

}  // namespace sdore::gradcheck
