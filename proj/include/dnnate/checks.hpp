#pragma once

// Property suites run by `dnnate check` and the acceptance binary.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dnnate::checks {

struct CheckResult {
  std::string suite;
  std::string property;
  bool passed = false;
  std::string detail;
};

struct CheckOptions {
  std::uint64_t seed = 20220520;
  std::size_t threads = 1;
  // Test hook: Adam runs with this beta1 while the golden values keep 0.9.
  std::optional<double> inject_adam_beta1;
};

// gradient, adam-golden, oracle-normality, variance-ordering.
const std::vector<std::string>& suite_names();

std::vector<CheckResult> run_suite(std::string_view suite, const CheckOptions& opts);

struct GradientReport {
  std::size_t nets = 0;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
};

// Backprop against central differences (h = 1e-5) on `dense_nets` random dense
// nets, half sigmoid and half relu, plus `hierarchical_nets` hierarchical ones.
// Per coordinate: |g - fd| / max(|g|, |fd|, 1e-3).
GradientReport gradient_check(std::size_t dense_nets, std::size_t hierarchical_nets,
                              std::uint64_t seed);

// Two Adam steps on (0.5, -0.25) with gradients (1, -2) then (-0.5, 0.75).
std::vector<double> adam_two_steps(double beta1);
// Hand-computed parameters after those two steps with the default settings.
std::vector<double> adam_golden();

// E[(m1 - m0)^2] - tau^2 + noise_sd^2 E[1 / (e (1 - e))] by Monte Carlo.
double sigma2_dr_monte_carlo(std::size_t draws, double tau, double noise_sd, std::uint64_t seed);

struct OracleStudy {
  std::vector<double> estimates;
  double coverage = 0.0;
  double ks_p = 0.0;
  double sd = 0.0;
  double scaled_variance = 0.0;  // n * sample variance of the estimates
};

// Oracle-nuisance replications of one estimator at inference size n.
OracleStudy oracle_study(std::string_view method, std::size_t n, std::size_t replications,
                         std::uint64_t seed, std::size_t threads, std::size_t p = 3);

}  // namespace dnnate::checks
