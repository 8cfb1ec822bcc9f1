#pragma once

// Simulation design with known truth: X ~ U[0,1]^p,
// T | X ~ Bernoulli(e(X)) with e(x) = (1 + Beta(2,4) density at x3) / 4,
// Y = x1^2 + x2 + x3^2 + tau * T + eps, eps ~ N(0, noise_sd^2).

#include <cstddef>
#include <cstdint>
#include <span>

#include "dnnate/dataset.hpp"
#include "dnnate/estimators.hpp"

namespace dnnate::dgp {

struct DgpConfig {
  std::size_t n = 1000;
  std::size_t p = 50;
  double tau = 1.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Control-arm mean x1^2 + x2 + x3^2 (x is 0-indexed: x[0], x[1], x[2]).
double m0(std::span<const double> x);

// Beta(2,4) density 20 u (1-u)^3 on [0,1].
double beta24_pdf(double u);

// (1 + beta24_pdf(x3)) / 4, always within [0.25, 0.77734375].
double true_propensity(std::span<const double> x);

double true_m(std::span<const double> x, int t, double tau = 1.0);

double true_ate(const DgpConfig& cfg);

// Rows are drawn in order; each row consumes p uniforms, one uniform for the
// treatment and one normal deviate.
Dataset generate(const DgpConfig& cfg);

OutcomeFn oracle_outcome(const DgpConfig& cfg);
PropensityFn oracle_propensity();

}  // namespace dnnate::dgp
