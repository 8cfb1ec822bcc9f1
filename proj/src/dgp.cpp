#include "dnnate/dgp.hpp"

#include <cmath>

#include "dnnate/error.hpp"
#include "dnnate/rng.hpp"

namespace dnnate::dgp {

void DgpConfig::validate() const {
  if (n < 1) throw InvalidInput("dgp sample size must be at least 1");
  if (p < 3) throw InvalidInput("dgp needs p >= 3 covariates");
  if (!(noise_sd >= 0.0)) throw InvalidInput("dgp noise sd must be nonnegative");
  if (!std::isfinite(tau)) throw InvalidInput("dgp treatment effect must be finite");
}

double m0(std::span<const double> x) {
  if (x.size() < 3) throw InvalidInput("m0 needs at least three covariates");
  return x[0] * x[0] + x[1] + x[2] * x[2];
}

double beta24_pdf(double u) {
  if (!(u >= 0.0 && u <= 1.0)) throw InvalidInput("beta density argument outside [0,1]");
  const double v = 1.0 - u;
  return 20.0 * u * v * v * v;
}

double true_propensity(std::span<const double> x) {
  if (x.size() < 3) throw InvalidInput("propensity needs at least three covariates");
  return 0.25 * (1.0 + beta24_pdf(x[2]));
}

double true_m(std::span<const double> x, int t, double tau) {
  if (t != 0 && t != 1) throw InvalidInput("treatment must be 0 or 1");
  return m0(x) + tau * t;
}

double true_ate(const DgpConfig& cfg) { return cfg.tau; }

Dataset generate(const DgpConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Dataset d;
  d.x.resize(static_cast<Eigen::Index>(cfg.n), static_cast<Eigen::Index>(cfg.p));
  d.t.resize(cfg.n);
  d.y.resize(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    auto row = d.x.row(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < cfg.p; ++j) row[static_cast<Eigen::Index>(j)] = rng.uniform();
    const auto x = d.row(i);
    d.t[i] = rng.uniform() < true_propensity(x) ? 1 : 0;
    d.y[i] = true_m(x, d.t[i], cfg.tau) + cfg.noise_sd * rng.normal();
  }
  return d;
}

OutcomeFn oracle_outcome(const DgpConfig& cfg) {
  return [tau = cfg.tau](std::span<const double> x, int t) { return true_m(x, t, tau); };
}

PropensityFn oracle_propensity() {
  return [](std::span<const double> x) { return true_propensity(x); };
}

}  // namespace dnnate::dgp
