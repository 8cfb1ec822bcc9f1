#include "dnnate/checks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dnnate/dgp.hpp"
#include "dnnate/error.hpp"
#include "dnnate/format.hpp"
#include "dnnate/harness.hpp"
#include "dnnate/net.hpp"
#include "dnnate/rng.hpp"
#include "dnnate/stats.hpp"

namespace dnnate::checks {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kRelFloor = 1e-3;

double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kRelFloor});
}

double squared_loss(const NeuralNet& net, std::span<const double> x, double target) {
  const double r = forward(net, x) - target;
  return r * r;
}

// Max error of gradient() and batch_loss_and_gradient() against central differences.
double check_net(NeuralNet net, Rng& rng, std::size_t& coordinates) {
  const std::size_t d = net.input_dim();
  const std::size_t batch = 3;
  Matrix xs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(batch));
  std::vector<double> targets(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t j = 0; j < d; ++j)
      xs(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(b)) = rng.uniform(-1.0, 1.0);
    targets[b] = rng.uniform(-1.0, 1.0);
  }
  std::vector<double> x0(d);
  for (std::size_t j = 0; j < d; ++j) x0[j] = xs(static_cast<Eigen::Index>(j), 0);

  const std::vector<double> g = gradient(net, x0, targets[0]);
  std::vector<double> gb;
  batch_loss_and_gradient(net, xs, targets, gb);

  auto coef = net.coefficients();
  double worst = 0.0;
  std::vector<double> scratch;
  for (std::size_t k = 0; k < coef.size(); ++k) {
    const double saved = coef[k];
    coef[k] = saved + kFdStep;
    const double up = squared_loss(net, x0, targets[0]);
    const double up_b = batch_loss_and_gradient(net, xs, targets, scratch);
    coef[k] = saved - kFdStep;
    const double down = squared_loss(net, x0, targets[0]);
    const double down_b = batch_loss_and_gradient(net, xs, targets, scratch);
    coef[k] = saved;
    worst = std::max(worst, rel_error(g[k], (up - down) / (2.0 * kFdStep)));
    worst = std::max(worst, rel_error(gb[k], (up_b - down_b) / (2.0 * kFdStep)));
    coordinates += 2;
  }
  return worst;
}

CheckResult make(std::string suite, std::string property, bool passed, std::string detail) {
  return {std::move(suite), std::move(property), passed, std::move(detail)};
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"gradient", "adam-golden", "oracle-normality",
                                              "variance-ordering"};
  return names;
}

GradientReport gradient_check(std::size_t dense_nets, std::size_t hierarchical_nets,
                              std::uint64_t seed) {
  GradientReport rep;
  Rng rng(derive_seed(seed, 0x6a7d));
  for (std::size_t i = 0; i < dense_nets; ++i) {
    const Activation act = i % 2 == 0 ? Activation::sigmoid : Activation::relu;
    const std::size_t hidden = 1 + rng.below(4);
    std::vector<std::size_t> widths{1 + rng.below(5)};
    for (std::size_t l = 0; l < hidden; ++l) widths.push_back(1 + rng.below(6));
    widths.push_back(1);
    NeuralNet net = build_dense(widths, act, rng.next_u64());
    // Nonzero biases keep relu pre-activations off the kink at exactly 0.
    for (double& c : net.coefficients()) c = rng.uniform(-1.0, 1.0);
    rep.max_rel_error = std::max(rep.max_rel_error, check_net(net, rng, rep.coordinates));
    ++rep.nets;
  }
  for (std::size_t i = 0; i < hierarchical_nets; ++i) {
    HierarchicalSpec spec;
    spec.level = static_cast<int>(rng.below(3));
    spec.K = 1 + static_cast<int>(rng.below(2));
    spec.p_star = 1 + static_cast<int>(rng.below(2));
    spec.M = 1 + static_cast<int>(rng.below(3));
    spec.input_dim = 1 + rng.below(3);
    spec.alpha = 2.0;
    const NeuralNet net = build_hierarchical(spec, rng.next_u64());
    rep.max_rel_error = std::max(rep.max_rel_error, check_net(net, rng, rep.coordinates));
    ++rep.nets;
  }
  return rep;
}

std::vector<double> adam_two_steps(double beta1) {
  TrainConfig cfg;
  cfg.adam_beta1 = beta1;
  std::vector<double> params{0.5, -0.25};
  AdamState state;
  const std::vector<double> g1{1.0, -2.0};
  const std::vector<double> g2{-0.5, 0.75};
  adam_step(params, g1, state, cfg);
  adam_step(params, g2, state, cfg);
  return params;
}

std::vector<double> adam_golden() { return {0.49873366297370902967, -0.24863404211684532934}; }

double sigma2_dr_monte_carlo(std::size_t draws, double tau, double noise_sd, std::uint64_t seed) {
  if (draws < 2) throw InvalidInput("need at least two draws");
  Rng rng(seed);
  std::vector<double> x(3);
  double sum_c = 0.0, sum_c2 = 0.0, sum_w = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    for (double& v : x) v = rng.uniform();
    const double e = dgp::true_propensity(x);
    const double c = dgp::true_m(x, 1, tau) - dgp::true_m(x, 0, tau);
    sum_c += c;
    sum_c2 += c * c;
    sum_w += 1.0 / (e * (1.0 - e));
  }
  const double n = static_cast<double>(draws);
  const double var_c = sum_c2 / n - (sum_c / n) * (sum_c / n);
  return std::max(var_c, 0.0) + noise_sd * noise_sd * sum_w / n;
}

OracleStudy oracle_study(std::string_view method, std::size_t n, std::size_t replications,
                         std::uint64_t seed, std::size_t threads, std::size_t p) {
  harness::ExperimentConfig cfg;
  cfg.dgp.p = p;
  cfg.inference_n = n;
  cfg.train_ratio = 1;
  cfg.estimators = {parse_method(method)};
  cfg.source = harness::NuisanceSource::oracle;
  cfg.replications = replications;
  cfg.master_seed = seed;
  cfg.threads = threads;
  const auto report = harness::run_experiment(cfg);
  const auto& s = report.estimators.front();
  OracleStudy out;
  out.estimates = harness::estimates_of(s);
  out.coverage = s.coverage;
  out.sd = s.aggregate.sd;
  out.scaled_variance = static_cast<double>(n) * s.aggregate.sd * s.aggregate.sd;
  out.ks_p = s.ks ? s.ks->p_value : 0.0;
  return out;
}

std::vector<CheckResult> run_suite(std::string_view suite, const CheckOptions& opts) {
  std::vector<CheckResult> out;
  const std::string name(suite);
  if (suite == "gradient") {
    const auto rep = gradient_check(50, 10, opts.seed);
    out.push_back(make(name, "backprop matches central differences", rep.max_rel_error < 1e-5,
                       "max relative error " + fmt(rep.max_rel_error) + " over " +
                           std::to_string(rep.nets) + " nets, " +
                           std::to_string(rep.coordinates) + " coordinates"));
  } else if (suite == "adam-golden") {
    const auto got = adam_two_steps(opts.inject_adam_beta1.value_or(TrainConfig{}.adam_beta1));
    const auto want = adam_golden();
    double worst = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i)
      worst = std::max(worst, std::abs(got[i] - want[i]));
    out.push_back(make(name, "two Adam steps match hand-computed values", worst < 1e-12,
                       "max abs deviation " + fmt(worst)));
  } else if (suite == "oracle-normality") {
    const auto st = oracle_study("dr_split", 2000, 500, opts.seed, opts.threads);
    out.push_back(make(name, "standardized oracle DR estimates pass KS at 0.01", st.ks_p > 0.01,
                       "KS p-value " + fmt(st.ks_p)));
    out.push_back(make(name, "oracle DR 95% coverage in [0.92, 0.98]",
                       st.coverage >= 0.92 && st.coverage <= 0.98,
                       "coverage " + fmt(st.coverage)));
  } else if (suite == "variance-ordering") {
    const double sigma2 = sigma2_dr_monte_carlo(1'000'000, 1.0, 1.0, derive_seed(opts.seed, 5));
    const auto dr = oracle_study("dr_split", 1000, 2000, opts.seed, opts.threads);
    const double rel = std::abs(dr.scaled_variance - sigma2) / sigma2;
    out.push_back(make(name, "n Var(oracle DR) within 10% of the sigma^2_DR formula", rel < 0.1,
                       "empirical " + fmt(dr.scaled_variance) + ", formula " + fmt(sigma2) +
                           ", relative error " + fmt(rel)));
    const auto sp = oracle_study("split", 1000, 200, opts.seed, opts.threads);
    out.push_back(make(name, "oracle DR replication SD >= split replication SD", dr.sd >= sp.sd,
                       "DR sd " + fmt(dr.sd) + ", split sd " + fmt(sp.sd)));
  } else {
    throw ConfigError("unknown check suite '" + name + "'");
  }
  return out;
}

}  // namespace dnnate::checks
