#include "dnnate/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <ostream>
#include <thread>

#include "dnnate/error.hpp"
#include "dnnate/format.hpp"
#include "dnnate/rng.hpp"
#include "dnnate/stats.hpp"

namespace dnnate::harness {

namespace {

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kSplitStream = 2;
constexpr std::uint64_t kOutcomeStream = 3;
constexpr std::uint64_t kPropensityStream = 4;

bool wants(const ExperimentConfig& cfg, Method m) {
  return std::find(cfg.estimators.begin(), cfg.estimators.end(), m) != cfg.estimators.end();
}

// Estimates of every requested method for replication r, in cfg.estimators order.
std::vector<AteResult> run_replication(const ExperimentConfig& cfg, std::size_t r) {
  const std::uint64_t seed = replication_seed(cfg.master_seed, r);
  auto [data, plan] = replication_data(cfg, r);

  OutcomeFn m;
  PropensityFn e;
  if (cfg.source == NuisanceSource::oracle) {
    m = dgp::oracle_outcome(cfg.dgp);
    e = dgp::oracle_propensity();
  } else {
    const Dataset d1 = data.subset(plan.train);
    TrainConfig outcome_train = cfg.nuisance.outcome_train;
    outcome_train.seed = derive_seed(seed, kOutcomeStream);
    m = fit_outcome_regression(d1, cfg.nuisance.outcome_arch, outcome_train,
                               cfg.nuisance.trunc_const)
            .as_function();
    if (wants(cfg, Method::dr_split)) {
      TrainConfig propensity_train = cfg.nuisance.propensity_train;
      propensity_train.seed = derive_seed(seed, kPropensityStream);
      e = fit_propensity(d1, cfg.nuisance.propensity_arch, propensity_train, cfg.nuisance.clip)
              .as_function();
    }
  }

  std::vector<AteResult> out;
  for (Method method : cfg.estimators) {
    if (method == Method::split) {
      out.push_back(ate_split(data, plan.inference, m, cfg.ci_level));
    } else {
      out.push_back(ate_dr_split(data, plan.inference, e, m, cfg.ci_level));
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(NuisanceSource s) {
  return s == NuisanceSource::fitted ? "fitted" : "oracle";
}

NuisanceSource parse_nuisance_source(std::string_view name) {
  if (name == "fitted") return NuisanceSource::fitted;
  if (name == "oracle") return NuisanceSource::oracle;
  throw InvalidInput("unknown nuisance source '" + std::string(name) + "'");
}

void ExperimentConfig::validate() const {
  dgp::DgpConfig d = dgp;
  d.n = 1;
  d.validate();
  if (replications < 1) throw InvalidInput("replications must be at least 1");
  if (train_ratio < 1) throw InvalidInput("train ratio must be at least 1");
  if (inference_n < 2) throw InvalidInput("inference size must be at least 2");
  if (estimators.empty()) throw InvalidInput("estimator set is empty");
  for (std::size_t i = 0; i < estimators.size(); ++i) {
    if (estimators[i] != Method::split && estimators[i] != Method::dr_split)
      throw InvalidInput("experiments support the split and dr_split estimators");
    for (std::size_t j = 0; j < i; ++j)
      if (estimators[j] == estimators[i]) throw InvalidInput("estimator listed twice");
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw InvalidInput("ci level must lie in (0,1)");
  if (threads < 1) throw InvalidInput("threads must be at least 1");
  if (source == NuisanceSource::fitted) {
    nuisance.outcome_train.validate();
    if (wants(*this, Method::dr_split)) nuisance.propensity_train.validate();
    if (!(nuisance.trunc_const > 0.0)) throw InvalidInput("truncation constant must be positive");
  }
}

std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t r) {
  return derive_seed(master_seed, static_cast<std::uint64_t>(r));
}

std::pair<Dataset, SplitPlan> replication_data(const ExperimentConfig& cfg, std::size_t r) {
  const std::uint64_t seed = replication_seed(cfg.master_seed, r);
  dgp::DgpConfig d = cfg.dgp;
  const std::size_t n_train = cfg.train_ratio * cfg.inference_n;
  d.n = n_train + cfg.inference_n;
  d.seed = derive_seed(seed, kDataStream);
  Dataset data = dgp::generate(d);

  Rng rng(derive_seed(seed, kSplitStream));
  const auto perm = rng.permutation(d.n);
  SplitPlan plan;
  plan.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  plan.inference.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return {std::move(data), std::move(plan)};
}

const EstimatorSummary& ReplicationReport::at(Method m) const {
  for (const auto& s : estimators)
    if (s.method == m) return s;
  throw InvalidInput("report has no results for estimator " + std::string(to_string(m)));
}

ReplicationReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  const std::size_t R = cfg.replications;
  std::vector<std::vector<AteResult>> per_rep(R);
  std::vector<std::exception_ptr> errors(R);
  std::atomic<std::size_t> next{0};
  std::size_t done = 0;
  std::mutex progress_mutex;

  auto worker = [&] {
    for (std::size_t r = next++; r < R; r = next++) {
      try {
        per_rep[r] = run_replication(cfg, r);
      } catch (...) {
        errors[r] = std::current_exception();
      }
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(++done, R);
      }
    }
  };
  const std::size_t workers = std::min(cfg.threads, R);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
  }

  for (std::size_t r = 0; r < R; ++r) {
    if (!errors[r]) continue;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const std::exception& e) {
      throw ReplicationError(r, e.what());
    }
  }

  ReplicationReport report;
  report.tau = dgp::true_ate(cfg.dgp);
  for (std::size_t r = 0; r < R; ++r) report.seeds.push_back(replication_seed(cfg.master_seed, r));
  for (std::size_t k = 0; k < cfg.estimators.size(); ++k) {
    EstimatorSummary s;
    s.method = cfg.estimators[k];
    for (std::size_t r = 0; r < R; ++r) s.results.push_back(per_rep[r][k]);
    const auto est = estimates_of(s);
    s.aggregate = aggregate(est, report.tau);
    s.coverage = coverage(s.results, report.tau);
    if (est.size() >= 20 && s.aggregate.sd > 0.0)
      s.ks = ks_normality(est, s.aggregate.mean, s.aggregate.sd);
    report.estimators.push_back(std::move(s));
  }
  return report;
}

std::vector<double> estimates_of(const EstimatorSummary& s) {
  std::vector<double> out;
  out.reserve(s.results.size());
  for (const auto& r : s.results) out.push_back(r.estimate);
  return out;
}

Aggregate aggregate(std::span<const double> estimates, double tau_true) {
  if (estimates.empty()) throw InvalidInput("aggregate of an empty estimate list");
  Aggregate a;
  a.mean = mean(estimates);
  a.median = median(estimates);
  a.sd = sample_sd(estimates);
  double se = 0.0;
  for (double v : estimates) se += (v - tau_true) * (v - tau_true);
  a.mse = se / static_cast<double>(estimates.size());
  return a;
}

double coverage(std::span<const AteResult> results, double tau_true) {
  if (results.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& r : results)
    if (r.ci_lo <= tau_true && tau_true <= r.ci_hi) ++hit;
  return static_cast<double>(hit) / static_cast<double>(results.size());
}

double kolmogorov_q(double lambda) {
  // Alternating series; it fails to converge only for tiny lambda, where Q = 1.
  const double a2 = -2.0 * lambda * lambda;
  double fac = 2.0, sum = 0.0, previous = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = fac * std::exp(a2 * j * j);
    sum += term;
    if (std::abs(term) <= 1e-3 * previous || std::abs(term) <= 1e-8 * sum)
      return std::clamp(sum, 0.0, 1.0);
    fac = -fac;
    previous = std::abs(term);
  }
  return 1.0;
}

KsResult ks_normality(std::span<const double> estimates, double center, double scale) {
  if (!(scale > 0.0)) throw InvalidInput("KS scale must be positive");
  if (estimates.empty()) throw InvalidInput("KS test of an empty sample");
  std::vector<double> z(estimates.begin(), estimates.end());
  for (auto& v : z) v = (v - center) / scale;
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double f = normal_cdf(z[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  const double root = std::sqrt(n);
  return {d, kolmogorov_q((root + 0.12 + 0.11 / root) * d)};
}

double silverman_bandwidth(std::span<const double> estimates) {
  if (estimates.size() < 2) throw InvalidInput("density estimate needs at least two values");
  const double sd = sample_sd(estimates);
  if (!(sd > 0.0)) throw InvalidInput("density estimate of a sample with zero spread");
  return 1.06 * sd * std::pow(static_cast<double>(estimates.size()), -0.2);
}

std::vector<std::pair<double, double>> kde(std::span<const double> estimates,
                                           std::size_t grid_points) {
  const double h = silverman_bandwidth(estimates);
  if (grid_points < 2) throw InvalidInput("density grid needs at least two points");
  const auto [lo_it, hi_it] = std::minmax_element(estimates.begin(), estimates.end());
  const double lo = *lo_it - 3.0 * h, hi = *hi_it + 3.0 * h;
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  const double norm = 1.0 / (static_cast<double>(estimates.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  std::vector<std::pair<double, double>> out;
  out.reserve(grid_points);
  for (std::size_t g = 0; g < grid_points; ++g) {
    const double x = g + 1 == grid_points ? hi : lo + step * static_cast<double>(g);
    double acc = 0.0;
    for (double v : estimates) {
      const double u = (x - v) / h;
      acc += std::exp(-0.5 * u * u);
    }
    out.emplace_back(x, acc * norm);
  }
  return out;
}

namespace {

void write_provenance(std::ostream& out, const Provenance& prov) {
  out << "# tool_version=" << prov.tool_version << '\n'
      << "# rng=" << prov.rng << '\n'
      << "# master_seed=" << prov.master_seed << '\n'
      << "# config_hash=" << prov.config_hash << '\n';
}

}  // namespace

void write_aggregate_csv(std::ostream& out, const ReplicationReport& report,
                         const ExperimentConfig& cfg, const Provenance& prov) {
  write_provenance(out, prov);
  out << "n1,estimator,activation,mean,median,sd,mse,coverage,ks_p\n";
  const std::size_t n1 = cfg.train_ratio * cfg.inference_n;
  const std::string activation = cfg.source == NuisanceSource::oracle
                                     ? std::string("oracle")
                                     : std::string(to_string(cfg.nuisance.outcome_arch.activation));
  for (const auto& s : report.estimators) {
    out << n1 << ',' << to_string(s.method) << ',' << activation << ','
        << format_double17(s.aggregate.mean) << ',' << format_double17(s.aggregate.median) << ','
        << format_double17(s.aggregate.sd) << ',' << format_double17(s.aggregate.mse) << ','
        << format_double17(s.coverage) << ','
        << (s.ks ? format_double17(s.ks->p_value) : std::string()) << '\n';
  }
}

void write_replications_jsonl(std::ostream& out, const ReplicationReport& report,
                              const Provenance& prov) {
  const nlohmann::json provenance = {{"tool_version", prov.tool_version},
                                     {"rng", prov.rng},
                                     {"master_seed", prov.master_seed},
                                     {"config_hash", prov.config_hash}};
  for (std::size_t r = 0; r < report.seeds.size(); ++r) {
    nlohmann::json results = nlohmann::json::object();
    for (const auto& s : report.estimators)
      results[std::string(to_string(s.method))] = to_json(s.results[r]);
    nlohmann::json line = {{"replication", r},
                           {"seed", report.seeds[r]},
                           {"results", std::move(results)},
                           {"provenance", provenance}};
    out << line.dump() << '\n';
  }
}

void write_kde_csv(std::ostream& out, std::span<const std::pair<double, double>> grid,
                   const Provenance& prov) {
  write_provenance(out, prov);
  out << "x,density\n";
  for (const auto& [x, dens] : grid) out << format_double17(x) << ',' << format_double17(dens) << '\n';
}

}  // namespace dnnate::harness
