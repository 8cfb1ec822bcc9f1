#pragma once

// Replicated simulate -> split -> estimate experiments with deterministic
// per-replication seeding, plus the summary statistics and exports used to
// tabulate them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dnnate/dgp.hpp"
#include "dnnate/estimators.hpp"

namespace dnnate::harness {

enum class NuisanceSource { fitted, oracle };

std::string_view to_string(NuisanceSource s);
NuisanceSource parse_nuisance_source(std::string_view name);

struct ExperimentConfig {
  // n and seed are ignored: each replication draws (train_ratio + 1) * inference_n
  // rows with its own derived seed.
  dgp::DgpConfig dgp;
  std::size_t inference_n = 1000;
  std::size_t train_ratio = 5;
  std::vector<Method> estimators{Method::split};
  NuisanceSettings nuisance;
  // oracle replaces both fitted nets by the known m and e.
  NuisanceSource source = NuisanceSource::fitted;
  std::size_t replications = 200;
  std::uint64_t master_seed = 0;
  double ci_level = 0.95;
  std::size_t threads = 1;

  void validate() const;
};

// seed_r = derive_seed(master_seed, r).
std::uint64_t replication_seed(std::uint64_t master_seed, std::size_t r);

// Dataset and split of replication r, exactly as run_experiment draws them.
std::pair<Dataset, SplitPlan> replication_data(const ExperimentConfig& cfg, std::size_t r);

struct Aggregate {
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double mse = 0.0;
};

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};

struct EstimatorSummary {
  Method method = Method::split;
  std::vector<AteResult> results;  // one per replication, in replication order
  Aggregate aggregate;
  double coverage = 0.0;
  // Absent when fewer than 20 replications or zero spread.
  std::optional<KsResult> ks;
};

struct ReplicationReport {
  double tau = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& at(Method m) const;
};

class ReplicationError : public std::runtime_error {
 public:
  ReplicationError(std::size_t replication, const std::string& what)
      : std::runtime_error("replication " + std::to_string(replication) + ": " + what),
        replication_(replication) {}
  std::size_t replication() const noexcept { return replication_; }

 private:
  std::size_t replication_;
};

// Called after each finished replication with (done, total); may be invoked
// from worker threads but never concurrently.
using ProgressFn = std::function<void(std::size_t, std::size_t)>;

ReplicationReport run_experiment(const ExperimentConfig& cfg, const ProgressFn& progress = {});

// mean, median, n-1 standard deviation and mean squared error against tau.
Aggregate aggregate(std::span<const double> estimates, double tau_true);

// Fraction of intervals [ci_lo, ci_hi] that contain tau_true.
double coverage(std::span<const AteResult> results, double tau_true);

// One-sample Kolmogorov-Smirnov test of (estimates - center) / scale against
// N(0,1); the p-value uses the asymptotic Kolmogorov distribution.
KsResult ks_normality(std::span<const double> estimates, double center, double scale);

// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(k-1) exp(-2 k^2 lambda^2).
double kolmogorov_q(double lambda);

// Gaussian KDE with Silverman bandwidth 1.06 sd R^(-1/5) on an even grid over
// [min - 3h, max + 3h].
std::vector<std::pair<double, double>> kde(std::span<const double> estimates,
                                           std::size_t grid_points = 512);

double silverman_bandwidth(std::span<const double> estimates);

// Provenance stamped into every exported file.
struct Provenance {
  std::string tool_version;
  std::string rng;
  std::uint64_t master_seed = 0;
  std::string config_hash;
};

// Point estimates of every replication, in order.
std::vector<double> estimates_of(const EstimatorSummary& s);

// CSV: n1, estimator, activation, mean, median, sd, mse, coverage, ks_p.
void write_aggregate_csv(std::ostream& out, const ReplicationReport& report,
                         const ExperimentConfig& cfg, const Provenance& prov);
// One JSON object per replication.
void write_replications_jsonl(std::ostream& out, const ReplicationReport& report,
                              const Provenance& prov);
// Two columns x, density.
void write_kde_csv(std::ostream& out, std::span<const std::pair<double, double>> grid,
                   const Provenance& prov);

}  // namespace dnnate::harness
