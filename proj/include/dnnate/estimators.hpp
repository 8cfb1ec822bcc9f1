#pragma once

// Average treatment effect estimators built on neural nuisance fits:
// plug-in, sample-split, doubly robust and split doubly robust.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dnnate/dataset.hpp"
#include "dnnate/net.hpp"

namespace dnnate {

// Outcome regression m(x, t) and propensity e(x) as plain callables, so that
// fitted networks and known population functions are interchangeable.
using OutcomeFn = std::function<double(std::span<const double> x, int t)>;
using PropensityFn = std::function<double(std::span<const double> x)>;

// Network shape for a nuisance fit. The input dimension comes from the data.
struct NetArchitecture {
  enum class Kind { dense, hierarchical };

  Kind kind = Kind::dense;
  // Hidden widths of a dense net. Empty means three hidden layers of width p + 1.
  std::vector<std::size_t> hidden;
  // level, K, p_star, M and alpha of a hierarchical net; input_dim is ignored.
  HierarchicalSpec hierarchical;
  Activation activation = Activation::sigmoid;
  std::optional<double> clip_alpha;

  // p is the covariate count of the data the net will see.
  NeuralNet build(std::size_t input_dim, std::size_t p, std::uint64_t seed) const;
};

inline constexpr double kDefaultTruncConst = 2.0;

struct FittedRegressor {
  NeuralNet net;
  double trunc_bound = 0.0;  // trunc_const * ln(n_train)
  std::size_t n_train = 0;
  // Set when the learning data had only one treatment arm.
  bool single_arm = false;

  double operator()(std::span<const double> x, int t) const;
  // m(x_i, t) for every row of x.
  std::vector<double> predict(const CovariateMatrix& x, int t) const;
  OutcomeFn as_function() const;
};

// Propensity clip band [lo, 1 - lo]. Fixed mode uses `lo` directly; log mode
// uses lo = 1 / (c2 * ln n) with n the learning-set size.
struct ClipSpec {
  enum class Mode { fixed, log };
  Mode mode = Mode::fixed;
  double lo = 0.01;
  double c2 = 10.0;

  double lower(std::size_t n) const;
};

struct FittedPropensity {
  NeuralNet net;
  double clip_lo = 0.01;
  double clip_hi = 0.99;

  double operator()(std::span<const double> x) const;
  std::vector<double> predict(const CovariateMatrix& x) const;
  // 0.5 + trunc(raw - 0.5, 0.5 - clip_lo), the band applied to a raw net output.
  double clip(double raw) const;
  PropensityFn as_function() const;
};

enum class Method { plugin, split, dr, dr_split };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

// Result flags.
inline constexpr std::string_view kFlagNoNormality = "no_asymptotic_normality";
inline constexpr std::string_view kFlagSingleArm = "single_treatment_arm";
inline constexpr std::string_view kFlagOverlap = "overlapping_split";
inline constexpr std::string_view kFlagVarianceUndefined = "variance_undefined";

struct AteResult {
  Method method = Method::split;
  double estimate = 0.0;
  double variance = 0.0;
  std::size_t n_inference = 0;
  double ci_level = 0.95;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::vector<std::string> flags;

  bool has_flag(std::string_view f) const;
  bool operator==(const AteResult&) const = default;
};

nlohmann::json to_json(const AteResult& r);
AteResult ate_result_from_json(const nlohmann::json& doc);

// estimate -/+ z_{(1-level)/2} * sqrt(variance / n).
std::pair<double, double> confidence_interval(double estimate, double variance, std::size_t n,
                                              double level);

FittedRegressor fit_outcome_regression(const Dataset& d, const NetArchitecture& arch,
                                       const TrainConfig& cfg,
                                       double trunc_const = kDefaultTruncConst);

FittedPropensity fit_propensity(const Dataset& d1, const NetArchitecture& arch,
                                const TrainConfig& cfg, const ClipSpec& clip = {});

// T / e * (Y - m1) + m1.
double phi(int t, double y, double e_hat, double m1_hat);
// (1 - T) / (1 - e) * (Y - m0) + m0.
double psi(int t, double y, double e_hat, double m0_hat);

// Mean of per-observation values, the split variance and its interval.
AteResult summarize(std::span<const double> values, Method method, double ci_level);

// Average of m(X_i,1) - m(X_i,0) over the whole sample the regressor was fit on.
AteResult ate_plugin(const Dataset& d, const FittedRegressor& m, double ci_level = 0.95);

// Contrast average over the given inference rows with any outcome model.
AteResult ate_split(const Dataset& d, std::span<const std::size_t> inference,
                    const OutcomeFn& m, double ci_level);

// Fits m on the learning rows and averages contrasts over the inference rows.
AteResult ate_split(const Dataset& d, const SplitPlan& plan, const NetArchitecture& arch,
                    const TrainConfig& cfg, double trunc_const, double ci_level);

// phi - psi averaged over all rows of d.
AteResult ate_doubly_robust(const Dataset& d, const PropensityFn& e_hat, const OutcomeFn& m_hat,
                            double ci_level = 0.95);

// phi - psi averaged over the inference rows, nuisances supplied by the caller.
AteResult ate_dr_split(const Dataset& d, std::span<const std::size_t> inference,
                       const PropensityFn& e_hat, const OutcomeFn& m_hat, double ci_level);

struct NuisanceSettings {
  NetArchitecture outcome_arch;
  TrainConfig outcome_train;
  double trunc_const = kDefaultTruncConst;
  NetArchitecture propensity_arch;
  TrainConfig propensity_train;
  ClipSpec clip;
};

// Fits m and e on the learning rows, averages phi - psi over the inference rows.
AteResult ate_dr_split(const Dataset& d, const SplitPlan& plan, const NuisanceSettings& s,
                       double ci_level);

}  // namespace dnnate
