#include "dnnate/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "dnnate/error.hpp"
#include "dnnate/stats.hpp"

namespace dnnate {

namespace {

Matrix with_treatment(const CovariateMatrix& x, int t) {
  Matrix in(x.rows(), x.cols() + 1);
  in.leftCols(x.cols()) = x;
  in.col(x.cols()).setConstant(static_cast<double>(t));
  return in;
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInput("confidence level must lie in (0,1)");
}

void check_dim(const Dataset& d, const NeuralNet& net, std::size_t extra) {
  if (d.dim() + extra != net.input_dim())
    throw InvalidInput("dataset has " + std::to_string(d.dim()) +
                       " covariates but the model expects " +
                       std::to_string(net.input_dim() - extra));
}

}  // namespace

NeuralNet NetArchitecture::build(std::size_t input_dim, std::size_t p, std::uint64_t seed) const {
  if (kind == Kind::hierarchical) {
    HierarchicalSpec s = hierarchical;
    s.input_dim = input_dim;
    NeuralNet net = build_hierarchical(s, seed, activation);
    if (clip_alpha && *clip_alpha < s.alpha) {
      return NeuralNet(net.topology(), net.activation(), clip_alpha,
                       std::vector<double>(net.coefficients().begin(), net.coefficients().end()));
    }
    return net;
  }
  std::vector<std::size_t> widths{input_dim};
  if (hidden.empty()) {
    widths.insert(widths.end(), 3, p + 1);
  } else {
    widths.insert(widths.end(), hidden.begin(), hidden.end());
  }
  widths.push_back(1);
  return build_dense(widths, activation, seed, clip_alpha);
}

// ------------------------------------------------------------- nuisances

double FittedRegressor::operator()(std::span<const double> x, int t) const {
  if (x.size() + 1 != net.input_dim()) throw InvalidInput("covariate length mismatch");
  std::vector<double> in(x.begin(), x.end());
  in.push_back(static_cast<double>(t));
  return trunc(forward(net, in), trunc_bound);
}

std::vector<double> FittedRegressor::predict(const CovariateMatrix& x, int t) const {
  if (static_cast<std::size_t>(x.cols()) + 1 != net.input_dim())
    throw InvalidInput("covariate length mismatch");
  const Vector raw = forward_batch(net, with_treatment(x, t));
  std::vector<double> out(static_cast<std::size_t>(raw.size()));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = trunc(raw[static_cast<Eigen::Index>(i)], trunc_bound);
  return out;
}

OutcomeFn FittedRegressor::as_function() const {
  return [self = *this](std::span<const double> x, int t) { return self(x, t); };
}

double ClipSpec::lower(std::size_t n) const {
  double l = lo;
  if (mode == Mode::log) {
    if (n < 2) throw InvalidInput("log-mode propensity clip needs at least two observations");
    if (!(c2 > 0.0)) throw InvalidInput("propensity clip constant must be positive");
    l = 1.0 / (c2 * std::log(static_cast<double>(n)));
  }
  if (!(l > 0.0 && l < 0.5)) throw InvalidInput("propensity clip bound must lie in (0, 0.5)");
  return l;
}

double FittedPropensity::clip(double raw) const { return 0.5 + trunc(raw - 0.5, 0.5 - clip_lo); }

double FittedPropensity::operator()(std::span<const double> x) const {
  return clip(forward(net, x));
}

std::vector<double> FittedPropensity::predict(const CovariateMatrix& x) const {
  const Vector raw = forward_batch(net, Matrix(x));
  std::vector<double> out(static_cast<std::size_t>(raw.size()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = clip(raw[static_cast<Eigen::Index>(i)]);
  return out;
}

PropensityFn FittedPropensity::as_function() const {
  return [self = *this](std::span<const double> x) { return self(x); };
}

FittedRegressor fit_outcome_regression(const Dataset& d, const NetArchitecture& arch,
                                       const TrainConfig& cfg, double trunc_const) {
  d.validate();
  if (!(trunc_const > 0.0)) throw InvalidInput("truncation constant must be positive");
  const std::size_t n = d.size();
  if (n < 2) throw InvalidInput("outcome regression needs at least two observations");
  const std::size_t treated = d.treated_count();

  Matrix inputs(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.dim() + 1));
  inputs.leftCols(static_cast<Eigen::Index>(d.dim())) = d.x;
  for (std::size_t i = 0; i < n; ++i)
    inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d.dim())) = d.t[i];

  NeuralNet net = arch.build(d.dim() + 1, d.dim(), cfg.seed);
  net = train_mse(std::move(net), inputs, d.y, cfg);
  return FittedRegressor{std::move(net), trunc_const * std::log(static_cast<double>(n)), n,
                         treated == 0 || treated == n};
}

FittedPropensity fit_propensity(const Dataset& d1, const NetArchitecture& arch,
                                const TrainConfig& cfg, const ClipSpec& clip) {
  d1.validate();
  const std::size_t treated = d1.treated_count();
  if (treated == 0 || treated == d1.size())
    throw InvalidInput("propensity score needs both treated and untreated observations");
  const double lo = clip.lower(d1.size());
  std::vector<double> targets(d1.t.begin(), d1.t.end());
  NeuralNet net = arch.build(d1.dim(), d1.dim(), cfg.seed);
  net = train_mse(std::move(net), Matrix(d1.x), targets, cfg);
  return FittedPropensity{std::move(net), lo, 1.0 - lo};
}

// ----------------------------------------------------------- estimators

std::string_view to_string(Method m) {
  switch (m) {
    case Method::plugin: return "plugin";
    case Method::split: return "split";
    case Method::dr: return "dr";
    case Method::dr_split: return "dr_split";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "plugin") return Method::plugin;
  if (name == "split") return Method::split;
  if (name == "dr") return Method::dr;
  if (name == "dr_split") return Method::dr_split;
  throw InvalidInput("unknown estimator '" + std::string(name) + "'");
}

bool AteResult::has_flag(std::string_view f) const {
  return std::find(flags.begin(), flags.end(), f) != flags.end();
}

nlohmann::json to_json(const AteResult& r) {
  return {{"method", std::string(to_string(r.method))},
          {"estimate", r.estimate},
          {"variance", r.variance},
          {"n_inference", r.n_inference},
          {"ci_level", r.ci_level},
          {"ci_lo", r.ci_lo},
          {"ci_hi", r.ci_hi},
          {"flags", r.flags}};
}

AteResult ate_result_from_json(const nlohmann::json& doc) {
  try {
    AteResult r;
    r.method = parse_method(doc.at("method").get<std::string>());
    r.estimate = doc.at("estimate").get<double>();
    r.variance = doc.at("variance").get<double>();
    r.n_inference = doc.at("n_inference").get<std::size_t>();
    r.ci_level = doc.at("ci_level").get<double>();
    r.ci_lo = doc.at("ci_lo").get<double>();
    r.ci_hi = doc.at("ci_hi").get<double>();
    r.flags = doc.at("flags").get<std::vector<std::string>>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed result document: ") + e.what());
  }
}

std::pair<double, double> confidence_interval(double estimate, double variance, std::size_t n,
                                              double level) {
  check_level(level);
  if (!(variance >= 0.0)) throw InvalidInput("variance must be nonnegative");
  if (n == 0) throw InvalidInput("interval needs n >= 1");
  const double z = normal_quantile(1.0 - (1.0 - level) / 2.0);
  const double half = z * std::sqrt(variance / static_cast<double>(n));
  return {estimate - half, estimate + half};
}

double phi(int t, double y, double e_hat, double m1_hat) {
  if (!(e_hat > 0.0 && e_hat < 1.0))
    throw std::logic_error("propensity estimate outside (0,1): " + std::to_string(e_hat));
  return static_cast<double>(t) / e_hat * (y - m1_hat) + m1_hat;
}

double psi(int t, double y, double e_hat, double m0_hat) {
  if (!(e_hat > 0.0 && e_hat < 1.0))
    throw std::logic_error("propensity estimate outside (0,1): " + std::to_string(e_hat));
  return static_cast<double>(1 - t) / (1.0 - e_hat) * (y - m0_hat) + m0_hat;
}

AteResult summarize(std::span<const double> values, Method method, double ci_level) {
  check_level(ci_level);
  AteResult r;
  r.method = method;
  r.ci_level = ci_level;
  r.n_inference = values.size();
  r.estimate = mean(values);
  if (values.size() >= 2) {
    r.variance = split_variance(values);
  } else {
    r.flags.emplace_back(kFlagVarianceUndefined);
  }
  std::tie(r.ci_lo, r.ci_hi) = confidence_interval(r.estimate, r.variance, r.n_inference, ci_level);
  return r;
}

AteResult ate_plugin(const Dataset& d, const FittedRegressor& m, double ci_level) {
  d.validate();
  check_dim(d, m.net, 1);
  const auto m1 = m.predict(d.x, 1);
  const auto m0 = m.predict(d.x, 0);
  std::vector<double> contrast(d.size());
  for (std::size_t i = 0; i < contrast.size(); ++i) contrast[i] = m1[i] - m0[i];
  AteResult r = summarize(contrast, Method::plugin, ci_level);
  r.flags.emplace_back(kFlagNoNormality);
  if (m.single_arm) r.flags.emplace_back(kFlagSingleArm);
  return r;
}

AteResult ate_split(const Dataset& d, std::span<const std::size_t> inference, const OutcomeFn& m,
                    double ci_level) {
  if (inference.size() < 2) throw InvalidInput("inference set needs at least two observations");
  std::vector<double> contrast;
  contrast.reserve(inference.size());
  for (auto i : inference) {
    if (i >= d.size()) throw InvalidInput("inference index out of range");
    const auto x = d.row(i);
    contrast.push_back(m(x, 1) - m(x, 0));
  }
  return summarize(contrast, Method::split, ci_level);
}

AteResult ate_split(const Dataset& d, const SplitPlan& plan, const NetArchitecture& arch,
                    const TrainConfig& cfg, double trunc_const, double ci_level) {
  d.validate();
  plan.validate(d.size(), /*allow_overlap=*/true);
  if (plan.inference.size() < 2)
    throw InvalidInput("inference set needs at least two observations");
  const FittedRegressor m = fit_outcome_regression(d.subset(plan.train), arch, cfg, trunc_const);

  const Dataset d2 = d.subset(plan.inference);
  const auto m1 = m.predict(d2.x, 1);
  const auto m0 = m.predict(d2.x, 0);
  std::vector<double> contrast(d2.size());
  for (std::size_t i = 0; i < contrast.size(); ++i) contrast[i] = m1[i] - m0[i];
  AteResult r = summarize(contrast, Method::split, ci_level);
  if (m.single_arm) r.flags.emplace_back(kFlagSingleArm);
  if (plan.overlaps()) r.flags.emplace_back(kFlagOverlap);
  return r;
}

namespace {

std::vector<double> dr_terms(const Dataset& d, std::span<const std::size_t> rows,
                             const PropensityFn& e_hat, const OutcomeFn& m_hat) {
  std::vector<double> terms;
  terms.reserve(rows.size());
  for (auto i : rows) {
    if (i >= d.size()) throw InvalidInput("inference index out of range");
    const auto x = d.row(i);
    const double e = e_hat(x);
    terms.push_back(phi(d.t[i], d.y[i], e, m_hat(x, 1)) - psi(d.t[i], d.y[i], e, m_hat(x, 0)));
  }
  return terms;
}

}  // namespace

AteResult ate_doubly_robust(const Dataset& d, const PropensityFn& e_hat, const OutcomeFn& m_hat,
                            double ci_level) {
  d.validate();
  std::vector<std::size_t> rows(d.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return summarize(dr_terms(d, rows, e_hat, m_hat), Method::dr, ci_level);
}

AteResult ate_dr_split(const Dataset& d, std::span<const std::size_t> inference,
                       const PropensityFn& e_hat, const OutcomeFn& m_hat, double ci_level) {
  if (inference.size() < 2) throw InvalidInput("inference set needs at least two observations");
  return summarize(dr_terms(d, inference, e_hat, m_hat), Method::dr_split, ci_level);
}

AteResult ate_dr_split(const Dataset& d, const SplitPlan& plan, const NuisanceSettings& s,
                       double ci_level) {
  d.validate();
  plan.validate(d.size());
  if (plan.inference.size() < 2)
    throw InvalidInput("inference set needs at least two observations");
  const Dataset d1 = d.subset(plan.train);
  const FittedRegressor m =
      fit_outcome_regression(d1, s.outcome_arch, s.outcome_train, s.trunc_const);
  const FittedPropensity e = fit_propensity(d1, s.propensity_arch, s.propensity_train, s.clip);

  const Dataset d2 = d.subset(plan.inference);
  const auto m1 = m.predict(d2.x, 1);
  const auto m0 = m.predict(d2.x, 0);
  const auto eh = e.predict(d2.x);
  std::vector<double> terms(d2.size());
  for (std::size_t i = 0; i < terms.size(); ++i)
    terms[i] = phi(d2.t[i], d2.y[i], eh[i], m1[i]) - psi(d2.t[i], d2.y[i], eh[i], m0[i]);
  return summarize(terms, Method::dr_split, ci_level);
}

}  // namespace dnnate
