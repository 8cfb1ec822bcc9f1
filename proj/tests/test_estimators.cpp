#include "doctest.h"

#include <cmath>
#include <numeric>
#include <vector>

#include "dnnate/dgp.hpp"
#include "dnnate/error.hpp"
#include "dnnate/estimators.hpp"
#include "dnnate/rng.hpp"
#include "dnnate/stats.hpp"

using namespace dnnate;

namespace {

Dataset tiny(std::vector<int> t, std::vector<double> y, std::size_t p = 1) {
  Dataset d;
  d.x = CovariateMatrix::Zero(static_cast<Eigen::Index>(y.size()), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) d.x(i, 0) = static_cast<double>(i);
  d.t = std::move(t);
  d.y = std::move(y);
  return d;
}

// Contrast m(x,1) - m(x,0) equal to the given value per row index x[0].
OutcomeFn contrast_model(std::vector<double> contrasts) {
  return [c = std::move(contrasts)](std::span<const double> x, int t) {
    return t == 1 ? c[static_cast<std::size_t>(x[0])] : 0.0;
  };
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

NetArchitecture small_dense() {
  NetArchitecture a;
  a.hidden = {4};
  return a;
}

}  // namespace

TEST_CASE("confidence interval bounds") {
  auto [lo, hi] = confidence_interval(0.0, 1.0, 100, 0.95);
  CHECK(lo == doctest::Approx(-0.1959963984540054).epsilon(1e-12));
  CHECK(hi == doctest::Approx(0.1959963984540054).epsilon(1e-12));
  std::tie(lo, hi) = confidence_interval(5.0, 0.0, 10, 0.95);
  CHECK(lo == 5.0);
  CHECK(hi == 5.0);
  std::tie(lo, hi) = confidence_interval(0.0, 1.0, 100, 0.99);
  CHECK(hi == doctest::Approx(0.25758293035489005).epsilon(1e-12));
  CHECK(lo == -hi);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 100, 1.0), InvalidInput);
  CHECK_THROWS_AS(confidence_interval(0.0, 1.0, 100, 0.0), InvalidInput);
}

TEST_CASE("CI symmetry and monotonicity in the level") {
  double last_width = 0.0;
  for (double level : {0.5, 0.8, 0.9, 0.95, 0.99, 0.999}) {
    const auto [lo, hi] = confidence_interval(1.5, 2.0, 40, level);
    CHECK((hi - 1.5) == doctest::Approx(1.5 - lo).epsilon(1e-14));
    CHECK(hi - lo > last_width);
    last_width = hi - lo;
  }
}

TEST_CASE("phi and psi") {
  CHECK(phi(1, 2.0, 0.5, 1.0) == 3.0);
  CHECK(phi(0, 17.0, 0.5, 1.0) == 1.0);
  CHECK(psi(0, 2.0, 0.5, 0.0) == 4.0);
  CHECK(psi(1, 9.0, 0.3, 0.25) == 0.25);
  CHECK_THROWS_AS(phi(1, 1.0, 0.0, 0.0), std::logic_error);
  CHECK_THROWS_AS(psi(0, 1.0, 1.0, 0.0), std::logic_error);
}

TEST_CASE("split estimator on known contrasts") {
  const Dataset d = tiny({0, 1, 0}, {0, 0, 0});
  const auto r = ate_split(d, iota(3), contrast_model({1, 2, 3}), 0.95);
  CHECK(r.estimate == 2.0);
  CHECK(r.variance == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.n_inference == 3);
  CHECK(r.method == Method::split);
  CHECK(r.ci_lo <= r.estimate);
  CHECK(r.estimate <= r.ci_hi);
  CHECK((r.ci_hi - r.ci_lo) ==
        doctest::Approx(2.0 * normal_quantile(0.975) * std::sqrt(r.variance / 3.0)).epsilon(1e-14));
  const std::vector<std::size_t> one{0};
  CHECK_THROWS_AS(ate_split(d, one, contrast_model({1, 2, 3}), 0.95), InvalidInput);
}

TEST_CASE("DR split estimator on known per-row values") {
  // T = 1, e = 0.5, m1 = 0, m0 = 0: phi - psi = 2 Y.
  const Dataset d = tiny({1, 1, 1}, {0.5, 1.0, 1.5});
  const PropensityFn e = [](std::span<const double>) { return 0.5; };
  const OutcomeFn m = [](std::span<const double>, int) { return 0.0; };
  const auto r = ate_dr_split(d, iota(3), e, m, 0.95);
  CHECK(r.estimate == 2.0);
  CHECK(r.variance == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.method == Method::dr_split);
}

TEST_CASE("doubly robust estimator examples") {
  const Dataset one = tiny({1}, {2.0});
  const PropensityFn half = [](std::span<const double>) { return 0.5; };
  const OutcomeFn m = [](std::span<const double>, int t) { return t == 1 ? 1.0 : 0.0; };
  const auto r = ate_doubly_robust(one, half, m);
  CHECK(r.estimate == 3.0);
  CHECK(r.has_flag(kFlagVarianceUndefined));

  // Horvitz-Thompson reduction with e = treated share and m = 0.
  const Dataset d = tiny({1, 0, 1, 1, 0}, {2.0, 1.0, 4.0, -1.0, 3.0});
  const double e_bar = 3.0 / 5.0;
  const PropensityFn e = [=](std::span<const double>) { return e_bar; };
  const OutcomeFn zero = [](std::span<const double>, int) { return 0.0; };
  double ht = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i)
    ht += d.t[i] * d.y[i] / (5.0 * e_bar) - (1 - d.t[i]) * d.y[i] / (5.0 * (1.0 - e_bar));
  CHECK(ate_doubly_robust(d, e, zero).estimate == doctest::Approx(ht).epsilon(1e-14));
}

TEST_CASE("oracle DR estimate on a large simulated sample") {
  dgp::DgpConfig cfg;
  cfg.n = 100000;
  cfg.p = 3;
  cfg.seed = 12;
  const Dataset d = dgp::generate(cfg);
  const auto r = ate_doubly_robust(d, dgp::oracle_propensity(), dgp::oracle_outcome(cfg));
  const double se = std::sqrt(r.variance / static_cast<double>(d.size()));
  CHECK(std::abs(r.estimate - 1.0) < 3.0 * se);
}

TEST_CASE("double robustness with one nuisance wrong") {
  dgp::DgpConfig cfg;
  cfg.n = 100000;
  cfg.p = 3;
  cfg.seed = 31;
  const Dataset d = dgp::generate(cfg);
  // (a) true m, wrong but banded e.
  const PropensityFn wrong_e = [](std::span<const double> x) { return 0.3 + 0.4 * x[0]; };
  const auto a = ate_doubly_robust(d, wrong_e, dgp::oracle_outcome(cfg));
  CHECK(std::abs(a.estimate - 1.0) < 4.0 * std::sqrt(a.variance / 1e5));
  // (b) true e, constant m.
  const OutcomeFn const_m = [](std::span<const double>, int) { return 0.7; };
  const auto b = ate_doubly_robust(d, dgp::oracle_propensity(), const_m);
  CHECK(std::abs(b.estimate - 1.0) < 4.0 * std::sqrt(b.variance / 1e5));
}

TEST_CASE("split variance equals the unbiased sample variance") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(2 + rng.below(200));
    for (double& x : v) x = rng.normal() * 3.0 + 5.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const double textbook = ss / static_cast<double>(v.size() - 1);
    CHECK(split_variance(v) == doctest::Approx(textbook).epsilon(1e-10));
  }
}

TEST_CASE("fitted outcome regression: truncation bound and constant fit") {
  Rng rng(4);
  Dataset d;
  d.x.resize(200, 2);
  for (Eigen::Index i = 0; i < 200; ++i) {
    d.x(i, 0) = rng.uniform();
    d.x(i, 1) = rng.uniform();
    d.t.push_back(static_cast<int>(i % 2));
    d.y.push_back(3.0);
  }
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 3000;
  cfg.seed = 1;
  const auto m = fit_outcome_regression(d, small_dense(), cfg, 2.0);
  CHECK(m.trunc_bound == doctest::Approx(10.596634733096073355).epsilon(1e-14));
  CHECK(m.n_train == 200);
  CHECK_FALSE(m.single_arm);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(m(d.row(i), d.t[i]) - 3.0) < 0.05);

  // Far outside the data the prediction is still bounded.
  FittedRegressor wild = m;
  for (double& c : wild.net.coefficients()) c *= 1000.0;
  const std::vector<double> far{1e6, -1e6};
  CHECK(std::abs(wild(far, 1)) <= wild.trunc_bound);
  CHECK(std::abs(wild(far, 0)) <= wild.trunc_bound);
}

TEST_CASE("truncation bound at n = 1000") {
  Dataset d = tiny(std::vector<int>(1000, 0), std::vector<double>(1000, 0.0));
  d.t[0] = 1;
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto m = fit_outcome_regression(d, small_dense(), cfg, 2.0);
  CHECK(m.trunc_bound == doctest::Approx(13.815510557964274104).epsilon(1e-14));
}

TEST_CASE("single-arm learning data is flagged") {
  const Dataset d = tiny({1, 1, 1, 1}, {1, 2, 3, 4});
  TrainConfig cfg;
  cfg.epochs = 2;
  const auto m = fit_outcome_regression(d, small_dense(), cfg);
  CHECK(m.single_arm);
  CHECK_THROWS_AS(fit_propensity(d, small_dense(), cfg), InvalidInput);
  CHECK_THROWS_AS(fit_outcome_regression(Dataset{}, small_dense(), cfg), InvalidInput);
}

TEST_CASE("propensity clip band") {
  FittedPropensity e{NeuralNet(DenseTopology{{1, 1}}, Activation::sigmoid, std::nullopt, {0.0, 0.0}),
                     0.01, 0.99};
  CHECK(e.clip(0.999) == doctest::Approx(0.99).epsilon(1e-15));
  CHECK(e.clip(0.30) == doctest::Approx(0.30).epsilon(1e-15));
  CHECK(e.clip(-4.0) == doctest::Approx(0.01).epsilon(1e-15));

  ClipSpec log_mode{ClipSpec::Mode::log, 0.01, 10.0};
  CHECK(log_mode.lower(1000) == doctest::Approx(0.014476482730108394255).epsilon(1e-14));
  CHECK(ClipSpec{}.lower(1000) == 0.01);
}

TEST_CASE("fitted propensity outputs never leave the band") {
  Rng rng(9);
  Dataset d;
  d.x.resize(100, 3);
  for (Eigen::Index i = 0; i < 100; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) d.x(i, j) = rng.uniform();
    d.t.push_back(d.x(i, 0) > 0.5 ? 1 : 0);
    d.y.push_back(0.0);
  }
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 0.05;
  const ClipSpec clip{ClipSpec::Mode::log, 0.01, 10.0};
  auto e = fit_propensity(d, small_dense(), cfg, clip);
  // Inflate the weights so the raw output sweeps far outside [0, 1].
  for (double& c : e.net.coefficients()) c *= 50.0;
  const double lo = clip.lower(100);
  CHECK(e.clip_lo == doctest::Approx(lo).epsilon(1e-15));
  std::vector<double> x(3);
  for (int i = 0; i < 1000000; ++i) {
    for (double& v : x) v = rng.uniform(-3.0, 3.0);
    const double p = e(x);
    if (p < lo - 1e-12 || p > 1.0 - lo + 1e-12) {
      FAIL("propensity left the band: " << p);
      break;
    }
  }
}

TEST_CASE("plug-in estimator and split agreement on the full sample") {
  Rng rng(6);
  Dataset d;
  d.x.resize(120, 2);
  for (Eigen::Index i = 0; i < 120; ++i) {
    d.x(i, 0) = rng.uniform();
    d.x(i, 1) = rng.uniform();
    d.t.push_back(rng.uniform() < 0.5 ? 1 : 0);
    d.y.push_back(d.x(i, 0) + d.t.back() + rng.normal());
  }
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 3;
  const auto m = fit_outcome_regression(d, small_dense(), cfg);
  const auto plug = ate_plugin(d, m);
  CHECK(plug.method == Method::plugin);
  CHECK(plug.has_flag(kFlagNoNormality));
  const auto split = ate_split(d, iota(120), m.as_function(), 0.95);
  CHECK(split.estimate == doctest::Approx(plug.estimate).epsilon(1e-12));

  SplitPlan full{iota(120), iota(120)};
  const auto fitted = ate_split(d, full, small_dense(), cfg, kDefaultTruncConst, 0.95);
  CHECK(fitted.has_flag(kFlagOverlap));
  CHECK(fitted.estimate == doctest::Approx(plug.estimate).epsilon(1e-12));
}

TEST_CASE("plug-in estimator on constant contrasts") {
  const Dataset d = tiny({0, 1}, {0.0, 0.0});
  FittedRegressor m{NeuralNet(DenseTopology{{2, 1}}, Activation::sigmoid, std::nullopt,
                              {0.0, 1.0, 0.0}),
                    10.0, 2, false};
  CHECK(ate_plugin(d, m).estimate == 1.0);
  FittedRegressor m2{NeuralNet(DenseTopology{{2, 1}}, Activation::sigmoid, std::nullopt,
                               {0.0, 0.5, 0.0}),
                     10.0, 2, false};
  CHECK(ate_plugin(d, m2).estimate == 0.5);
  const auto r = ate_split(d, iota(2), contrast_model({0.5, 1.5}), 0.95);
  CHECK(r.estimate == 1.0);
}

TEST_CASE("DR split rejects overlapping plans") {
  const Dataset d = tiny({0, 1, 0, 1}, {1, 2, 3, 4});
  NuisanceSettings s;
  s.outcome_arch = small_dense();
  s.propensity_arch = small_dense();
  s.outcome_train.epochs = 1;
  s.propensity_train.epochs = 1;
  SplitPlan overlap{{0, 1, 2}, {2, 3}};
  CHECK_THROWS_AS(ate_dr_split(d, overlap, s, 0.95), InvalidInput);
  SplitPlan tiny_inf{{0, 1, 2}, {3}};
  CHECK_THROWS_AS(ate_dr_split(d, tiny_inf, s, 0.95), InvalidInput);
}

TEST_CASE("AteResult JSON round trip") {
  const Dataset d = tiny({0, 1, 0}, {0, 0, 0});
  auto r = ate_split(d, iota(3), contrast_model({1, 2, 3.25}), 0.9);
  r.flags.emplace_back(kFlagSingleArm);
  const auto doc = to_json(r);
  for (const char* key : {"method", "estimate", "variance", "n_inference", "ci_level", "ci_lo",
                          "ci_hi", "flags"})
    CHECK(doc.contains(key));
  CHECK(ate_result_from_json(nlohmann::json::parse(doc.dump())) == r);
}

TEST_CASE("method names") {
  for (Method m : {Method::plugin, Method::split, Method::dr, Method::dr_split})
    CHECK(parse_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_method("bogus"), InvalidInput);
}
