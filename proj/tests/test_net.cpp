#include "doctest.h"

#include <cmath>
#include <limits>
#include <vector>

#include "dnnate/error.hpp"
#include "dnnate/net.hpp"
#include "dnnate/rng.hpp"

using namespace dnnate;

namespace {

NeuralNet sigmoid_neuron() {
  // One hidden unit with w = 1, b = 0 read out unchanged.
  return NeuralNet(DenseTopology{{1, 1, 1}}, Activation::sigmoid, std::nullopt,
                   {1.0, 0.0, 1.0, 0.0});
}

Matrix random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = rng.uniform();
  return x;
}

double max_abs_coef(const NeuralNet& net) {
  double m = 0.0;
  for (double c : net.coefficients()) m = std::max(m, std::abs(c));
  return m;
}

}  // namespace

TEST_CASE("forward of an all-zero dense net is zero") {
  const NeuralNet net(DenseTopology{{2, 3, 1}}, Activation::sigmoid, std::nullopt,
                      std::vector<double>(13, 0.0));
  const std::vector<double> x{5.0, -5.0};
  CHECK(forward(net, x) == 0.0);
}

TEST_CASE("single sigmoid neuron") {
  const NeuralNet net = sigmoid_neuron();
  CHECK(forward(net, std::vector<double>{0.0}) == 0.5);
  CHECK(forward(net, std::vector<double>{1.0}) == doctest::Approx(0.73105857863000487925).epsilon(1e-15));
}

TEST_CASE("forward rejects a wrong input length") {
  const NeuralNet net = sigmoid_neuron();
  CHECK_THROWS_AS(forward(net, std::vector<double>{1.0, 2.0}), InvalidInput);
}

TEST_CASE("forward_batch agrees with forward") {
  const std::vector<std::size_t> widths{3, 5, 4, 1};
  const NeuralNet net = build_dense(widths, Activation::sigmoid, 11);
  const Matrix x = random_inputs(7, 3, 2);
  const Vector out = forward_batch(net, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const std::vector<double> row{x(i, 0), x(i, 1), x(i, 2)};
    CHECK(out(i) == doctest::Approx(forward(net, row)).epsilon(1e-13));
  }
}

TEST_CASE("build_dense parameter counts and determinism") {
  const std::vector<std::size_t> small{3, 1};
  CHECK(build_dense(small, Activation::sigmoid, 1).parameter_count() == 4);
  const std::vector<std::size_t> exp{51, 51, 51, 51, 1};
  const NeuralNet a = build_dense(exp, Activation::sigmoid, 7);
  const NeuralNet b = build_dense(exp, Activation::sigmoid, 7);
  CHECK(a.parameter_count() == 8008);
  CHECK(a == b);
  CHECK_FALSE(a == build_dense(exp, Activation::sigmoid, 8));
  CHECK_THROWS_AS(build_dense(std::vector<std::size_t>{}, Activation::sigmoid, 1), InvalidInput);
  CHECK_THROWS_AS(build_dense(std::vector<std::size_t>{3, 2}, Activation::sigmoid, 1), InvalidInput);
}

TEST_CASE("dense init is fan-scaled with zero biases") {
  const std::vector<std::size_t> widths{4, 6, 1};
  const NeuralNet net = build_dense(widths, Activation::relu, 3);
  const auto c = net.coefficients();
  const double lim0 = std::sqrt(6.0 / 10.0);
  for (std::size_t i = 0; i < 24; ++i) CHECK(std::abs(c[i]) <= lim0);
  for (std::size_t i = 24; i < 30; ++i) CHECK(c[i] == 0.0);
  const double lim1 = std::sqrt(6.0 / 7.0);
  for (std::size_t i = 30; i < 36; ++i) CHECK(std::abs(c[i]) <= lim1);
  CHECK(c[36] == 0.0);
}

TEST_CASE("hierarchical parameter counts") {
  HierarchicalSpec s;
  s.level = 0;
  s.K = 1;
  s.p_star = 1;
  s.M = 1;
  s.input_dim = 2;
  s.alpha = 10.0;
  CHECK(s.parameter_count() == 19);
  CHECK(build_hierarchical(s, 1).parameter_count() == 19);

  // Level 1, K = 2, p* = 2, M = 3, d = 4: blocks over 2 inputs (103) and 4 inputs (151).
  HierarchicalSpec t{1, 2, 2, 3, 4, 1.0};
  CHECK(hierarchical_block_size(3, 2, 2) == 103);
  CHECK(hierarchical_block_size(3, 2, 4) == 151);
  CHECK(t.parameter_count() == 810);

  HierarchicalSpec bad = s;
  bad.level = -1;
  CHECK_THROWS_AS(build_hierarchical(bad, 1), InvalidInput);
  bad = s;
  bad.K = 0;
  CHECK_THROWS_AS(build_hierarchical(bad, 1), InvalidInput);
  bad = s;
  bad.M = 0;
  CHECK_THROWS_AS(build_hierarchical(bad, 1), InvalidInput);
  bad = s;
  bad.p_star = 0;
  CHECK_THROWS_AS(build_hierarchical(bad, 1), InvalidInput);
}

TEST_CASE("hierarchical level-0 block follows the two-layer formula") {
  HierarchicalSpec s{0, 1, 1, 1, 2, 10.0};
  // mu0, mu1 | lambda10, lambda11..14 | theta_1j0, theta_1j1, theta_1j2 for j = 1..4
  std::vector<double> c{0.3, -1.2, 0.1, 0.5, -0.4, 0.7, 0.2};
  const std::vector<double> theta{0.05, 1.0, -1.0, -0.2, 0.3, 0.6, 0.0, -0.5, 0.25, 0.4, 0.1, 0.9};
  c.insert(c.end(), theta.begin(), theta.end());
  const NeuralNet net(s, Activation::sigmoid, 10.0, c);
  const std::vector<double> x{0.8, -0.3};
  auto sig = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  double outer = c[2];
  for (int j = 0; j < 4; ++j) {
    const double* th = &theta[static_cast<std::size_t>(3 * j)];
    outer += c[static_cast<std::size_t>(3 + j)] * sig(th[0] + th[1] * x[0] + th[2] * x[1]);
  }
  const double expected = c[0] + c[1] * sig(outer);
  CHECK(forward(net, x) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("hierarchical nets decompose into blocks over sub-network outputs") {
  for (int level : {1, 2}) {
    HierarchicalSpec s{level, 2, 2, 3, 4, 1.5};
    const NeuralNet net = build_hierarchical(s, 99);
    CHECK(max_abs_coef(net) <= 1.5);
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> x(4);
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
      double sum = 0.0;
      for (int k = 0; k < s.K; ++k) {
        std::vector<double> inner;
        for (int j = 0; j < s.p_star; ++j) inner.push_back(forward(hierarchical_subnet(net, k, j), x));
        sum += forward(hierarchical_block(net, k), inner);
      }
      CHECK(std::abs(forward(net, x) - sum) <= 1e-12);
    }
  }
}

TEST_CASE("hierarchical init stays within alpha for any spec") {
  Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    HierarchicalSpec s{static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(3)),
                       1 + static_cast<int>(rng.below(3)), 1 + static_cast<int>(rng.below(4)),
                       1 + rng.below(5), 0.05 + rng.uniform()};
    const NeuralNet net = build_hierarchical(s, rng.next_u64());
    CHECK(max_abs_coef(net) <= s.alpha);
    CHECK(net.clip_alpha() == s.alpha);
  }
}

TEST_CASE("gradient of a linear neuron by hand") {
  const NeuralNet net(DenseTopology{{1, 1}}, Activation::sigmoid, std::nullopt, {1.0, 0.0});
  const auto g = gradient(net, std::vector<double>{2.0}, 0.0);
  REQUIRE(g.size() == 2);
  CHECK(g[0] == 8.0);
  CHECK(g[1] == 4.0);
}

TEST_CASE("gradient vanishes at an exact fit") {
  const std::vector<std::size_t> widths{3, 4, 1};
  const NeuralNet net = build_dense(widths, Activation::sigmoid, 4);
  const std::vector<double> x{0.1, 0.2, 0.3};
  for (double g : gradient(net, x, forward(net, x))) CHECK(g == 0.0);
}

TEST_CASE("gradient matches central differences on a 100-coefficient sigmoid net") {
  // 3 -> 10 -> 5 -> 1 has 40 + 55 + 6 = 101 coefficients.
  const std::vector<std::size_t> widths{3, 10, 5, 1};
  NeuralNet net = build_dense(widths, Activation::sigmoid, 21);
  Rng rng(8);
  for (double& c : net.coefficients()) c = rng.uniform(-1.0, 1.0);
  const std::vector<double> x{0.4, -0.9, 0.3};
  const double target = 0.7;
  const auto g = gradient(net, x, target);
  auto coef = net.coefficients();
  for (std::size_t k = 0; k < coef.size(); ++k) {
    const double saved = coef[k];
    coef[k] = saved + 1e-5;
    const double up = std::pow(forward(net, x) - target, 2);
    coef[k] = saved - 1e-5;
    const double down = std::pow(forward(net, x) - target, 2);
    coef[k] = saved;
    const double fd = (up - down) / 2e-5;
    const double rel = std::abs(fd - g[k]) / std::max({std::abs(fd), std::abs(g[k]), 1e-3});
    CHECK(rel < 1e-5);
  }
}

TEST_CASE("trunc") {
  CHECK(trunc(5.0, 2.0) == 2.0);
  CHECK(trunc(-5.0, 2.0) == -2.0);
  CHECK(trunc(1.5, 2.0) == 1.5);
  CHECK(trunc(0.0, 2.0) == 0.0);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = rng.uniform(-10.0, 10.0), b = rng.uniform(0.1, 5.0);
    CHECK(trunc(trunc(v, b), b) == trunc(v, b));
    CHECK(std::abs(trunc(v, b)) <= b);
  }
}

TEST_CASE("one Adam step moves by lr / (1 + eps)") {
  TrainConfig cfg;
  std::vector<double> p{0.0};
  const std::vector<double> g{1.0};
  AdamState st;
  adam_step(p, g, st, cfg);
  CHECK(p[0] == doctest::Approx(-0.0009999999900000001).epsilon(1e-14));
}

TEST_CASE("two Adam steps match hand-computed values") {
  TrainConfig cfg;
  std::vector<double> p{0.5, -0.25};
  AdamState st;
  adam_step(p, std::vector<double>{1.0, -2.0}, st, cfg);
  CHECK(p[0] == doctest::Approx(0.4990000000099999999).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-0.24900000000499999997).epsilon(1e-15));
  adam_step(p, std::vector<double>{-0.5, 0.75}, st, cfg);
  CHECK(p[0] == doctest::Approx(0.49873366297370902967).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(-0.24863404211684532934).epsilon(1e-15));
}

TEST_CASE("train_mse fits a constant target") {
  const std::vector<std::size_t> widths{2, 4, 1};
  const NeuralNet init = build_dense(widths, Activation::sigmoid, 5);
  const Matrix x = random_inputs(64, 2, 6);
  const std::vector<double> y(64, 3.0);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 500;
  cfg.seed = 9;
  const NeuralNet net = train_mse(init, x, y, cfg);
  CHECK(forward_batch(net, x).mean() == doctest::Approx(3.0).epsilon(0.05 / 3.0));
}

TEST_CASE("train_mse with zero epochs is a no-op and is deterministic") {
  const std::vector<std::size_t> widths{2, 4, 1};
  const NeuralNet init = build_dense(widths, Activation::sigmoid, 5);
  const Matrix x = random_inputs(50, 2, 6);
  std::vector<double> y(50);
  for (std::size_t i = 0; i < 50; ++i) y[i] = x(static_cast<Eigen::Index>(i), 0);
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK(train_mse(init, x, y, cfg) == init);
  cfg.epochs = 7;
  cfg.batch_size = 16;  // short final batch of 2
  CHECK(train_mse(init, x, y, cfg) == train_mse(init, x, y, cfg));
  CHECK_FALSE(train_mse(init, x, y, cfg) == init);
}

TEST_CASE("train_mse errors") {
  const std::vector<std::size_t> widths{2, 4, 1};
  const NeuralNet init = build_dense(widths, Activation::relu, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  CHECK_THROWS_AS(train_mse(init, Matrix(0, 2), std::vector<double>{}, cfg), InvalidInput);
  const Matrix x = random_inputs(10, 2, 1);
  std::vector<double> y(10, 1e300);
  try {
    train_mse(init, x, y, cfg);
    FAIL("expected divergence");
  } catch (const TrainingDiverged& e) {
    CHECK(e.epoch() == 0);
  }
}

TEST_CASE("clip projection holds after training") {
  const std::vector<std::size_t> widths{2, 8, 1};
  const NeuralNet init = build_dense(widths, Activation::sigmoid, 5, 0.3);
  const Matrix x = random_inputs(40, 2, 2);
  std::vector<double> y(40, 10.0);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 50;
  const NeuralNet net = train_mse(init, x, y, cfg);
  CHECK(max_abs_coef(net) <= 0.3);

  HierarchicalSpec s{1, 1, 2, 2, 2, 0.5};
  const NeuralNet h = train_mse(build_hierarchical(s, 3), x, y, cfg);
  CHECK(max_abs_coef(h) <= 0.5);
}

TEST_CASE("network JSON round trip") {
  const std::vector<std::size_t> widths{3, 4, 1};
  const NeuralNet dense = build_dense(widths, Activation::relu, 2, 4.0);
  const auto doc = to_json(dense);
  CHECK(doc.at("format") == "dnnate-net");
  CHECK(doc.at("layers").size() == 2);
  CHECK(doc.at("layers")[0].at("weights").size() == 4);
  CHECK(net_from_json(doc) == dense);
  CHECK(net_from_json(nlohmann::json::parse(doc.dump())) == dense);

  HierarchicalSpec s{2, 2, 2, 2, 3, 1.0};
  const NeuralNet h = build_hierarchical(s, 4);
  CHECK(net_from_json(to_json(h)) == h);

  auto broken = doc;
  broken["version"] = 99;
  CHECK_THROWS_AS(net_from_json(broken), InvalidInput);
}

TEST_CASE("sigmoid hidden units stay inside (0, 1) for moderate inputs") {
  const NeuralNet net = sigmoid_neuron();
  for (double x = -30.0; x <= 30.0; x += 0.5) {
    const double a = forward(net, std::vector<double>{x});
    CHECK(a > 0.0);
    CHECK(a < 1.0);
  }
}
