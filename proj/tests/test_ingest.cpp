#include "doctest.h"

#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dnnate/dgp.hpp"
#include "dnnate/error.hpp"
#include "dnnate/ingest.hpp"
#include "dnnate/rng.hpp"
#include "dnnate/stats.hpp"

using namespace dnnate;
using namespace dnnate::ingest;

namespace {

CsvSchema schema_ab(Standardize s = Standardize::none) {
  CsvSchema c;
  c.covariate_columns = {"a", "b"};
  c.standardize = s;
  return c;
}

Dataset parse(const std::string& text, const CsvSchema& s) {
  std::istringstream in(text);
  return parse_csv(in, s);
}

}  // namespace

TEST_CASE("three-row fixture parses exactly") {
  const Dataset d = parse("y,a,t,b\n1.5,2,1,-3\n-0.25,4,0,0.5\n7,6,1,1e2\n", schema_ab());
  REQUIRE(d.size() == 3);
  CHECK(d.dim() == 2);
  CHECK(d.y == std::vector<double>{1.5, -0.25, 7.0});
  CHECK(d.t == std::vector<int>{1, 0, 1});
  CHECK(d.x(0, 0) == 2.0);
  CHECK(d.x(0, 1) == -3.0);
  CHECK(d.x(2, 1) == 100.0);
}

TEST_CASE("minmax and zscore scaling") {
  const Dataset d = parse("a,b,t,y\n2,1,0,0\n4,5,1,0\n6,9,0,0\n", schema_ab(Standardize::minmax));
  CHECK(d.x(0, 0) == 0.0);
  CHECK(d.x(1, 0) == 0.5);
  CHECK(d.x(2, 0) == 1.0);
  const Dataset z = parse("a,b,t,y\n2,1,0,0\n4,5,1,0\n6,9,0,0\n", schema_ab(Standardize::zscore));
  CHECK(z.x(0, 0) == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(z.x(2, 1) == doctest::Approx(1.0).epsilon(1e-15));
  const Dataset c = parse("a,b,t,y\n3,1,0,0\n3,5,1,0\n", schema_ab(Standardize::minmax));
  CHECK(c.x(0, 0) == 0.0);
  CHECK_THROWS_AS(parse("a,b,t,y\n3,1,0,0\n3,5,1,0\n", schema_ab(Standardize::zscore)),
                  ValidationError);
}

TEST_CASE("schema and row errors") {
  try {
    parse("a,b,y\n1,2,3\n", schema_ab());
    FAIL("missing column accepted");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("'t'") != std::string::npos);
  }
  try {
    parse("a,b,t,y\n1,2,0,3\n1,2,2,3\n", schema_ab());
    FAIL("non-binary treatment accepted");
  } catch (const ValidationError& e) {
    CHECK(e.row() == 2);
    CHECK(std::string(e.what()).find("rows 2") != std::string::npos);
  }
  try {
    parse("a,b,t,y\n1,2,0,3\n1,,1,3\n1,x,0,3\n", schema_ab());
    FAIL("missing field accepted");
  } catch (const ValidationError& e) {
    CHECK(e.row() == 2);
    CHECK(std::string(e.what()).find("2, 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("a,b,t,y\n1,2,0\n", schema_ab()), ValidationError);
  CHECK_THROWS_AS(parse("", schema_ab()), SchemaError);
  CsvSchema dup = schema_ab();
  dup.covariate_columns = {"a", "a"};
  CHECK_THROWS_AS(dup.validate(), InvalidInput);
  dup.covariate_columns.clear();
  CHECK_THROWS_AS(dup.validate(), InvalidInput);
}

TEST_CASE("generate -> export -> load round trip") {
  dgp::DgpConfig cfg;
  cfg.n = 200;
  cfg.p = 4;
  cfg.seed = 8;
  const Dataset d = dgp::generate(cfg);
  std::stringstream buf;
  export_csv(buf, d);
  const Dataset back = parse_csv(buf, default_schema(4));
  REQUIRE(back.size() == d.size());
  CHECK(back.t == d.t);
  CHECK((back.x - d.x).cwiseAbs().maxCoeff() <= 1e-12);
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(std::abs(back.y[i] - d.y[i]) <= 1e-12);
}

TEST_CASE("proportion split") {
  Dataset d;
  d.x = CovariateMatrix::Zero(10, 1);
  d.t.assign(10, 0);
  d.y.assign(10, 0.0);
  const SplitPlan p = proportion_split(d, 0.2, 3);
  CHECK(p.inference.size() == 2);
  CHECK(p.train.size() == 8);
  CHECK_FALSE(p.overlaps());
  const SplitPlan q = proportion_split(d, 0.2, 3);
  CHECK(p.inference == q.inference);
  CHECK(p.train == q.train);
  CHECK_THROWS_AS(proportion_split(d, 0.0, 1), InvalidInput);
  CHECK_THROWS_AS(proportion_split(d, 1.0, 1), InvalidInput);
  CHECK_THROWS_AS(proportion_split(d, 0.1, 1), InvalidInput);
}

TEST_CASE("proportion split draws every row uniformly") {
  Dataset d;
  d.x = CovariateMatrix::Zero(100, 1);
  d.t.assign(100, 0);
  d.y.assign(100, 0.0);
  std::vector<int> hits(100, 0);
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const SplitPlan p = proportion_split(d, 0.3, seed);
    CHECK(p.train.size() + p.inference.size() == 100);
    std::set<std::size_t> all(p.train.begin(), p.train.end());
    all.insert(p.inference.begin(), p.inference.end());
    CHECK(all.size() == 100);
    for (auto i : p.inference) ++hits[i];
  }
  for (int h : hits) CHECK(std::abs(h / 1000.0 - 0.3) <= 0.05);
}

TEST_CASE("robust sd") {
  CHECK(robust_sd(std::vector<double>{2, 2, 2, 2}) == 0.0);
  const std::vector<double> v{3.1, -2.0, 7.5, 0.25, 4.0, 1.0};
  CHECK(robust_sd(v) == doctest::Approx(2.4740548554484803).epsilon(1e-14));
  CHECK(median(std::vector<double>{1, 2, 3, 4, 5}) == 3.0);
  CHECK_THROWS_AS(robust_sd(std::vector<double>{}), InvalidInput);

  Rng rng(2);
  std::vector<double> big(100000);
  for (double& x : big) x = rng.normal();
  CHECK(std::abs(robust_sd(big) - 1.0) < 0.02);

  std::vector<double> moved;
  for (double x : v) moved.push_back(-4.0 + -2.5 * x);
  CHECK(std::abs(robust_sd(moved) - 2.5 * robust_sd(v)) < 1e-12);
}
