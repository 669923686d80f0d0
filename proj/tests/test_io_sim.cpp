#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "error.hpp"
#include "io_sim.hpp"
#include "validation.hpp"
#include "inference.hpp"
#include "models_builtin.hpp"
#include "results.hpp"

using namespace elgm;
using namespace elgm::io;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("/tmp/elgm_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
  void write(const std::string& text) const {
    std::ofstream out(path);
    out << text;
  }
};

bool tables_identical(const ColumnTable& a, const ColumnTable& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (int c = 0; c < a.cols(); ++c) {
    const Column& ca = a.columns()[c];
    const Column& cb = b.columns()[c];
    if (ca.name != cb.name || ca.type != cb.type) return false;
    if (ca.reals != cb.reals || ca.ints != cb.ints || ca.codes != cb.codes) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("read_csv parses typed columns with category levels by appearance") {
  TempFile f("basic.csv");
  f.write("y,x,g\n1,0.5,a\n0,-0.2,b\n");
  auto table = read_csv(f.path, parse_schema("y:int,x:real,g:category"));
  REQUIRE(table.rows() == 2);
  CHECK(table.as_ints("y") == std::vector<long long>{1, 0});
  CHECK(table.as_reals("x")[0] == doctest::Approx(0.5));
  CHECK(table.as_reals("x")[1] == doctest::Approx(-0.2));
  const Column& g = table.column("g");
  CHECK(g.levels == std::vector<std::string>{"a", "b"});
  CHECK(g.codes == std::vector<int>{0, 1});
}

TEST_CASE("empty csv yields a zero-row table with the schema's columns") {
  TempFile f("empty.csv");
  f.write("");
  auto table = read_csv(f.path, parse_schema("y:real,x:real"));
  CHECK(table.rows() == 0);
  CHECK(table.cols() == 2);
  CHECK(table.has_column("y"));
  CHECK(table.has_column("x"));
}

TEST_CASE("csv errors carry the row and column") {
  TempFile f("bad.csv");
  f.write("y,x\n1,abc\n");
  try {
    read_csv(f.path, parse_schema("y:int,x:real"));
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    std::string msg = e.what();
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("column x") != std::string::npos);
  }

  TempFile g("missing.csv");
  g.write("a,b\n1,2\n");
  CHECK_THROWS_AS(read_csv(g.path, parse_schema("y:real")), Error);

  TempFile h("short.csv");
  h.write("y,x\n1,2\n3\n");
  CHECK_THROWS_AS(read_csv(h.path, parse_schema("y:int,x:real")), Error);
}

TEST_CASE("csv write-read round trip is exact") {
  SimTruth sim = simulate_bernoulli_glmm(5, 50, 3, 4, VectorXd::Ones(2), 0.5, 0.25);
  TempFile f("roundtrip.csv");
  write_csv(sim.table, f.path);
  auto back = read_csv(
      f.path, parse_schema("y:int,x0:real,x1:real,g1:int,g2:int"));
  CHECK(tables_identical(sim.table, back));
}

TEST_CASE("kv documents round trip and tolerate comments") {
  KvDoc doc = {{"a.b", "1"},
               {"a.c", format_double(0.1234567890123456789)},
               {"name", "hello world"}};
  KvDoc back = parse_kv_text("# leading comment\n" + format_kv(doc) + "\n\n");
  CHECK(back == doc);
  CHECK(kv_get(back, "a.b") == std::string("1"));
  CHECK(!kv_get(back, "missing").has_value());
  // 17 significant digits round-trip doubles exactly
  double v = std::stod(*kv_get(back, "a.c"));
  CHECK(v == 0.1234567890123456789);
  CHECK_THROWS_AS(parse_kv_text("no equals sign here"), Error);
}

TEST_CASE("simulators are pure functions of the seed") {
  auto a = simulate_bernoulli_glmm(42, 200, 4, 7, VectorXd::Ones(1), 0.7, 0.3);
  auto b = simulate_bernoulli_glmm(42, 200, 4, 7, VectorXd::Ones(1), 0.7, 0.3);
  auto c = simulate_bernoulli_glmm(43, 200, 4, 7, VectorXd::Ones(1), 0.7, 0.3);
  CHECK(tables_identical(a.table, b.table));
  CHECK_FALSE(tables_identical(a.table, c.table));

  auto cx = simulate_cox(9, 100, VectorXd::Zero(2), 0.5, 3);
  auto cy = simulate_cox(9, 100, VectorXd::Zero(2), 0.5, 3);
  CHECK(tables_identical(cx.table, cy.table));

  auto pa = simulate_poisson_aggregate(11, 20, 2, VectorXd(0), 0.5);
  auto pb = simulate_poisson_aggregate(11, 20, 2, VectorXd(0), 0.5);
  CHECK(tables_identical(pa.table, pb.table));
}

TEST_CASE("null bernoulli model draws fair coins") {
  const int64_t n = 4000;
  auto sim = simulate_bernoulli_glmm(7, n, 3, 5, VectorXd::Zero(1), 0.0, 0.0);
  auto y = sim.table.as_ints("y");
  double mean = 0.0;
  for (auto v : y) mean += static_cast<double>(v);
  mean /= static_cast<double>(n);
  CHECK(std::fabs(mean - 0.5) <= 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("intercept-only bernoulli matches expit(beta)") {
  const int64_t n = 4000;
  VectorXd beta(1);
  beta << 2.0;
  auto sim = simulate_bernoulli_glmm(13, n, 2, 2, beta, 0.0, 0.0);
  auto y = sim.table.as_ints("y");
  double mean = 0.0;
  for (auto v : y) mean += static_cast<double>(v);
  mean /= static_cast<double>(n);
  double p = expit(2.0);
  CHECK(std::fabs(mean - p) <= 4.0 * std::sqrt(p * (1.0 - p) / n));
  // x0 is the intercept column
  VectorXd x0 = sim.table.as_reals("x0");
  CHECK(x0.minCoeff() == 1.0);
  CHECK(x0.maxCoeff() == 1.0);
}

TEST_CASE("cox null-model times are unit exponential") {
  auto sim = simulate_cox(21, 1000, VectorXd::Zero(1), 0.0, 1, 1.0);
  VectorXd t = sim.table.as_reals("time");
  std::vector<double> times(t.data(), t.data() + t.size());
  double d = validation::ks_statistic(
      times, [](double x) { return x <= 0.0 ? 0.0 : 1.0 - std::exp(-x); });
  CHECK(d <= 0.05);
  // no censoring at censor_q = 1
  for (auto c : sim.table.as_ints("censored")) CHECK(c == 0);
}

TEST_CASE("cox censoring quantile produces the expected censored share") {
  auto sim = simulate_cox(22, 1000, VectorXd::Zero(1), 0.0, 1, 0.8);
  auto cen = sim.table.as_ints("censored");
  int64_t n_cen = 0;
  for (auto c : cen) n_cen += c;
  CHECK(n_cen > 150);
  CHECK(n_cen < 250);
  // constant frailty column with d = 1
  for (auto g : sim.table.as_ints("g")) CHECK(g == 0);
}

TEST_CASE("aggregate layouts") {
  SUBCASE("one cell per region is plain Poisson regression") {
    auto sim = simulate_poisson_aggregate(31, 10, 1, VectorXd(0), 0.4);
    CHECK(sim.table.rows() == 10);  // one (region, cell) row each
    auto region = sim.table.as_ints("region");
    auto cell = sim.table.as_ints("cell");
    for (int64_t i = 0; i < 10; ++i) {
      CHECK(region[i] == i);
      CHECK(cell[i] == i);
    }
  }
  SUBCASE("chained layout shares one cell between neighbours") {
    auto sim = simulate_poisson_aggregate(31, 5, 2, VectorXd(0), 0.4);
    CHECK(*kv_get(sim.truth, "truth.cells_total") == "6");
    CHECK(sim.table.rows() == 10);
  }
  SUBCASE("wrapped layout caps the number of cells") {
    auto sim = simulate_poisson_aggregate(31, 30, 2, VectorXd(0), 0.4, 3);
    CHECK(*kv_get(sim.truth, "truth.cells_total") == "3");
    auto cell = sim.table.as_ints("cell");
    for (auto c : cell) CHECK(c < 3);
  }
}

TEST_CASE("conjugate simulator emits the constant table") {
  auto sim = simulate_conjugate(4, 1.0);
  CHECK(sim.table.rows() == 4);
  for (int64_t i = 0; i < 4; ++i) CHECK(sim.table.as_reals("y")[i] == 1.0);
}

TEST_CASE("fit metadata round-trips theta_hat at full precision") {
  SimTruth sim = simulate_gaussian_scale(77, 40, 0.3);
  infer::Config cfg;
  cfg.k = 5;
  auto fit = infer::fit(
      std::shared_ptr<const model::ElgmModel>(model::gaussian_scale(sim.table.as_reals("y"))),
      cfg);
  auto m2 = model::gaussian_scale(sim.table.as_reals("y"));
  KvDoc meta = fit_metadata(fit, *m2, {{"model", "gaussian-scale"}}, 1.25);
  KvDoc back = parse_kv_text(format_kv(meta));
  auto theta_text = kv_get(back, "fit.theta_hat.0");
  REQUIRE(theta_text.has_value());
  CHECK(std::stod(*theta_text) == fit.theta_hat[0]);  // bit-exact via %.17g
  auto ev = kv_get(back, "fit.log_evidence");
  REQUIRE(ev.has_value());
  CHECK(std::stod(*ev) == fit.log_evidence);
  CHECK(kv_get(back, "config.model") == std::string("gaussian-scale"));
}
