#include <doctest.h>

#include <cmath>
#include <Eigen/Dense>
#include <numbers>

#include "error.hpp"
#include "quadrature.hpp"

using namespace elgm;
using namespace elgm::quad;

namespace {

double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); }

// (p-1)!! for even p, 0 for odd p: the standard normal moments.
double normal_moment(int p) {
  if (p % 2 == 1) return 0.0;
  double v = 1.0;
  for (int k = p - 1; k > 1; k -= 2) v *= k;
  return v;
}

// Quadrature sum in symmetric-pair order so odd integrands cancel exactly.
double integrate(const UnivariateRule& rule, const std::function<double(double)>& f) {
  const int k = rule.order;
  double s = 0.0;
  for (int j = 0; j < k / 2; ++j) {
    s += f(rule.nodes[j]) * rule.weights[j] +
         f(rule.nodes[k - 1 - j]) * rule.weights[k - 1 - j];
  }
  if (k % 2 == 1) s += f(rule.nodes[k / 2]) * rule.weights[k / 2];
  return s;
}

}  // namespace

TEST_CASE("k=1 rule is the single standard-normal point") {
  auto rule = gauss_hermite_rule(1);
  REQUIRE(rule.order == 1);
  CHECK(rule.nodes[0] == 0.0);
  // Exactness on constants forces the weight to 1/phi(0) = sqrt(2 pi).
  CHECK(rule.weights[0] == doctest::Approx(std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("k=3 rule matches the moment-equation oracle") {
  // Independent oracle: with nodes (-r, 0, r), exactness on z^0..z^5 pins
  // r = sqrt(3), outer weight 1/(6 phi(r)), center weight (2/3) sqrt(2 pi).
  const double r = std::sqrt(3.0);
  const double w_outer = 1.0 / (6.0 * phi(r));
  const double w_center = (2.0 / 3.0) * std::sqrt(2.0 * std::numbers::pi);

  auto rule = gauss_hermite_rule(3);
  CHECK(rule.nodes[0] == doctest::Approx(-r).epsilon(1e-13));
  CHECK(rule.nodes[1] == 0.0);
  CHECK(rule.nodes[2] == doctest::Approx(r).epsilon(1e-13));
  CHECK(rule.weights[0] == doctest::Approx(w_outer).epsilon(1e-12));
  CHECK(rule.weights[1] == doctest::Approx(w_center).epsilon(1e-12));
  CHECK(rule.weights[2] == doctest::Approx(w_outer).epsilon(1e-12));
}

TEST_CASE("polynomial exactness up to degree 2k-1") {
  // Absolute 1e-8 for k <= 7; the k = 11 moments reach 6.5e8 where an
  // absolute 1e-8 sits below double roundoff, so the bar scales with the
  // moment there.
  for (int k : {1, 3, 5, 7, 11}) {
    auto rule = gauss_hermite_rule(k);
    for (int p = 0; p <= 2 * k - 1; ++p) {
      double got = integrate(rule, [&](double z) { return std::pow(z, p) * phi(z); });
      double scale = (k <= 7) ? 1.0 : std::max(1.0, std::fabs(normal_moment(p)));
      CHECK_MESSAGE(std::fabs(got - normal_moment(p)) <= 1e-8 * scale,
                    "k=" << k << " degree " << p);
    }
  }
}

TEST_CASE("degree beyond 2k-1 is inexact, odd degrees exact by symmetry") {
  auto rule = gauss_hermite_rule(5);
  double z8 = integrate(rule, [](double z) { return std::pow(z, 8) * phi(z); });
  CHECK(z8 == doctest::Approx(105.0).epsilon(1e-10));  // degree 8 <= 9
  double z9 = integrate(rule, [](double z) { return std::pow(z, 9) * phi(z); });
  CHECK(std::fabs(z9) <= 1e-9);  // odd moment, zero by node symmetry
  double z10 = integrate(rule, [](double z) { return std::pow(z, 10) * phi(z); });
  CHECK(std::fabs(z10 - 945.0) > 1e-6);  // degree 10 > 2k-1
}

TEST_CASE("rule invariants: ordering, symmetry, positivity, unit mass") {
  for (int k : {2, 4, 7, 40, 199}) {
    auto rule = gauss_hermite_rule(k);
    double mass = 0.0;
    for (int j = 0; j < k; ++j) {
      CHECK(rule.weights[j] > 0.0);
      if (j > 0) CHECK(rule.nodes[j] > rule.nodes[j - 1]);
      CHECK(rule.nodes[j] == -rule.nodes[k - 1 - j]);
      CHECK(rule.weights[j] == rule.weights[k - 1 - j]);
      mass += rule.weights[j] * phi(rule.nodes[j]);
    }
    if (k % 2 == 1) CHECK(rule.nodes[k / 2] == 0.0);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("invalid orders are rejected") {
  CHECK_THROWS_AS(gauss_hermite_rule(0), Error);
  CHECK_THROWS_AS(gauss_hermite_rule(-2), Error);
  CHECK_THROWS_AS(gauss_hermite_rule(200), Error);
}

TEST_CASE("rule construction is deterministic") {
  auto a = gauss_hermite_rule(15);
  auto b = gauss_hermite_rule(15);
  for (int j = 0; j < 15; ++j) {
    CHECK(a.nodes[j] == b.nodes[j]);
    CHECK(a.weights[j] == b.weights[j]);
  }
}

TEST_CASE("product rule over one dimension is the base rule") {
  auto base = gauss_hermite_rule(3);
  auto prod = product_rule(1, 3);
  REQUIRE(prod.points.rows() == 3);
  for (int j = 0; j < 3; ++j) {
    CHECK(prod.points(j, 0) == base.nodes[j]);
    CHECK(prod.weights[j] == base.weights[j]);
  }
}

TEST_CASE("two-dimensional product rule") {
  auto base = gauss_hermite_rule(3);
  auto prod = product_rule(2, 3);
  REQUIRE(prod.points.rows() == 9);
  // Lexicographic in node indices, last dimension fastest.
  int p = 0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j, ++p) {
      CHECK(prod.points(p, 0) == base.nodes[i]);
      CHECK(prod.points(p, 1) == base.nodes[j]);
      CHECK(prod.weights[p] == doctest::Approx(base.weights[i] * base.weights[j]));
    }
  }
  // Center point weight is the squared center weight (~2.7925).
  double wc = base.weights[1] * base.weights[1];
  CHECK(prod.weights[4] == doctest::Approx(wc).epsilon(1e-14));
  CHECK(wc == doctest::Approx((4.0 / 9.0) * 2.0 * std::numbers::pi).epsilon(1e-13));
}

TEST_CASE("degenerate product rules") {
  auto one = product_rule(2, 1);
  REQUIRE(one.points.rows() == 1);
  CHECK(one.points(0, 0) == 0.0);
  CHECK(one.points(0, 1) == 0.0);
  CHECK(one.weights[0] == doctest::Approx(2.0 * std::numbers::pi).epsilon(1e-14));

  auto empty = product_rule(0, 3);
  REQUIRE(empty.points.rows() == 1);
  CHECK(empty.points.cols() == 0);
  CHECK(empty.weights[0] == 1.0);
}

TEST_CASE("product rule capacity cap") {
  CHECK_THROWS_AS(product_rule(7, 10), Error);  // 10^7 points
}

TEST_CASE("adapt: identity leaves the rule unchanged") {
  auto rule = product_rule(2, 3);
  auto adapted = adapt(rule, VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  CHECK(adapted.log_det_cholesky == 0.0);
  for (int p = 0; p < 9; ++p) {
    CHECK(adapted.points(p, 0) == rule.points(p, 0));
    CHECK(adapted.points(p, 1) == rule.points(p, 1));
    CHECK(adapted.weights[p] == rule.weights[p]);
  }
}

TEST_CASE("adapt: scalar shift and scale") {
  auto rule = product_rule(1, 1);
  VectorXd center(1);
  center << 2.0;
  MatrixXd chol(1, 1);
  chol << 0.5;
  auto adapted = adapt(rule, center, chol);
  CHECK(adapted.points(0, 0) == 2.0);
  CHECK(adapted.weights[0] ==
        doctest::Approx(0.5 * std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("adapt rejects non-positive diagonals") {
  auto rule = product_rule(2, 3);
  MatrixXd chol = MatrixXd::Identity(2, 2);
  chol(1, 1) = 0.0;
  CHECK_THROWS_AS(adapt(rule, VectorXd::Zero(2), chol), Error);
}

TEST_CASE("adapted rule integrates its matched Gaussian exactly") {
  // For any SPD H and mode mu, adapting to (mu, chol(H^{-1})) must integrate
  // exp(-1/2 (x-mu)^T H (x-mu)) to (2 pi)^{s/2} |H|^{-1/2} for every k.
  auto run = [](int s, int k, unsigned salt) {
    MatrixXd b = MatrixXd::Zero(s, s);
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        b(i, j) = std::sin(0.7 * (salt + 3 * i + 5 * j + 1));
      }
    }
    MatrixXd h = b.transpose() * b + MatrixXd::Identity(s, s);
    VectorXd mu(s);
    for (int i = 0; i < s; ++i) mu[i] = std::cos(1.3 * (salt + i));

    Eigen::LLT<MatrixXd> hllt(h.inverse());
    MatrixXd l = hllt.matrixL();
    auto adapted = adapt(product_rule(s, k), mu, l);

    double total = 0.0;
    for (int p = 0; p < adapted.points.rows(); ++p) {
      VectorXd d = adapted.points.row(p).transpose() - mu;
      total += adapted.weights[p] * std::exp(-0.5 * d.dot(h * d));
    }
    double expect = std::pow(2.0 * std::numbers::pi, 0.5 * s) /
                    std::sqrt(h.determinant());
    CHECK(total == doctest::Approx(expect).epsilon(1e-10));
  };
  for (int s = 1; s <= 3; ++s) {
    for (int k : {1, 3, 5}) {
      for (unsigned salt = 0; salt < 3; ++salt) run(s, k, salt);
    }
  }
}

TEST_CASE("normalize_lambda") {
  SUBCASE("single node") {
    VectorXd lv(1), w(1);
    lv << -3.7;
    w << 2.0;
    VectorXd lambda = normalize_lambda(lv, w, 0.4);
    CHECK(lambda[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("proportional to the weights") {
    VectorXd lv(2), w(2);
    lv << 1.3, 1.3;
    w << 1.0, 3.0;
    VectorXd lambda = normalize_lambda(lv, w, -2.0);
    CHECK(lambda[0] == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(lambda[1] == doctest::Approx(0.75).epsilon(1e-14));
  }
  SUBCASE("extreme log values do not overflow") {
    VectorXd lv(3), w = VectorXd::Ones(3);
    lv << 0.0, -745.0, 0.0;
    VectorXd lambda = normalize_lambda(lv, w, 0.0);
    CHECK(lambda[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lambda[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lambda[1] < 1e-300);
    CHECK(lambda.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("minus-infinity nodes get zero mass") {
    VectorXd lv(3), w = VectorXd::Ones(3);
    lv << 0.0, -std::numeric_limits<double>::infinity(), 1.0;
    VectorXd lambda = normalize_lambda(lv, w, 0.0);
    CHECK(lambda[1] == 0.0);
    CHECK(lambda.sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("shift invariance") {
    VectorXd lv(4), w(4);
    lv << -1.0, 0.5, 2.0, -3.0;
    w << 0.5, 1.5, 1.0, 2.0;
    VectorXd a = normalize_lambda(lv, w, 0.7);
    VectorXd b = normalize_lambda(lv.array() + 123.456, w, 0.7);
    for (int i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
  }
  SUBCASE("all nodes dead is a degenerate posterior") {
    VectorXd lv = VectorXd::Constant(3, -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(normalize_lambda(lv, VectorXd::Ones(3), 0.0), Error);
  }
}
