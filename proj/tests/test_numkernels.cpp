#include <doctest.h>

#include <cmath>
#include <Eigen/Dense>

#include "error.hpp"
#include "numkernels.hpp"
#include "rng.hpp"

using namespace elgm;
using namespace elgm::num;

namespace {

MatrixXd random_spd(int m, unsigned salt) {
  MatrixXd b(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      b(i, j) = rng::normal(salt, 5, static_cast<uint64_t>(i) * m + j);
    }
  }
  return b.transpose() * b + static_cast<double>(m) * MatrixXd::Identity(m, m);
}

SpMat to_sparse(const MatrixXd& a) {
  SpMat s = a.sparseView();
  s.makeCompressed();
  return s;
}

}  // namespace

TEST_CASE("cholesky of the identity") {
  auto f = cholesky(MatrixXd::Identity(3, 3));
  CHECK(f.log_det() == 0.0);
  CHECK(f.jitter_applied() == 0.0);
  CHECK(f.dense_lower().isApprox(MatrixXd::Identity(3, 3)));
}

TEST_CASE("cholesky matches the hand factorization") {
  MatrixXd a(2, 2);
  a << 4.0, 2.0, 2.0, 3.0;
  auto f = cholesky(a);
  // 2*2 = 4, 2*1 = 2, 1 + 2 = 3
  CHECK(f.dense_lower()(0, 0) == doctest::Approx(2.0));
  CHECK(f.dense_lower()(1, 0) == doctest::Approx(1.0));
  CHECK(f.dense_lower()(1, 1) == doctest::Approx(std::sqrt(2.0)));
  CHECK(f.log_det() == doctest::Approx(std::log(8.0)).epsilon(1e-14));
}

TEST_CASE("indefinite matrices fail after jitter escalation") {
  MatrixXd a(2, 2);
  a << 1.0, 2.0, 2.0, 1.0;  // eigenvalues 3 and -1: jitter cannot repair
  CHECK_THROWS_AS(cholesky(a), Error);
  try {
    cholesky(a);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPositiveDefinite);
    CHECK(std::string(e.what()).find("pivot") != std::string::npos);
  }
}

TEST_CASE("singular PSD matrices are repaired by jitter") {
  MatrixXd a(2, 2);
  a << 1.0, 1.0, 1.0, 1.0;
  auto f = cholesky(a);
  CHECK(f.jitter_applied() > 0.0);
  CHECK(f.jitter_applied() < 1e-4);
}

TEST_CASE("round trip on random SPD matrices, dense and sparse") {
  for (int m : {1, 5, 17, 50}) {
    MatrixXd a = random_spd(m, 100 + m);
    auto fd = cholesky(a);
    CHECK(fd.jitter_applied() == 0.0);
    MatrixXd rec = fd.dense_lower() * fd.dense_lower().transpose();
    CHECK((rec - a).cwiseAbs().maxCoeff() / a.cwiseAbs().maxCoeff() <= 1e-10);

    auto fs = cholesky(SymMatrix::sparse(to_sparse(a)));
    CHECK(fs.jitter_applied() == 0.0);
    CHECK(fs.log_det() == doctest::Approx(fd.log_det()).epsilon(1e-10));

    // solve and quad_form agree across the two storage paths
    VectorXd b(m);
    for (int i = 0; i < m; ++i) b[i] = rng::normal(7, 9, i);
    VectorXd xd = fd.solve(b);
    VectorXd xs = fs.solve(b);
    CHECK((xd - xs).lpNorm<Eigen::Infinity>() <= 1e-9 * xd.lpNorm<Eigen::Infinity>());
    CHECK(fd.quad_form(b) == doctest::Approx(b.dot(a * b)).epsilon(1e-10));
    CHECK(fs.quad_form(b) == doctest::Approx(b.dot(a * b)).epsilon(1e-10));

    // sqrt_solve x satisfies x^T A x = |eps|^2 on both paths
    CHECK(fd.quad_form(fd.sqrt_solve(b)) == doctest::Approx(b.squaredNorm()).epsilon(1e-9));
    CHECK(fs.quad_form(fs.sqrt_solve(b)) == doctest::Approx(b.squaredNorm()).epsilon(1e-9));
  }
}

TEST_CASE("trust region solves quadratics immediately") {
  VectorXd a(3);
  a << 1.5, -2.0, 40.0;
  TrustRegionObjective f;
  f.value = [&](const VectorXd& w) { return 0.5 * (w - a).squaredNorm(); };
  f.gradient = [&](const VectorXd& w) { return VectorXd(w - a); };
  f.hessian = [&](const VectorXd&) { return SymMatrix::dense(MatrixXd::Identity(3, 3)); };

  for (double scale : {0.0, 1.0, -30.0}) {
    auto res = trust_region_minimize(f, VectorXd::Constant(3, scale), 1e-10);
    CHECK(res.converged);
    CHECK(res.iterations <= 2);
    CHECK((res.minimizer - a).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("strictly convex quadratics finish within 3 iterations") {
  for (unsigned salt = 0; salt < 5; ++salt) {
    int m = 4;
    MatrixXd a = random_spd(m, 200 + salt);
    VectorXd b(m);
    for (int i = 0; i < m; ++i) b[i] = 3.0 * rng::normal(salt, 11, i);
    TrustRegionObjective f;
    f.value = [&](const VectorXd& w) { return 0.5 * w.dot(a * w) - b.dot(w); };
    f.gradient = [&](const VectorXd& w) { return VectorXd(a * w - b); };
    f.hessian = [&](const VectorXd&) { return SymMatrix::dense(a); };
    auto res = trust_region_minimize(f, VectorXd::Zero(m), 1e-10);
    VectorXd exact = a.llt().solve(b);
    CHECK(res.converged);
    CHECK(res.iterations <= 3);
    CHECK((res.minimizer - exact).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
}

TEST_CASE("univariate logistic-plus-quadratic matches a bisection oracle") {
  auto fval = [](double w) { return 10.0 * log1p_exp(w) - 4.0 * w + 0.5 * w * w; };
  auto fprime = [](double w) { return 10.0 * expit(w) - 4.0 + w; };

  // Bisection on the stationarity equation f'(w) = 0.
  double lo = -10.0, hi = 10.0;
  REQUIRE(fprime(lo) < 0.0);
  REQUIRE(fprime(hi) > 0.0);
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (fprime(mid) < 0.0 ? lo : hi) = mid;
  }
  double oracle = 0.5 * (lo + hi);
  CHECK(oracle == doctest::Approx(-0.28711).epsilon(1e-4));

  TrustRegionObjective f;
  f.value = [&](const VectorXd& w) { return fval(w[0]); };
  f.gradient = [&](const VectorXd& w) {
    VectorXd g(1);
    g[0] = fprime(w[0]);
    return g;
  };
  f.hessian = [&](const VectorXd& w) {
    double p = expit(w[0]);
    MatrixXd h(1, 1);
    h << 10.0 * p * (1.0 - p) + 1.0;
    return SymMatrix::dense(h);
  };
  auto res = trust_region_minimize(f, VectorXd::Zero(1), 1e-10);
  CHECK(res.converged);
  CHECK(res.minimizer[0] == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("flat quartic exercises the jitter path and still converges") {
  TrustRegionObjective f;
  f.value = [](const VectorXd& w) { return std::pow(w[0], 4); };
  f.gradient = [](const VectorXd& w) {
    VectorXd g(1);
    g[0] = 4.0 * std::pow(w[0], 3);
    return g;
  };
  f.hessian = [](const VectorXd& w) {
    MatrixXd h(1, 1);
    h << 12.0 * w[0] * w[0];
    return SymMatrix::dense(h);
  };
  auto res = trust_region_minimize(f, VectorXd::Ones(1), 1e-8);
  CHECK(res.converged);
  CHECK(std::fabs(res.minimizer[0]) <= 1e-2);
}

TEST_CASE("accepted iterates never increase the objective") {
  TrustRegionObjective f;
  f.value = [](const VectorXd& w) {
    return std::cos(w[0]) + 0.05 * w.squaredNorm() + std::sin(0.5 * w[1]);
  };
  f.gradient = [&](const VectorXd& w) {
    VectorXd g(2);
    g[0] = -std::sin(w[0]) + 0.1 * w[0];
    g[1] = 0.5 * std::cos(0.5 * w[1]) + 0.1 * w[1];
    return g;
  };
  f.hessian = [&](const VectorXd& w) {
    MatrixXd h = 0.1 * MatrixXd::Identity(2, 2);
    h(0, 0) += -std::cos(w[0]);
    h(1, 1) += -0.25 * std::sin(0.5 * w[1]);
    return SymMatrix::dense(h);
  };
  auto res = trust_region_minimize(f, VectorXd::Constant(2, 2.0), 1e-8);
  REQUIRE(res.objective_trace.size() >= 2);
  for (size_t i = 1; i < res.objective_trace.size(); ++i) {
    CHECK(res.objective_trace[i] <= res.objective_trace[i - 1]);
  }
}

TEST_CASE("non-finite start is rejected") {
  TrustRegionObjective f;
  f.value = [](const VectorXd& w) { return std::log(w[0]); };
  f.gradient = [](const VectorXd& w) {
    VectorXd g(1);
    g[0] = 1.0 / w[0];
    return g;
  };
  f.hessian = [](const VectorXd& w) {
    MatrixXd h(1, 1);
    h << -1.0 / (w[0] * w[0]);
    return SymMatrix::dense(h);
  };
  CHECK_THROWS_AS(trust_region_minimize(f, VectorXd::Constant(1, -1.0), 1e-8), Error);
}

TEST_CASE("fd_gradient") {
  auto sq = [](const VectorXd& x) { return x[0] * x[0]; };
  VectorXd at(1);
  at << 3.0;
  CHECK(fd_gradient(sq, at)[0] == doctest::Approx(6.0).epsilon(1e-7));

  auto sine = [](const VectorXd& x) { return std::sin(x[0]); };
  at << 0.7;
  CHECK(fd_gradient(sine, at)[0] == doctest::Approx(std::cos(0.7)).epsilon(1e-7));

  auto constant = [](const VectorXd&) { return 4.2; };
  VectorXd at3 = VectorXd::Constant(3, 1.5);
  CHECK(fd_gradient(constant, at3).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("fd_hessian") {
  MatrixXd a(2, 2);
  a << 2.0, 1.0, 1.0, 3.0;
  auto quad = [&](const VectorXd& x) { return 0.5 * x.dot(a * x); };
  MatrixXd h = fd_hessian(quad, VectorXd::Constant(2, 0.3));
  CHECK((h - a).cwiseAbs().maxCoeff() <= 1e-4);

  auto expxy = [](const VectorXd& x) { return std::exp(x[0] * x[1]); };
  MatrixXd h2 = fd_hessian(expxy, VectorXd::Zero(2));
  MatrixXd expect(2, 2);
  expect << 0.0, 1.0, 1.0, 0.0;
  CHECK((h2 - expect).cwiseAbs().maxCoeff() <= 1e-4);
  CHECK(h2(0, 1) == h2(1, 0));  // symmetric by construction
}

TEST_CASE("finite differences report the offending stencil point") {
  auto partial = [](const VectorXd& x) {
    return x[0] > 1.0 ? std::numeric_limits<double>::infinity() : x[0];
  };
  VectorXd at(1);
  at << 1.0;  // the +h stencil point crosses the wall
  CHECK_THROWS_AS(fd_gradient(partial, at), Error);
}
