#include <doctest.h>

#include <cmath>
#include <numbers>

#include "error.hpp"
#include "io_sim.hpp"
#include "models_builtin.hpp"
#include "rng.hpp"
#include "validation.hpp"

using namespace elgm;
using namespace elgm::validation;

namespace {

// m = 0, s = 1 toy: the joint is just a density over theta.
class ThetaDensity final : public infer::LatentProblem {
 public:
  explicit ThetaDensity(std::function<double(double)> logd) : logd_(std::move(logd)) {}
  int latent_dim() const override { return 0; }
  int hyper_dim() const override { return 1; }
  double log_joint(const VectorXd&, const VectorXd& t) const override {
    return logd_(t[0]);
  }
  VectorXd grad_w(const VectorXd&, const VectorXd&) const override { return {}; }
  num::SymMatrix neg_hessian_w(const VectorXd&, const VectorXd&) const override {
    return num::SymMatrix::dense(MatrixXd(0, 0));
  }

 private:
  std::function<double(double)> logd_;
};

double log_std_normal(double x) {
  return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * x * x;
}

}  // namespace

TEST_CASE("oracle CDF of the standard normal matches Phi to 1e-6") {
  ThetaDensity problem(log_std_normal);
  auto oracle = brute_force_posterior(problem, {0}, {GridAxis{-8.0, 8.0, 2001}});
  CHECK(oracle.coverage_ok);
  CHECK(std::exp(oracle.log_normalizer) == doctest::Approx(1.0).epsilon(1e-8));
  // Composite-trapezoid CDF error at a knot is h^2/12 |phi'(x)| (about
  // 1.3e-6 at |x| = 1 for h = 0.008); linear interpolation between knots
  // adds at most h^2/8 |phi'|. Check against that analytic bound, and the
  // flat 1e-6 where the bound itself sits below it.
  const double h = 16.0 / 2000.0;
  for (double x : {-3.0, -1.7, -1.0, -0.304, 0.0, 0.4, 1.1, 2.9}) {
    double bound = h * h * std::fabs(x) * std::exp(-0.5 * x * x) /
                       std::sqrt(2.0 * std::numbers::pi) * (1.0 / 12.0 + 1.0 / 8.0) +
                   1e-9;
    double err = std::fabs(oracle.cdf(x) - std_normal_cdf(x));
    CHECK(err <= 1.05 * bound + 1e-9);
    if (bound < 1e-6) CHECK(err <= 1e-6);
  }
  CHECK(oracle.mean() == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(oracle.sd() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("oracle on the conjugate model recovers the closed form") {
  auto problem = infer::model_problem(model::conjugate_gaussian(VectorXd::Ones(4)));
  auto oracle = brute_force_posterior(*problem, {0}, {GridAxis{-4.0, 5.6, 2001}});
  CHECK(oracle.coverage_ok);
  CHECK(oracle.mean() == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(oracle.sd() * oracle.sd() == doctest::Approx(0.2).epsilon(1e-6));
}

TEST_CASE("flat joint normalizes to one over the volume") {
  ThetaDensity problem([](double) { return 0.0; });
  auto oracle = brute_force_posterior(problem, {0}, {GridAxis{2.0, 6.0, 101}});
  for (double d : oracle.log_density) {
    CHECK(std::exp(d) == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("oracle evidence is stable under grid doubling") {
  io::SimTruth sim = io::simulate_gaussian_scale(17, 50, 0.0);
  auto problem = infer::model_problem(model::gaussian_scale(sim.table.as_reals("y")));
  auto coarse = brute_force_posterior(*problem, {0}, {GridAxis{-4.0, 4.0, 1001}});
  auto fine = brute_force_posterior(*problem, {0}, {GridAxis{-4.0, 4.0, 2001}});
  CHECK(std::fabs(coarse.log_normalizer - fine.log_normalizer) <= 1e-6);
}

TEST_CASE("marginals from a single sweep agree with per-dim oracles") {
  Eigen::VectorXi y(2);
  y << 3, 1;
  auto m = model::poisson_aggregate(y, {{0}, {0}}, {{1.0}, {1.0}}, 1, MatrixXd(1, 0));
  auto problem = infer::model_problem(std::shared_ptr<const model::ElgmModel>(std::move(m)));
  std::vector<GridAxis> axes = {GridAxis{-3.0, 3.0, 301}, GridAxis{-5.0, 3.0, 301}};
  auto marg = brute_force_marginals(*problem, axes, 2);
  REQUIRE(marg.size() == 2);
  for (int d = 0; d < 2; ++d) {
    auto direct = brute_force_posterior(*problem, {d}, axes);
    CHECK(marg[d].mean() == doctest::Approx(direct.mean()).epsilon(1e-9));
    CHECK(marg[d].sd() == doctest::Approx(direct.sd()).epsilon(1e-9));
  }

  // Thread-count invariance of the sweep.
  auto marg1 = brute_force_marginals(*problem, axes, 1);
  for (int d = 0; d < 2; ++d) {
    for (size_t i = 0; i < marg[d].log_density.size(); ++i) {
      CHECK(marg[d].log_density[i] == marg1[d].log_density[i]);
    }
  }
}

TEST_CASE("oracle caps and degenerate inputs") {
  auto problem = infer::model_problem(model::conjugate_gaussian(VectorXd::Ones(4)));
  // grid too large
  CHECK_THROWS_AS(
      brute_force_posterior(*problem, {0}, {GridAxis{-1.0, 1.0, 20000001}}), Error);
  // narrow grid fails the coverage check but still normalizes
  auto narrow = brute_force_posterior(*problem, {0}, {GridAxis{0.5, 1.1, 101}});
  CHECK_FALSE(narrow.coverage_ok);

  // joint dimension above the cap
  io::SimTruth sim = io::simulate_bernoulli_glmm(3, 40, 2, 3, VectorXd::Zero(1), 0.5, 0.5);
  auto yll = sim.table.as_ints("y");
  Eigen::VectorXi yy(yll.size());
  for (size_t i = 0; i < yll.size(); ++i) yy[i] = static_cast<int>(yll[i]);
  MatrixXd x(sim.table.rows(), 1);
  x.col(0) = sim.table.as_reals("x0");
  auto big = infer::model_problem(model::bernoulli_glmm(
      yy, x, sim.table.as_codes("g1"), 2, sim.table.as_codes("g2"), 3));
  std::vector<GridAxis> axes(big->latent_dim() + 2, GridAxis{-1.0, 1.0, 3});
  CHECK_THROWS_AS(brute_force_posterior(*big, {0}, axes), Error);
}

TEST_CASE("two-sample KS statistic") {
  SUBCASE("identical samples give zero") {
    std::vector<double> a = {0.3, -1.0, 2.0, 0.7};
    CHECK(ks_statistic(a, a) == 0.0);
  }
  SUBCASE("disjoint supports give one") {
    CHECK(ks_statistic({1.0, 2.0}, {3.0, 4.0}) == 1.0);
  }
  SUBCASE("symmetry and monotone-transform invariance") {
    std::vector<double> a, b;
    for (int i = 0; i < 400; ++i) {
      a.push_back(rng::normal(1, 0, i));
      b.push_back(0.3 + 1.2 * rng::normal(2, 0, i));
    }
    double d1 = ks_statistic(a, b);
    CHECK(d1 == ks_statistic(b, a));
    auto monotone = [](double x) { return std::exp(0.5 * x) + x; };
    std::vector<double> ta = a, tb = b;
    for (auto& v : ta) v = monotone(v);
    for (auto& v : tb) v = monotone(v);
    CHECK(ks_statistic(ta, tb) == doctest::Approx(d1).epsilon(1e-14));
  }
  SUBCASE("too-small inputs are rejected") {
    CHECK_THROWS_AS(ks_statistic({1.0}, {2.0, 3.0}), Error);
  }
}

TEST_CASE("one-sample KS of normal draws against Phi") {
  std::vector<double> draws(100000);
  for (size_t i = 0; i < draws.size(); ++i) draws[i] = rng::normal(77, 0, i);
  double d = ks_statistic(draws, [](double x) { return std_normal_cdf(x); });
  // 1.63/sqrt(B) is the 1% critical value.
  CHECK(d < 0.006);
}

TEST_CASE("compare_fit_to_oracle on the conjugate model") {
  VectorXd y = VectorXd::Ones(4);
  auto model = model::conjugate_gaussian(y);
  std::shared_ptr<const model::ElgmModel> shared(std::move(model));
  auto fit_res = infer::fit(shared, infer::Config{});
  auto problem = infer::model_problem(shared);
  auto oracle = brute_force_posterior(*problem, {0}, {GridAxis{-4.0, 5.6, 2001}});
  auto res = compare_fit_to_oracle(fit_res, oracle, 100000, 4);
  REQUIRE(res.size() == 1);
  CHECK(res[0].ks <= 0.01);
  // deterministic given (fit, oracle, B, seed)
  auto res2 = compare_fit_to_oracle(fit_res, oracle, 100000, 4);
  CHECK(res[0].ks == res2[0].ks);
}

TEST_CASE("chi-square survival function sanity") {
  CHECK(chi_square_sf(0.0, 3) == doctest::Approx(1.0));
  CHECK(chi_square_sf(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_square_sf(18.307038053275146, 10) == doctest::Approx(0.05).epsilon(1e-9));
  // Q(a,x) + P(a,x) = 1 across the series/continued-fraction switch
  for (double x : {0.5, 2.0, 6.0, 25.0}) {
    double q = gamma_q(2.5, x);
    CHECK(q >= 0.0);
    CHECK(q <= 1.0);
  }
}

TEST_CASE("node frequencies pass the chi-square test against lambda") {
  io::SimTruth sim = io::simulate_gaussian_scale(23, 60, 0.0);
  infer::Config cfg;
  cfg.k = 7;
  auto fit_res = infer::fit(model::gaussian_scale(sim.table.as_reals("y")), cfg);
  auto batch = infer::sample_posterior(fit_res, 100000, 31);
  auto test = node_frequency_test(fit_res, batch);
  CHECK(test.dof >= 1);
  CHECK(test.p_value > 0.001);
}

TEST_CASE("quadrature refinement: k=7 beats k=1 against the oracle") {
  auto ks_for = [](uint64_t seed, int k) {
    auto sim = io::simulate_gaussian_scale(seed, 200, 0.0);
    std::shared_ptr<const model::ElgmModel> m(
        model::gaussian_scale(sim.table.as_reals("y")));
    infer::Config cfg;
    cfg.k = k;
    auto fit = infer::fit(m, cfg);
    auto prob = infer::model_problem(m);
    auto oracle = brute_force_posterior(*prob, {0}, axes_from_fit(fit));
    return compare_fit_to_oracle(fit, oracle, 100000, seed)[0].ks;
  };
  int improved = 0;
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    if (ks_for(seed, 7) < ks_for(seed, 1)) ++improved;
  }
  CHECK(improved >= 8);
}
