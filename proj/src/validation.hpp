#pragma once

#include <functional>
#include <vector>

#include "inference.hpp"

namespace elgm::validation {

struct GridAxis {
  double lo = 0.0;
  double hi = 0.0;
  int n = 0;  // number of grid points (>= 2)
};

// Brute-force posterior marginal on a dense rectangular grid, normalized by
// trapezoid quadrature. `dims` are joint-coordinate ids: 0..m-1 index the
// latent w, m..m+s-1 the (unconstrained) hyperparameters.
struct OracleDensity {
  std::vector<int> dims;
  std::vector<GridAxis> axes;        // one per kept dim
  std::vector<double> log_density;   // normalized, row-major over kept dims
  double log_normalizer = 0.0;       // trapezoid evidence
  bool coverage_ok = false;          // grid spans >= 8 posterior sd per dim

  // 1-D helpers (single kept dim, or a marginal extracted via marginal_1d)
  double cdf(double x) const;
  double mean() const;
  double sd() const;
  OracleDensity marginal_1d(int which) const;

 private:
  void ensure_cum() const;
  mutable std::vector<double> cum_;  // knot CDF values, lazily built
};

inline constexpr int kOracleMaxJointDim = 4;
inline constexpr int64_t kOracleMaxGridPoints = 10000000;

OracleDensity brute_force_posterior(const infer::LatentProblem& problem,
                                    const std::vector<int>& dims,
                                    const std::vector<GridAxis>& full_axes,
                                    int threads = 1);

// Every 1-D marginal from a single sweep of the full grid. Work is chunked
// along the first axis with thread-count-independent chunk boundaries and
// merged in chunk order, so results do not depend on `threads`.
std::vector<OracleDensity> brute_force_marginals(const infer::LatentProblem& problem,
                                                 const std::vector<GridAxis>& full_axes,
                                                 int threads = 1);

// Axes centered on the fitted posterior: mean +- half_width_sds * sd per
// joint coordinate, with the per-dimension point count chosen to respect the
// grid cap.
std::vector<GridAxis> axes_from_fit(const infer::FitResult& fit,
                                    double half_width_sds = 6.0,
                                    int64_t max_points = kOracleMaxGridPoints);

// Two-sample KS: sup over the pooled points of |F_a - F_b|.
double ks_statistic(const std::vector<double>& a, const std::vector<double>& b);

// One-sample KS against a CDF: sup over sample points of
// max(|F_hat - F|, |F_hat^- - F|).
double ks_statistic(const std::vector<double>& samples,
                    const std::function<double(double)>& cdf);

struct MarginalKs {
  int dim = 0;          // joint-coordinate id
  std::string name;
  double ks = 0.0;
};

// Draw B samples from the fitted approximation and compare each oracle
// marginal with a one-sample KS against the oracle's interpolated CDF.
std::vector<MarginalKs> compare_fit_to_oracle(const infer::FitResult& fit,
                                              const OracleDensity& oracle,
                                              int64_t b, uint64_t seed);

// Pearson chi-square goodness of fit of the sampled node frequencies against
// lambda; bins with expected count < 5 are pooled.
struct ChiSquareTest {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

ChiSquareTest node_frequency_test(const infer::FitResult& fit,
                                  const infer::SampleBatch& batch);

// Regularized upper incomplete gamma Q(a, x); chi-square survival function is
// Q(dof/2, x/2).
double gamma_q(double a, double x);
double chi_square_sf(double x, int dof);

}  // namespace elgm::validation
