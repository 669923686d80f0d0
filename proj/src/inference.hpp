#pragma once

#include <memory>
#include <string>
#include <vector>

#include "model_core.hpp"
#include "numkernels.hpp"
#include "quadrature.hpp"

namespace elgm::infer {

// What the inference layer needs of a model: the joint log density and its
// latent-space derivatives. ElgmModel plugs in through model_problem();
// tests exercise the machinery with hand-written toys.
class LatentProblem {
 public:
  virtual ~LatentProblem() = default;
  virtual int latent_dim() const = 0;
  virtual int hyper_dim() const = 0;
  // log pi(w, theta, Y); -inf signals a likelihood domain violation
  virtual double log_joint(const VectorXd& w, const VectorXd& theta) const = 0;
  virtual VectorXd grad_w(const VectorXd& w, const VectorXd& theta) const = 0;
  // H(w, theta) = -d^2/dw^2 log pi(w, theta, Y)
  virtual num::SymMatrix neg_hessian_w(const VectorXd& w, const VectorXd& theta) const = 0;
};

std::shared_ptr<LatentProblem> model_problem(std::shared_ptr<const model::ElgmModel> m);

struct Config {
  int k = 3;
  double tol_inner = 1e-8;
  double tol_outer = 1e-6;
  int max_outer = 100;
  uint64_t seed = 0;
  int threads = 1;
  VectorXd theta_start;  // unconstrained; zeros when empty
};

// Inner Gaussian approximation at a fixed theta: the conditional mode, the
// curvature factorization, and log pi_LA(theta, Y) evaluated at that mode.
struct InnerSolution {
  VectorXd theta;
  VectorXd w_hat;
  num::CholeskyFactor hessian_factor;  // H_w(theta) at w_hat
  double log_laplace = 0.0;  // log pi(w_hat,theta,Y) + (m/2)log 2pi - 1/2 log|H|
  int iterations = 0;
};

// Warm-start memory for the outer optimization: most recent conditional
// modes keyed by theta, looked up by nearest Euclidean distance.
class WarmStartCache {
 public:
  const VectorXd* nearest(const VectorXd& theta) const;
  void insert(const VectorXd& theta, const VectorXd& w_hat);

 private:
  std::vector<std::pair<VectorXd, VectorXd>> entries_;
};

InnerSolution inner_solve(const LatentProblem& problem, const VectorXd& theta,
                          const VectorXd* warm_start, double tol);

// log pi_LA(theta, Y), reusing the cache for warm starts (and extending it).
double laplace_objective(const LatentProblem& problem, const VectorXd& theta,
                         WarmStartCache& cache, double tol_inner);

struct FitResult {
  std::shared_ptr<const LatentProblem> problem;
  VectorXd theta_hat;
  MatrixXd hessian_out;   // H_LA(theta_hat), s x s
  MatrixXd cholesky_out;  // lower L with L L^T = H_LA^{-1}
  quad::AdaptedGrid grid;
  std::vector<InnerSolution> inner;  // one per grid node
  double log_evidence = 0.0;
  bool converged = false;
  int outer_iterations = 0;
  std::vector<std::string> warnings;
  Config config;
};

FitResult fit(std::shared_ptr<const LatentProblem> problem, const Config& config);

inline FitResult fit(std::shared_ptr<const model::ElgmModel> m, const Config& config) {
  return fit(model_problem(std::move(m)), config);
}

// Per-coordinate posterior summaries of the hyperparameters, on the
// unconstrained scale. Spread/quantiles need more than one support point per
// coordinate, so k = 1 flags them unavailable.
struct ThetaSummaries {
  std::vector<std::string> names;
  VectorXd mean;
  VectorXd sd;
  MatrixXd quantiles;  // s x 3 for probabilities {0.025, 0.5, 0.975}
  bool spread_available = false;
};

ThetaSummaries theta_summaries(const FitResult& fit);

// Marginal CDF of one theta coordinate: monotone-cubic interpolation of the
// lambda-weighted step CDF over the sorted unique node coordinates.
class MarginalCdf {
 public:
  MarginalCdf(const FitResult& fit, int coord);
  double cdf(double x) const;
  double quantile(double p) const;
  bool degenerate() const { return knots_.size() < 2; }
  double lo() const { return knots_.front(); }
  double hi() const { return knots_.back(); }

 private:
  std::vector<double> knots_;
  std::vector<double> cdf_;
  std::vector<double> slope_;  // Fritsch-Carlson tangents
};

struct SampleBatch {
  int64_t count = 0;
  MatrixXd draws;  // B x m
  std::vector<int> node_choice;
  uint64_t rng_seed = 0;
};

// Exact draws from the Gaussian-mixture approximation: node by inverse CDF
// over lambda in grid order, then w = w_hat + solve(L^T, eps). Deterministic
// given the seed (counter-based generator).
SampleBatch sample_posterior(const FitResult& fit, int64_t b, uint64_t seed);

// Marginal draws of one theta coordinate from the fitted hyperparameter
// posterior: inverse-CDF through MarginalCdf for k >= 2, the Gaussian
// N(theta_hat, LL^T) marginal when k == 1.
VectorXd sample_theta_marginal(const FitResult& fit, int coord, int64_t b, uint64_t seed);

// Log of the mixture density sum_z lambda(z) N(w; w_hat(z), H(z)^{-1}).
double log_mixture_density(const FitResult& fit, const VectorXd& w);

// Mixture mean and covariance implied by the fit (exact, not sampled).
void mixture_moments(const FitResult& fit, VectorXd& mean, MatrixXd& cov);

}  // namespace elgm::infer
