#include "inference.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "error.hpp"
#include "rng.hpp"

namespace elgm::infer {

namespace {

class ModelProblem final : public LatentProblem {
 public:
  explicit ModelProblem(std::shared_ptr<const model::ElgmModel> m) : model_(std::move(m)) {}

  int latent_dim() const override { return model_->latent_dim(); }
  int hyper_dim() const override { return model_->hyper_dim(); }

  double log_joint(const VectorXd& w, const VectorXd& theta) const override {
    return model::log_joint(*model_, w, theta).log_value;
  }
  VectorXd grad_w(const VectorXd& w, const VectorXd& theta) const override {
    return model::grad_w_log_joint(*model_, w, theta);
  }
  num::SymMatrix neg_hessian_w(const VectorXd& w, const VectorXd& theta) const override {
    return model::hessian_w(*model_, w, theta);
  }

 private:
  std::shared_ptr<const model::ElgmModel> model_;
};

}  // namespace

std::shared_ptr<LatentProblem> model_problem(std::shared_ptr<const model::ElgmModel> m) {
  return std::make_shared<ModelProblem>(std::move(m));
}

const VectorXd* WarmStartCache::nearest(const VectorXd& theta) const {
  const VectorXd* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [t, w] : entries_) {
    double d = (t - theta).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = &w;
    }
  }
  return best;
}

void WarmStartCache::insert(const VectorXd& theta, const VectorXd& w_hat) {
  entries_.emplace_back(theta, w_hat);
  if (entries_.size() > 64) entries_.erase(entries_.begin());
}

InnerSolution inner_solve(const LatentProblem& problem, const VectorXd& theta,
                          const VectorXd* warm_start, double tol) {
  const int m = problem.latent_dim();
  InnerSolution sol;
  sol.theta = theta;

  if (m == 0) {
    sol.w_hat = VectorXd(0);
    sol.hessian_factor = num::cholesky(num::SymMatrix::dense(MatrixXd(0, 0)));
    sol.log_laplace = problem.log_joint(sol.w_hat, theta);
    return sol;
  }

  num::TrustRegionObjective obj;
  obj.value = [&](const VectorXd& w) { return -problem.log_joint(w, theta); };
  obj.gradient = [&](const VectorXd& w) { return VectorXd(-problem.grad_w(w, theta)); };
  obj.hessian = [&](const VectorXd& w) { return problem.neg_hessian_w(w, theta); };

  VectorXd w0 = (warm_start != nullptr) ? *warm_start : VectorXd::Zero(m);
  num::TrustRegionResult tr = num::trust_region_minimize(obj, w0, tol);
  if (!tr.converged) {
    std::string t = "(";
    for (int j = 0; j < theta.size(); ++j) {
      t += std::to_string(theta[j]);
      if (j + 1 < theta.size()) t += ", ";
    }
    t += ")";
    throw Error(ErrorCode::NoConvergence,
                "inner_solve: no convergence at theta = " + t + " after " +
                    std::to_string(tr.iterations) +
                    " iterations, gradient inf-norm " +
                    std::to_string(tr.gradient_norm));
  }

  sol.w_hat = tr.minimizer;
  sol.iterations = tr.iterations;
  sol.hessian_factor = std::move(tr.hessian_at_opt);
  sol.log_laplace = -tr.objective + 0.5 * m * std::log(2.0 * std::numbers::pi) -
                    0.5 * sol.hessian_factor.log_det();
  return sol;
}

double laplace_objective(const LatentProblem& problem, const VectorXd& theta,
                         WarmStartCache& cache, double tol_inner) {
  const VectorXd* warm = cache.nearest(theta);
  InnerSolution sol = inner_solve(problem, theta, warm, tol_inner);
  cache.insert(theta, sol.w_hat);
  return sol.log_laplace;
}

FitResult fit(std::shared_ptr<const LatentProblem> problem, const Config& config) {
  if (config.k < 1) {
    throw Error(ErrorCode::InvalidOrder, "fit: k must be >= 1");
  }
  FitResult result;
  result.problem = problem;
  result.config = config;
  const int s = problem->hyper_dim();
  if (config.k % 2 == 0) {
    result.warnings.push_back(
        "even k: the mode is not a grid node; prefer odd k");
  }

  WarmStartCache cache;
  VectorXd theta_hat(s);
  if (s == 0) {
    theta_hat = VectorXd(0);
    result.converged = true;
    result.hessian_out = MatrixXd(0, 0);
    result.cholesky_out = MatrixXd(0, 0);
  } else {
    auto objective = [&](const VectorXd& theta) {
      return -laplace_objective(*problem, theta, cache, config.tol_inner);
    };
    num::TrustRegionObjective outer;
    outer.value = objective;
    outer.gradient = [&](const VectorXd& t) { return num::fd_gradient(objective, t); };
    outer.hessian = [&](const VectorXd& t) {
      return num::SymMatrix::dense(num::fd_hessian(objective, t));
    };
    VectorXd theta0 = config.theta_start.size() == s ? config.theta_start
                                                     : VectorXd::Zero(s);

    // The fd gradient of an O(n) objective cannot resolve below roughly
    // eps^{2/3} * |F|; for large n that floor sits above any fixed absolute
    // tolerance, so the effective tolerance is widened to the floor.
    double f0 = objective(theta0);
    double grad_floor = 8.0 *
                        std::pow(std::numeric_limits<double>::epsilon(), 2.0 / 3.0) *
                        (std::fabs(f0) + 1.0);
    double tol_outer = config.tol_outer;
    if (grad_floor > tol_outer) {
      tol_outer = grad_floor;
      result.warnings.push_back(
          "outer tolerance widened to the finite-difference resolution floor " +
          std::to_string(grad_floor));
    }
    num::TrustRegionResult tr =
        num::trust_region_minimize(outer, theta0, tol_outer, config.max_outer);
    if (!tr.converged) {
      throw Error(ErrorCode::NoConvergence,
                  "fit: outer optimization did not converge within " +
                      std::to_string(config.max_outer) +
                      " iterations (gradient inf-norm " +
                      std::to_string(tr.gradient_norm) + ")");
    }
    theta_hat = tr.minimizer;
    result.converged = true;
    result.outer_iterations = tr.iterations;

    // H_LA at the mode, then L_LA from factor-then-invert of H_LA.
    result.hessian_out = num::fd_hessian(objective, theta_hat);
    num::CholeskyFactor hf = num::cholesky(result.hessian_out);
    if (hf.jitter_applied() > 0.0) {
      result.warnings.push_back("outer Hessian needed jitter " +
                                std::to_string(hf.jitter_applied()));
    }
    MatrixXd hinv = hf.inverse_dense();
    result.cholesky_out = num::cholesky(hinv).dense_lower();
  }
  result.theta_hat = theta_hat;

  quad::ProductRule rule = quad::product_rule(s, config.k);
  quad::AdaptedPoints adapted = quad::adapt(rule, theta_hat, result.cholesky_out);
  const int64_t n_nodes = adapted.points.rows();

  // Solve the inner problem at every node, warm-started from the mode
  // solutions cached during the outer phase (read-only here, so node solves
  // can run concurrently and stay deterministic).
  result.inner.resize(n_nodes);
  const WarmStartCache& frozen = cache;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  parallel_for(n_nodes, config.threads, [&](int64_t i) {
    try {
      VectorXd theta_i = adapted.points.row(i).transpose();
      const VectorXd* warm = frozen.nearest(theta_i);
      result.inner[i] = inner_solve(*problem, theta_i, warm, config.tol_inner);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  VectorXd log_values(n_nodes);
  for (int64_t i = 0; i < n_nodes; ++i) log_values[i] = result.inner[i].log_laplace;

  result.grid.center = theta_hat;
  result.grid.cholesky = result.cholesky_out;
  result.grid.order = config.k;
  result.grid.nodes = adapted.points;
  result.grid.raw_weights = rule.weights;
  result.grid.log_values = log_values;
  result.grid.log_det_cholesky = adapted.log_det_cholesky;
  result.grid.lambda =
      quad::normalize_lambda(log_values, rule.weights, adapted.log_det_cholesky);

  VectorXd terms(n_nodes);
  for (int64_t i = 0; i < n_nodes; ++i) {
    terms[i] = log_values[i] + std::log(rule.weights[i]) + adapted.log_det_cholesky;
  }
  result.log_evidence = log_sum_exp(terms);
  return result;
}

namespace {

// Marginalize lambda onto the sorted unique values of one node coordinate.
void marginal_support(const FitResult& fit, int coord, std::vector<double>& values,
                      std::vector<double>& mass) {
  const int64_t n = fit.grid.nodes.rows();
  std::vector<std::pair<double, double>> pairs(n);
  for (int64_t i = 0; i < n; ++i) {
    pairs[i] = {fit.grid.nodes(i, coord), fit.grid.lambda[i]};
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  values.clear();
  mass.clear();
  for (const auto& [v, w] : pairs) {
    if (!values.empty() && v == values.back()) {
      mass.back() += w;
    } else {
      values.push_back(v);
      mass.push_back(w);
    }
  }
}

}  // namespace

MarginalCdf::MarginalCdf(const FitResult& fit, int coord) {
  std::vector<double> mass;
  marginal_support(fit, coord, knots_, mass);
  // Midpoint convention: each knot carries half its mass on either side, so
  // symmetric weights put the median exactly at the central node.
  cdf_.resize(knots_.size());
  double acc = 0.0;
  for (size_t i = 0; i < knots_.size(); ++i) {
    cdf_[i] = std::min(acc + 0.5 * mass[i], 1.0);
    acc += mass[i];
  }

  // Fritsch-Carlson tangents keep the interpolant monotone.
  const size_t n = knots_.size();
  slope_.assign(n, 0.0);
  if (n >= 2) {
    std::vector<double> d(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) {
      d[i] = (cdf_[i + 1] - cdf_[i]) / (knots_[i + 1] - knots_[i]);
    }
    slope_[0] = d[0];
    slope_[n - 1] = d[n - 2];
    for (size_t i = 1; i + 1 < n; ++i) {
      slope_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
    }
    for (size_t i = 0; i + 1 < n; ++i) {
      if (d[i] == 0.0) {
        slope_[i] = slope_[i + 1] = 0.0;
        continue;
      }
      double a = slope_[i] / d[i];
      double b = slope_[i + 1] / d[i];
      double r = a * a + b * b;
      if (r > 9.0) {
        double t = 3.0 / std::sqrt(r);
        slope_[i] = t * a * d[i];
        slope_[i + 1] = t * b * d[i];
      }
    }
  }
}

double MarginalCdf::cdf(double x) const {
  if (knots_.empty()) return 0.0;
  if (x <= knots_.front()) return cdf_.front() * (x == knots_.front() ? 1.0 : 0.0);
  if (x >= knots_.back()) return 1.0;
  size_t hi = std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin();
  size_t lo = hi - 1;
  double h = knots_[hi] - knots_[lo];
  double t = (x - knots_[lo]) / h;
  double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
  double h10 = t * (1 - t) * (1 - t);
  double h01 = t * t * (3 - 2 * t);
  double h11 = t * t * (t - 1);
  return h00 * cdf_[lo] + h10 * h * slope_[lo] + h01 * cdf_[hi] + h11 * h * slope_[hi];
}

double MarginalCdf::quantile(double p) const {
  if (knots_.empty()) return 0.0;
  if (p <= cdf_.front()) return knots_.front();
  if (p >= 1.0) return knots_.back();
  double lo = knots_.front(), hi = knots_.back();
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

ThetaSummaries theta_summaries(const FitResult& fit) {
  const int s = static_cast<int>(fit.theta_hat.size());
  ThetaSummaries out;
  out.mean = VectorXd::Zero(s);
  out.sd = VectorXd::Zero(s);
  out.quantiles = MatrixXd::Zero(s, 3);
  out.spread_available = fit.grid.order > 1;
  if (s == 0) return out;

  const VectorXd& lambda = fit.grid.lambda;
  for (int j = 0; j < s; ++j) {
    double m1 = 0.0, m2 = 0.0;
    for (int64_t i = 0; i < fit.grid.nodes.rows(); ++i) {
      double v = fit.grid.nodes(i, j);
      m1 += lambda[i] * v;
      m2 += lambda[i] * v * v;
    }
    out.mean[j] = m1;
    out.sd[j] = out.spread_available ? std::sqrt(std::max(0.0, m2 - m1 * m1))
                                     : std::numeric_limits<double>::quiet_NaN();
    if (out.spread_available) {
      MarginalCdf cdf(fit, j);
      out.quantiles(j, 0) = cdf.quantile(0.025);
      out.quantiles(j, 1) = cdf.quantile(0.5);
      out.quantiles(j, 2) = cdf.quantile(0.975);
    } else {
      out.quantiles.row(j).setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

SampleBatch sample_posterior(const FitResult& fit, int64_t b, uint64_t seed) {
  if (b < 1) {
    throw Error(ErrorCode::InvalidArgument, "sample_posterior: B must be >= 1");
  }
  const int m = fit.problem->latent_dim();
  const int64_t n_nodes = fit.grid.lambda.size();

  // Cumulative lambda in fixed grid order for inverse-CDF node choice.
  std::vector<double> cum(n_nodes);
  double acc = 0.0;
  for (int64_t i = 0; i < n_nodes; ++i) {
    acc += fit.grid.lambda[i];
    cum[i] = acc;
  }
  cum[n_nodes - 1] = 1.0;

  SampleBatch batch;
  batch.count = b;
  batch.rng_seed = seed;
  batch.draws.resize(b, m);
  batch.node_choice.resize(b);
  for (int64_t i = 0; i < b; ++i) {
    double u = rng::uniform01(seed, 0, static_cast<uint64_t>(i));
    int node = static_cast<int>(
        std::lower_bound(cum.begin(), cum.end(), u) - cum.begin());
    if (node >= n_nodes) node = static_cast<int>(n_nodes - 1);
    batch.node_choice[i] = node;
    if (m > 0) {
      VectorXd eps(m);
      for (int j = 0; j < m; ++j) {
        eps[j] = rng::normal(seed, 1, static_cast<uint64_t>(i) * m + j);
      }
      batch.draws.row(i) =
          (fit.inner[node].w_hat + fit.inner[node].hessian_factor.sqrt_solve(eps))
              .transpose();
    }
  }
  return batch;
}

namespace {

// Continuous reconstruction of a one-hyperparameter posterior: monotone-cubic
// interpolation of the log density through the adapted nodes, quadratic tail
// decay at the adapted curvature, then a fine-grid normalized CDF. This is
// the "further numerical integration" route and keeps refinement in k
// meaningful (the atom-level lambda CDF cannot beat a plain Gaussian).
class SmoothThetaCdf {
 public:
  explicit SmoothThetaCdf(const FitResult& fit) {
    const int64_t n_nodes = fit.grid.nodes.rows();
    std::vector<std::pair<double, double>> pts(n_nodes);
    for (int64_t i = 0; i < n_nodes; ++i) {
      pts[i] = {fit.grid.nodes(i, 0), fit.grid.log_values[i] - fit.log_evidence};
    }
    std::sort(pts.begin(), pts.end());
    std::vector<double> t(n_nodes), u(n_nodes);
    for (int64_t i = 0; i < n_nodes; ++i) {
      t[i] = pts[i].first;
      u[i] = pts[i].second;
    }

    // Fritsch-Carlson tangents on the log density.
    const size_t n = t.size();
    std::vector<double> slope(n, 0.0), d(n - 1);
    for (size_t i = 0; i + 1 < n; ++i) d[i] = (u[i + 1] - u[i]) / (t[i + 1] - t[i]);
    slope[0] = d[0];
    slope[n - 1] = d[n - 2];
    for (size_t i = 1; i + 1 < n; ++i) {
      slope[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 0.5 * (d[i - 1] + d[i]);
    }

    double scale = fit.cholesky_out(0, 0);  // adapted posterior sd
    double lo = t.front() - 3.0 * scale, hi = t.back() + 3.0 * scale;
    auto log_density = [&](double x) {
      if (x <= t.front()) {
        double dt = x - t.front();
        return u.front() + slope.front() * dt - 0.5 * dt * dt / (scale * scale);
      }
      if (x >= t.back()) {
        double dt = x - t.back();
        return u.back() + slope.back() * dt - 0.5 * dt * dt / (scale * scale);
      }
      size_t hi_idx = std::upper_bound(t.begin(), t.end(), x) - t.begin();
      size_t lo_idx = hi_idx - 1;
      double h = t[hi_idx] - t[lo_idx];
      double tt = (x - t[lo_idx]) / h;
      double h00 = (1 + 2 * tt) * (1 - tt) * (1 - tt);
      double h10 = tt * (1 - tt) * (1 - tt);
      double h01 = tt * tt * (3 - 2 * tt);
      double h11 = tt * tt * (tt - 1);
      return h00 * u[lo_idx] + h10 * h * slope[lo_idx] + h01 * u[hi_idx] +
             h11 * h * slope[hi_idx];
    };

    const int grid_n = 2001;
    grid_lo_ = lo;
    grid_h_ = (hi - lo) / (grid_n - 1);
    cdf_.resize(grid_n);
    std::vector<double> dens(grid_n);
    for (int r = 0; r < grid_n; ++r) dens[r] = std::exp(log_density(lo + r * grid_h_));
    cdf_[0] = 0.0;
    for (int r = 1; r < grid_n; ++r) {
      cdf_[r] = cdf_[r - 1] + 0.5 * grid_h_ * (dens[r - 1] + dens[r]);
    }
    double total = cdf_.back();
    for (auto& v : cdf_) v /= total;
  }

  double quantile(double p) const {
    size_t hi = std::lower_bound(cdf_.begin(), cdf_.end(), p) - cdf_.begin();
    if (hi == 0) return grid_lo_;
    if (hi >= cdf_.size()) return grid_lo_ + grid_h_ * (cdf_.size() - 1);
    double f0 = cdf_[hi - 1], f1 = cdf_[hi];
    double tt = (f1 > f0) ? (p - f0) / (f1 - f0) : 0.0;
    return grid_lo_ + grid_h_ * (static_cast<double>(hi - 1) + tt);
  }

 private:
  double grid_lo_ = 0.0;
  double grid_h_ = 0.0;
  std::vector<double> cdf_;
};

}  // namespace

VectorXd sample_theta_marginal(const FitResult& fit, int coord, int64_t b,
                               uint64_t seed) {
  const int s = static_cast<int>(fit.theta_hat.size());
  if (coord < 0 || coord >= s) {
    throw Error(ErrorCode::InvalidArgument, "sample_theta_marginal: bad coordinate");
  }
  VectorXd out(b);
  const uint64_t stream = 100 + static_cast<uint64_t>(coord);
  if (fit.grid.order == 1) {
    // Single support point: fall back on the Gaussian N(theta_hat, LL^T).
    MatrixXd cov = fit.cholesky_out * fit.cholesky_out.transpose();
    double sd = std::sqrt(cov(coord, coord));
    for (int64_t i = 0; i < b; ++i) {
      out[i] = fit.theta_hat[coord] +
               sd * rng::normal(seed, stream, static_cast<uint64_t>(i));
    }
    return out;
  }
  if (s == 1) {
    SmoothThetaCdf cdf(fit);
    for (int64_t i = 0; i < b; ++i) {
      out[i] = cdf.quantile(rng::uniform01(seed, stream, static_cast<uint64_t>(i)));
    }
    return out;
  }
  // Coordinate marginals of a multi-dimensional grid: the lambda-weighted
  // interpolated CDF.
  MarginalCdf cdf(fit, coord);
  for (int64_t i = 0; i < b; ++i) {
    out[i] = cdf.quantile(rng::uniform01(seed, stream, static_cast<uint64_t>(i)));
  }
  return out;
}

double log_mixture_density(const FitResult& fit, const VectorXd& w) {
  const int m = fit.problem->latent_dim();
  if (w.size() != m) {
    throw Error(ErrorCode::InvalidArgument, "log_mixture_density: dimension mismatch");
  }
  const int64_t n_nodes = fit.grid.lambda.size();
  VectorXd terms(n_nodes);
  const double c = -0.5 * m * std::log(2.0 * std::numbers::pi);
  for (int64_t i = 0; i < n_nodes; ++i) {
    if (fit.grid.lambda[i] <= 0.0) {
      terms[i] = kNegInf;
      continue;
    }
    const auto& node = fit.inner[i];
    double quad = node.hessian_factor.quad_form(w - node.w_hat);
    terms[i] = std::log(fit.grid.lambda[i]) + c +
               0.5 * node.hessian_factor.log_det() - 0.5 * quad;
  }
  return log_sum_exp(terms);
}

void mixture_moments(const FitResult& fit, VectorXd& mean, MatrixXd& cov) {
  const int m = fit.problem->latent_dim();
  const int64_t n_nodes = fit.grid.lambda.size();
  mean = VectorXd::Zero(m);
  cov = MatrixXd::Zero(m, m);
  for (int64_t i = 0; i < n_nodes; ++i) {
    mean += fit.grid.lambda[i] * fit.inner[i].w_hat;
  }
  for (int64_t i = 0; i < n_nodes; ++i) {
    double lam = fit.grid.lambda[i];
    if (lam <= 0.0) continue;
    const auto& node = fit.inner[i];
    VectorXd d = node.w_hat - mean;
    cov += lam * (node.hessian_factor.inverse_dense() + d * d.transpose());
  }
}

}  // namespace elgm::infer
