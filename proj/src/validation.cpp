#include "validation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "error.hpp"

namespace elgm::validation {

namespace {

struct OnlineLse {
  double mx = kNegInf;
  double sum = 0.0;

  void add(double v) {
    if (v == kNegInf) return;
    if (v <= mx) {
      sum += std::exp(v - mx);
    } else {
      sum = sum * std::exp(mx - v) + 1.0;
      mx = v;
    }
  }
  double value() const { return (sum > 0.0) ? mx + std::log(sum) : kNegInf; }
};

double trap_weight(const GridAxis& ax, int idx) {
  double h = (ax.hi - ax.lo) / (ax.n - 1);
  return (idx == 0 || idx == ax.n - 1) ? 0.5 * h : h;
}

double axis_value(const GridAxis& ax, int idx) {
  double h = (ax.hi - ax.lo) / (ax.n - 1);
  return ax.lo + h * idx;
}

}  // namespace

OracleDensity brute_force_posterior(const infer::LatentProblem& problem,
                                    const std::vector<int>& dims,
                                    const std::vector<GridAxis>& full_axes,
                                    int threads) {
  const int m = problem.latent_dim();
  const int s = problem.hyper_dim();
  const int joint = m + s;
  if (joint > kOracleMaxJointDim) {
    throw Error(ErrorCode::Capacity,
                "brute_force_posterior: joint dimension " + std::to_string(joint) +
                    " exceeds the cap of " + std::to_string(kOracleMaxJointDim));
  }
  if (static_cast<int>(full_axes.size()) != joint || joint == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "brute_force_posterior: need one axis per joint coordinate");
  }
  for (const auto& ax : full_axes) {
    if (ax.n < 2 || !(ax.hi > ax.lo)) {
      throw Error(ErrorCode::InvalidArgument, "brute_force_posterior: bad axis");
    }
  }
  if (dims.empty() || dims.size() > 2) {
    throw Error(ErrorCode::InvalidArgument,
                "brute_force_posterior: keep one or two marginal dimensions");
  }
  for (int d : dims) {
    if (d < 0 || d >= joint) {
      throw Error(ErrorCode::InvalidArgument, "brute_force_posterior: bad dimension id");
    }
  }

  int64_t total = 1;
  for (const auto& ax : full_axes) {
    total *= ax.n;
    if (total > kOracleMaxGridPoints) {
      throw Error(ErrorCode::Capacity,
                  "brute_force_posterior: grid exceeds " +
                      std::to_string(kOracleMaxGridPoints) + " points");
    }
  }

  std::vector<int> out_dims;
  for (int d = 0; d < joint; ++d) {
    if (std::find(dims.begin(), dims.end(), d) == dims.end()) out_dims.push_back(d);
  }

  int64_t kept_cells = 1;
  for (int d : dims) kept_cells *= full_axes[d].n;
  int64_t fiber = 1;
  for (int d : out_dims) fiber *= full_axes[d].n;

  std::vector<double> marg(kept_cells, kNegInf);
  std::vector<int64_t> bad_counts(kept_cells, 0);

  // Each kept cell owns its fiber: the walk order inside a fiber is fixed, so
  // the result is identical for every thread count.
  parallel_for(kept_cells, threads, [&](int64_t cell) {
    std::vector<int> kept_idx(dims.size());
    int64_t rem = cell;
    for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
      kept_idx[d] = static_cast<int>(rem % full_axes[dims[d]].n);
      rem /= full_axes[dims[d]].n;
    }
    VectorXd x(joint);
    for (size_t d = 0; d < dims.size(); ++d) {
      x[dims[d]] = axis_value(full_axes[dims[d]], kept_idx[d]);
    }
    OnlineLse acc;
    int64_t bad = 0;
    std::vector<int> out_idx(out_dims.size(), 0);
    for (int64_t f = 0; f < fiber; ++f) {
      double logw = 0.0;
      for (size_t d = 0; d < out_dims.size(); ++d) {
        x[out_dims[d]] = axis_value(full_axes[out_dims[d]], out_idx[d]);
        logw += std::log(trap_weight(full_axes[out_dims[d]], out_idx[d]));
      }
      double lj = problem.log_joint(x.head(m), x.tail(s));
      if (std::isfinite(lj)) {
        acc.add(lj + logw);
      } else {
        ++bad;
      }
      for (int d = static_cast<int>(out_dims.size()) - 1; d >= 0; --d) {
        if (++out_idx[d] < full_axes[out_dims[d]].n) break;
        out_idx[d] = 0;
      }
    }
    marg[cell] = acc.value();
    bad_counts[cell] = bad;
  });

  int64_t bad_total = std::accumulate(bad_counts.begin(), bad_counts.end(), int64_t{0});
  if (2 * bad_total > total) {
    throw Error(ErrorCode::Domain,
                "brute_force_posterior: log_joint non-finite on more than half the grid");
  }

  OracleDensity oracle;
  oracle.dims = dims;
  for (int d : dims) oracle.axes.push_back(full_axes[d]);

  // Normalize: evidence = sum over kept cells of marg * kept trapezoid weight.
  OnlineLse zacc;
  {
    std::vector<int> kept_idx(dims.size(), 0);
    for (int64_t cell = 0; cell < kept_cells; ++cell) {
      double logw = 0.0;
      for (size_t d = 0; d < dims.size(); ++d) {
        logw += std::log(trap_weight(full_axes[dims[d]], kept_idx[d]));
      }
      if (std::isfinite(marg[cell])) zacc.add(marg[cell] + logw);
      for (int d = static_cast<int>(dims.size()) - 1; d >= 0; --d) {
        if (++kept_idx[d] < full_axes[dims[d]].n) break;
        kept_idx[d] = 0;
      }
    }
  }
  oracle.log_normalizer = zacc.value();
  if (!std::isfinite(oracle.log_normalizer)) {
    throw Error(ErrorCode::DegeneratePosterior,
                "brute_force_posterior: zero posterior mass on the grid");
  }
  oracle.log_density.resize(kept_cells);
  for (int64_t cell = 0; cell < kept_cells; ++cell) {
    oracle.log_density[cell] = marg[cell] - oracle.log_normalizer;
  }

  // Post-hoc coverage: each kept dimension must span >= 8 posterior sd.
  oracle.coverage_ok = true;
  for (size_t d = 0; d < dims.size(); ++d) {
    OracleDensity m1 = (dims.size() == 1) ? oracle : oracle.marginal_1d(static_cast<int>(d));
    double mu = m1.mean(), sig = m1.sd();
    const GridAxis& ax = oracle.axes[d];
    if (!(std::min(mu - ax.lo, ax.hi - mu) >= 4.0 * sig)) oracle.coverage_ok = false;
  }
  return oracle;
}

std::vector<OracleDensity> brute_force_marginals(const infer::LatentProblem& problem,
                                                 const std::vector<GridAxis>& full_axes,
                                                 int threads) {
  const int m = problem.latent_dim();
  const int s = problem.hyper_dim();
  const int joint = m + s;
  if (joint > kOracleMaxJointDim) {
    throw Error(ErrorCode::Capacity,
                "brute_force_marginals: joint dimension exceeds the cap of " +
                    std::to_string(kOracleMaxJointDim));
  }
  if (static_cast<int>(full_axes.size()) != joint || joint == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "brute_force_marginals: need one axis per joint coordinate");
  }
  int64_t total = 1;
  for (const auto& ax : full_axes) {
    if (ax.n < 2 || !(ax.hi > ax.lo)) {
      throw Error(ErrorCode::InvalidArgument, "brute_force_marginals: bad axis");
    }
    total *= ax.n;
    if (total > kOracleMaxGridPoints) {
      throw Error(ErrorCode::Capacity, "brute_force_marginals: grid exceeds " +
                                           std::to_string(kOracleMaxGridPoints) +
                                           " points");
    }
  }

  // One accumulator per (chunk, dim, index); chunks are slices of axis 0.
  const int n0 = full_axes[0].n;
  int64_t inner = total / n0;
  std::vector<std::vector<std::vector<OnlineLse>>> partial(n0);
  std::vector<int64_t> bad(n0, 0);
  for (int c = 0; c < n0; ++c) {
    partial[c].resize(joint);
    for (int d = 0; d < joint; ++d) partial[c][d].resize(full_axes[d].n);
  }

  parallel_for(n0, threads, [&](int64_t chunk) {
    std::vector<int> idx(joint, 0);
    idx[0] = static_cast<int>(chunk);
    VectorXd x(joint);
    x[0] = axis_value(full_axes[0], idx[0]);
    double logw0 = std::log(trap_weight(full_axes[0], idx[0]));
    auto& acc = partial[chunk];
    for (int64_t f = 0; f < inner; ++f) {
      double logw = logw0;
      for (int d = 1; d < joint; ++d) {
        x[d] = axis_value(full_axes[d], idx[d]);
        logw += std::log(trap_weight(full_axes[d], idx[d]));
      }
      double lj = problem.log_joint(x.head(m), x.tail(s));
      if (std::isfinite(lj)) {
        for (int d = 0; d < joint; ++d) {
          // Marginal density at the kept index: drop the kept dim's weight.
          acc[d][idx[d]].add(lj + logw - std::log(trap_weight(full_axes[d], idx[d])));
        }
      } else {
        ++bad[chunk];
      }
      for (int d = joint - 1; d >= 1; --d) {
        if (++idx[d] < full_axes[d].n) break;
        idx[d] = 0;
      }
    }
  });

  int64_t bad_total = std::accumulate(bad.begin(), bad.end(), int64_t{0});
  if (2 * bad_total > total) {
    throw Error(ErrorCode::Domain,
                "brute_force_marginals: log_joint non-finite on more than half the grid");
  }

  // Merge chunk accumulators in chunk order.
  std::vector<OracleDensity> out(joint);
  for (int d = 0; d < joint; ++d) {
    OracleDensity& od = out[d];
    od.dims = {d};
    od.axes = {full_axes[d]};
    od.log_density.assign(full_axes[d].n, kNegInf);
    for (int i = 0; i < full_axes[d].n; ++i) {
      OnlineLse merged;
      for (int c = 0; c < n0; ++c) {
        const OnlineLse& p = partial[c][d][i];
        if (p.sum > 0.0) {
          double v = p.value();
          merged.add(v);
        }
      }
      od.log_density[i] = merged.value();
    }
    OnlineLse z;
    for (int i = 0; i < full_axes[d].n; ++i) {
      if (std::isfinite(od.log_density[i])) {
        z.add(od.log_density[i] + std::log(trap_weight(full_axes[d], i)));
      }
    }
    od.log_normalizer = z.value();
    if (!std::isfinite(od.log_normalizer)) {
      throw Error(ErrorCode::DegeneratePosterior,
                  "brute_force_marginals: zero posterior mass on the grid");
    }
    for (auto& v : od.log_density) v -= od.log_normalizer;
    double mu = od.mean(), sig = od.sd();
    od.coverage_ok =
        std::min(mu - full_axes[d].lo, full_axes[d].hi - mu) >= 4.0 * sig;
  }
  return out;
}

OracleDensity OracleDensity::marginal_1d(int which) const {
  if (dims.size() == 1) {
    if (which != 0) throw Error(ErrorCode::InvalidArgument, "marginal_1d: bad index");
    return *this;
  }
  if (which < 0 || which >= static_cast<int>(dims.size())) {
    throw Error(ErrorCode::InvalidArgument, "marginal_1d: bad index");
  }
  const int other = 1 - which;
  const GridAxis& keep_ax = axes[which];
  const GridAxis& out_ax = axes[other];
  OracleDensity out;
  out.dims = {dims[which]};
  out.axes = {keep_ax};
  out.log_normalizer = log_normalizer;
  out.coverage_ok = coverage_ok;
  out.log_density.assign(keep_ax.n, kNegInf);
  for (int i = 0; i < keep_ax.n; ++i) {
    OnlineLse acc;
    for (int j = 0; j < out_ax.n; ++j) {
      int64_t cell = (which == 0) ? static_cast<int64_t>(i) * out_ax.n + j
                                  : static_cast<int64_t>(j) * keep_ax.n + i;
      acc.add(log_density[cell] + std::log(trap_weight(out_ax, j)));
    }
    out.log_density[i] = acc.value();
  }
  return out;
}

void OracleDensity::ensure_cum() const {
  if (!cum_.empty()) return;
  const GridAxis& ax = axes[0];
  double h = (ax.hi - ax.lo) / (ax.n - 1);
  cum_.resize(ax.n);
  cum_[0] = 0.0;
  for (int r = 1; r < ax.n; ++r) {
    cum_[r] = cum_[r - 1] +
              0.5 * h * (std::exp(log_density[r - 1]) + std::exp(log_density[r]));
  }
}

double OracleDensity::cdf(double x) const {
  if (dims.size() != 1) {
    throw Error(ErrorCode::InvalidArgument, "OracleDensity::cdf: 1-D marginals only");
  }
  const GridAxis& ax = axes[0];
  if (x <= ax.lo) return 0.0;
  if (x >= ax.hi) return 1.0;
  ensure_cum();
  double h = (ax.hi - ax.lo) / (ax.n - 1);
  // Monotone piecewise-linear CDF through the trapezoid knot masses.
  int idx = std::min(static_cast<int>((x - ax.lo) / h), ax.n - 2);
  double t = (x - (ax.lo + idx * h)) / h;
  double v = cum_[idx] + t * (cum_[idx + 1] - cum_[idx]);
  return std::min(1.0, v);
}

double OracleDensity::mean() const {
  if (dims.size() != 1) {
    throw Error(ErrorCode::InvalidArgument, "OracleDensity::mean: 1-D marginals only");
  }
  const GridAxis& ax = axes[0];
  double m1 = 0.0;
  for (int r = 0; r < ax.n; ++r) {
    m1 += trap_weight(ax, r) * std::exp(log_density[r]) * axis_value(ax, r);
  }
  return m1;
}

double OracleDensity::sd() const {
  const GridAxis& ax = axes[0];
  double mu = mean();
  double m2 = 0.0;
  for (int r = 0; r < ax.n; ++r) {
    double v = axis_value(ax, r) - mu;
    m2 += trap_weight(ax, r) * std::exp(log_density[r]) * v * v;
  }
  return std::sqrt(std::max(0.0, m2));
}

std::vector<GridAxis> axes_from_fit(const infer::FitResult& fit, double half_width_sds,
                                    int64_t max_points) {
  const int m = fit.problem->latent_dim();
  const int s = fit.problem->hyper_dim();
  const int joint = m + s;
  VectorXd w_mean;
  MatrixXd w_cov;
  if (m > 0) infer::mixture_moments(fit, w_mean, w_cov);
  infer::ThetaSummaries ts;
  if (s > 0) ts = infer::theta_summaries(fit);

  int n_per_dim = 2001;
  if (joint > 1) {
    n_per_dim = static_cast<int>(std::floor(
        std::pow(static_cast<double>(max_points), 1.0 / joint)));
    n_per_dim = std::min(n_per_dim, 2001);
  }

  std::vector<GridAxis> axes(joint);
  for (int d = 0; d < joint; ++d) {
    double mu, sig;
    if (d < m) {
      mu = w_mean[d];
      sig = std::sqrt(w_cov(d, d));
    } else {
      int j = d - m;
      mu = ts.mean[j];
      if (fit.grid.order > 1 && std::isfinite(ts.sd[j])) {
        sig = ts.sd[j];
      } else {
        MatrixXd cov = fit.cholesky_out * fit.cholesky_out.transpose();
        sig = std::sqrt(cov(j, j));
      }
    }
    if (!(sig > 0.0)) sig = 1.0;
    axes[d] = GridAxis{mu - half_width_sds * sig, mu + half_width_sds * sig, n_per_dim};
  }
  return axes;
}

double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "ks_statistic: need >= 2 points per sample");
  }
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    double x = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] <= x) ++i;
    while (j < sb.size() && sb[j] <= x) ++j;
    d = std::max(d, std::fabs(i / na - j / nb));
  }
  return d;
}

double ks_statistic(const std::vector<double>& samples,
                    const std::function<double(double)>& cdf) {
  if (samples.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "ks_statistic: need >= 2 points");
  }
  std::vector<double> xs = samples;
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double f = cdf(xs[i]);
    d = std::max(d, std::fabs((i + 1) / n - f));
    d = std::max(d, std::fabs(i / n - f));
  }
  return d;
}

std::vector<MarginalKs> compare_fit_to_oracle(const infer::FitResult& fit,
                                              const OracleDensity& oracle,
                                              int64_t b, uint64_t seed) {
  const int m = fit.problem->latent_dim();
  std::vector<MarginalKs> out;
  infer::SampleBatch batch;
  bool have_batch = false;
  for (size_t d = 0; d < oracle.dims.size(); ++d) {
    OracleDensity marg = oracle.marginal_1d(static_cast<int>(d));
    int dim = oracle.dims[d];
    std::vector<double> samples(static_cast<size_t>(b));
    if (dim < m) {
      if (!have_batch) {
        batch = infer::sample_posterior(fit, b, seed);
        have_batch = true;
      }
      for (int64_t i = 0; i < b; ++i) samples[i] = batch.draws(i, dim);
    } else {
      VectorXd t = infer::sample_theta_marginal(fit, dim - m, b, seed);
      for (int64_t i = 0; i < b; ++i) samples[i] = t[i];
    }
    MarginalKs mk;
    mk.dim = dim;
    mk.name = (dim < m) ? ("w" + std::to_string(dim)) : ("theta" + std::to_string(dim - m));
    mk.ks = ks_statistic(samples, [&](double x) { return marg.cdf(x); });
    out.push_back(std::move(mk));
  }
  return out;
}

ChiSquareTest node_frequency_test(const infer::FitResult& fit,
                                  const infer::SampleBatch& batch) {
  const int64_t n_nodes = fit.grid.lambda.size();
  std::vector<double> observed(n_nodes, 0.0);
  for (int idx : batch.node_choice) observed[idx] += 1.0;
  const double b = static_cast<double>(batch.count);

  // Pool bins with expected count < 5.
  double pooled_obs = 0.0, pooled_exp = 0.0;
  double stat = 0.0;
  int bins = 0;
  for (int64_t i = 0; i < n_nodes; ++i) {
    double e = b * fit.grid.lambda[i];
    if (e < 5.0) {
      pooled_obs += observed[i];
      pooled_exp += e;
    } else {
      stat += (observed[i] - e) * (observed[i] - e) / e;
      ++bins;
    }
  }
  if (pooled_exp > 0.0) {
    stat += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++bins;
  }
  ChiSquareTest t;
  t.statistic = stat;
  t.dof = std::max(0, bins - 1);
  t.p_value = (t.dof == 0) ? 1.0 : chi_square_sf(stat, t.dof);
  return t;
}

namespace {

double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) {
    throw Error(ErrorCode::InvalidArgument, "gamma_q: bad arguments");
  }
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

double chi_square_sf(double x, int dof) { return gamma_q(0.5 * dof, 0.5 * x); }

}  // namespace elgm::validation
