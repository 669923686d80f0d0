#include "models_builtin.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "error.hpp"

namespace elgm::model {

namespace {

constexpr double kBetaPrecision = 1e-3;  // beta ~ N(0, 1000 I) unless configured
// Exponential prior on each standard deviation with P(sigma > 1) = 0.5.
constexpr double kSigmaPriorRate = 0.6931471805599453;

double log_exp_prior(double sigma) {
  return std::log(kSigmaPriorRate) - kSigmaPriorRate * sigma;
}

class ConjugateGaussian final : public ElgmModel {
 public:
  explicit ConjugateGaussian(VectorXd y) : y_(std::move(y)) {
    const int n = static_cast<int>(y_.size());
    SpMat z(std::max(n, 1), 1);
    std::vector<std::vector<int>> sets;
    if (n == 0) {
      // No observations: a single unused predictor keeps the structure valid.
      z.insert(0, 0) = 0.0;
      sets.push_back({0});
    } else {
      for (int i = 0; i < n; ++i) {
        z.insert(i, 0) = 1.0;
        sets.push_back({i});
      }
    }
    init_structure(n, std::move(z), std::move(sets), ParameterTransform(std::vector<CoordMap>{}));
  }

  std::string name() const override { return "conjugate"; }

  LikValue log_lik(const VectorXd& eta, const VectorXd&) const override {
    if (y_.size() == 0) return {0.0, false};
    double ss = (y_ - eta).squaredNorm();
    return {-0.5 * ss - 0.5 * y_.size() * std::log(2.0 * std::numbers::pi), false};
  }

  VectorXd log_lik_grad(const VectorXd& eta, const VectorXd&) const override {
    if (y_.size() == 0) return VectorXd::Zero(eta.size());
    return y_ - eta;
  }

  SpMat neg_log_lik_hessian(const VectorXd& eta, const VectorXd&) const override {
    SpMat c(eta.size(), eta.size());
    if (y_.size() > 0) c.setIdentity();
    return c;
  }

  SpMat prior_precision(const VectorXd&) const override {
    SpMat q(1, 1);
    q.insert(0, 0) = 1.0;
    return q;
  }

 private:
  VectorXd y_;
};

class BernoulliGlmm final : public ElgmModel {
 public:
  BernoulliGlmm(Eigen::VectorXi y, MatrixXd x, std::vector<int> g1, int d1,
                std::vector<int> g2, int d2)
      : y_(std::move(y)), d1_(d1), d2_(d2), p_(static_cast<int>(x.cols())) {
    const int n = static_cast<int>(y_.size());
    if (d1 < 1 || d2 < 1 || static_cast<int>(g1.size()) != n ||
        static_cast<int>(g2.size()) != n || x.rows() != n || n < 1) {
      throw Error(ErrorCode::InvalidArgument, "bernoulli_glmm: inconsistent inputs");
    }
    for (int i = 0; i < n; ++i) {
      if (g1[i] < 0 || g1[i] >= d1 || g2[i] < 0 || g2[i] >= d2) {
        throw Error(ErrorCode::InvalidArgument, "bernoulli_glmm: group code out of range");
      }
      if (y_[i] != 0 && y_[i] != 1) {
        throw Error(ErrorCode::InvalidArgument, "bernoulli_glmm: responses must be 0/1");
      }
    }
    const int m = d1 + d2 + p_;
    SpMat z(n, m);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * (2 + p_));
    std::vector<std::vector<int>> sets(n);
    for (int i = 0; i < n; ++i) {
      trip.emplace_back(i, g1[i], 1.0);
      trip.emplace_back(i, d1 + g2[i], 1.0);
      for (int j = 0; j < p_; ++j) {
        if (x(i, j) != 0.0) trip.emplace_back(i, d1 + d2 + j, x(i, j));
      }
      sets[i] = {i};
    }
    z.setFromTriplets(trip.begin(), trip.end());
    init_structure(n, std::move(z), std::move(sets),
                   ParameterTransform({CoordMap::Log, CoordMap::Log}));
  }

  std::string name() const override { return "bernoulli-glmm"; }
  std::vector<std::string> theta_names() const override {
    return {"log_sigma1", "log_sigma2"};
  }
  std::vector<std::string> theta_natural_names() const override {
    return {"sigma1", "sigma2"};
  }

  LikValue log_lik(const VectorXd& eta, const VectorXd&) const override {
    CompensatedSum ll;
    for (int i = 0; i < eta.size(); ++i) {
      ll.add(y_[i] * eta[i] - log1p_exp(eta[i]));
    }
    return {ll.value(), false};
  }

  VectorXd log_lik_grad(const VectorXd& eta, const VectorXd&) const override {
    VectorXd g(eta.size());
    for (int i = 0; i < eta.size(); ++i) g[i] = y_[i] - expit(eta[i]);
    return g;
  }

  SpMat neg_log_lik_hessian(const VectorXd& eta, const VectorXd&) const override {
    SpMat c(eta.size(), eta.size());
    c.reserve(Eigen::VectorXi::Constant(eta.size(), 1));
    for (int i = 0; i < eta.size(); ++i) {
      double p = expit(eta[i]);
      c.insert(i, i) = p * (1.0 - p);
    }
    return c;
  }

  SpMat prior_precision(const VectorXd& theta_nat) const override {
    const int m = latent_dim();
    SpMat q(m, m);
    q.reserve(Eigen::VectorXi::Constant(m, 1));
    double tau1 = 1.0 / (theta_nat[0] * theta_nat[0]);
    double tau2 = 1.0 / (theta_nat[1] * theta_nat[1]);
    for (int j = 0; j < d1_; ++j) q.insert(j, j) = tau1;
    for (int j = 0; j < d2_; ++j) q.insert(d1_ + j, d1_ + j) = tau2;
    for (int j = 0; j < p_; ++j) q.insert(d1_ + d2_ + j, d1_ + d2_ + j) = kBetaPrecision;
    return q;
  }

  double log_prior(const VectorXd& theta_nat) const override {
    return log_exp_prior(theta_nat[0]) + log_exp_prior(theta_nat[1]);
  }

 private:
  Eigen::VectorXi y_;
  int d1_, d2_, p_;
};

class CoxPhPartial final : public ElgmModel {
 public:
  CoxPhPartial(VectorXd time, std::vector<int> censored, MatrixXd x,
               std::optional<std::vector<int>> group, int n_groups) {
    const int n_in = static_cast<int>(time.size());
    if (n_in < 1 || static_cast<int>(censored.size()) != n_in || x.rows() != n_in) {
      throw Error(ErrorCode::InvalidArgument, "cox_ph_partial: inconsistent inputs");
    }
    const bool has_frailty = group.has_value();
    if (has_frailty &&
        (static_cast<int>(group->size()) != n_in || n_groups < 1)) {
      throw Error(ErrorCode::InvalidArgument, "cox_ph_partial: bad frailty grouping");
    }

    // Stable sort by time; ties keep input order.
    std::vector<int> order(n_in);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return time[a] < time[b]; });

    // Drop leading censored subjects: they precede every failure and are
    // never at risk.
    size_t first_obs = 0;
    while (first_obs < order.size() && censored[order[first_obs]]) ++first_obs;
    if (first_obs == order.size()) {
      throw Error(ErrorCode::InvalidArgument,
                  "cox_ph_partial: no observed failure times");
    }
    order.erase(order.begin(), order.begin() + first_obs);

    const int n = static_cast<int>(order.size());
    const int p = static_cast<int>(x.cols());
    const int d = has_frailty ? n_groups : 0;
    observed_.resize(n);
    n_events_ = 0;
    SpMat z(n, d + p);
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<std::vector<int>> sets;
    for (int j = 0; j < n; ++j) {
      int src = order[j];
      observed_[j] = censored[src] ? 0 : 1;
      if (observed_[j]) {
        ++n_events_;
        std::vector<int> risk(n - j);
        std::iota(risk.begin(), risk.end(), j);
        sets.push_back(std::move(risk));
      }
      if (has_frailty) {
        int g = (*group)[src];
        if (g < 0 || g >= n_groups) {
          throw Error(ErrorCode::InvalidArgument, "cox_ph_partial: group code out of range");
        }
        trip.emplace_back(j, g, 1.0);
      }
      for (int c = 0; c < p; ++c) {
        if (x(src, c) != 0.0) trip.emplace_back(j, d + c, x(src, c));
      }
    }
    z.setFromTriplets(trip.begin(), trip.end());
    d_ = d;
    p_ = p;
    ParameterTransform tr = has_frailty
                                ? ParameterTransform({CoordMap::Log})
                                : ParameterTransform(std::vector<CoordMap>{});
    init_structure(n_events_, std::move(z), std::move(sets), std::move(tr));
  }

  std::string name() const override { return "cox-ph"; }
  std::vector<std::string> theta_names() const override {
    if (d_ > 0) return {"log_sigma"};
    return {};
  }
  std::vector<std::string> theta_natural_names() const override {
    if (d_ > 0) return {"sigma"};
    return {};
  }

  LikValue log_lik(const VectorXd& eta, const VectorXd&) const override {
    const int n = static_cast<int>(eta.size());
    VectorXd suffix = suffix_logsumexp(eta);
    double ll = 0.0;
    for (int j = 0; j < n; ++j) {
      if (observed_[j]) ll += eta[j] - suffix[j];
    }
    return {ll, false};
  }

  VectorXd log_lik_grad(const VectorXd& eta, const VectorXd&) const override {
    const int n = static_cast<int>(eta.size());
    VectorXd suffix = suffix_logsumexp(eta);
    // a_l = sum_{i <= l observed} exp(-S_i), relative to the global max so
    // individual terms stay bounded.
    double c = eta.maxCoeff();
    VectorXd g(n);
    double acc = 0.0;
    for (int l = 0; l < n; ++l) {
      if (observed_[l]) acc += std::exp(-(suffix[l] - c));
      g[l] = observed_[l] - std::exp(eta[l] - c) * acc;
    }
    return g;
  }

  SpMat neg_log_lik_hessian(const VectorXd& eta, const VectorXd&) const override {
    const int n = static_cast<int>(eta.size());
    VectorXd suffix = suffix_logsumexp(eta);
    double c = eta.maxCoeff();
    VectorXd a(n), b(n);  // running sums of exp(-S_i) and exp(-2 S_i)
    double a_acc = 0.0, b_acc = 0.0;
    for (int i = 0; i < n; ++i) {
      if (observed_[i]) {
        double e = std::exp(-(suffix[i] - c));
        a_acc += e;
        b_acc += e * e;
      }
      a[i] = a_acc;
      b[i] = b_acc;
    }
    VectorXd r = (eta.array() - c).exp();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * n);
    for (int l = 0; l < n; ++l) {
      for (int mcol = 0; mcol < n; ++mcol) {
        double v = -r[l] * r[mcol] * b[std::min(l, mcol)];
        if (mcol == l) v += r[l] * a[l];
        trip.emplace_back(l, mcol, v);  // every entry kept; the matrix is dense
      }
    }
    SpMat cm(n, n);
    cm.setFromTriplets(trip.begin(), trip.end());
    return cm;
  }

  SpMat prior_precision(const VectorXd& theta_nat) const override {
    const int m = latent_dim();
    SpMat q(m, m);
    if (m == 0) return q;
    q.reserve(Eigen::VectorXi::Constant(m, 1));
    if (d_ > 0) {
      double tau = 1.0 / (theta_nat[0] * theta_nat[0]);
      for (int j = 0; j < d_; ++j) q.insert(j, j) = tau;
    }
    for (int j = 0; j < p_; ++j) q.insert(d_ + j, d_ + j) = kBetaPrecision;
    return q;
  }

  double log_prior(const VectorXd& theta_nat) const override {
    return d_ > 0 ? log_exp_prior(theta_nat[0]) : 0.0;
  }

 private:
  static VectorXd suffix_logsumexp(const VectorXd& eta) {
    const int n = static_cast<int>(eta.size());
    VectorXd s(n);
    s[n - 1] = eta[n - 1];
    for (int i = n - 2; i >= 0; --i) {
      double hi = std::max(eta[i], s[i + 1]);
      s[i] = hi + std::log(std::exp(eta[i] - hi) + std::exp(s[i + 1] - hi));
    }
    return s;
  }

  std::vector<int> observed_;
  int n_events_ = 0;
  int d_ = 0, p_ = 0;
};

class PoissonAggregate final : public ElgmModel {
 public:
  PoissonAggregate(Eigen::VectorXi y, std::vector<std::vector<int>> cells,
                   std::vector<std::vector<double>> cell_pops, int n_cells,
                   MatrixXd x_cells)
      : y_(std::move(y)), cells_(std::move(cells)), pops_(std::move(cell_pops)) {
    const int r = static_cast<int>(y_.size());
    const int t = n_cells;
    const int p = static_cast<int>(x_cells.cols());
    if (r < 1 || static_cast<int>(cells_.size()) != r ||
        static_cast<int>(pops_.size()) != r || t < 1 ||
        (p > 0 && x_cells.rows() != t)) {
      throw Error(ErrorCode::InvalidArgument, "poisson_aggregate: inconsistent inputs");
    }
    for (int i = 0; i < r; ++i) {
      if (cells_[i].size() != pops_[i].size() || cells_[i].empty()) {
        throw Error(ErrorCode::InvalidArgument,
                    "poisson_aggregate: region " + std::to_string(i) +
                        " has a malformed cell list");
      }
      if (y_[i] < 0) {
        throw Error(ErrorCode::InvalidArgument, "poisson_aggregate: negative count");
      }
    }
    p_ = p;
    t_ = t;
    SpMat z(t, t + p);
    std::vector<Eigen::Triplet<double>> trip;
    for (int c = 0; c < t; ++c) {
      trip.emplace_back(c, c, 1.0);
      for (int j = 0; j < p; ++j) {
        if (x_cells(c, j) != 0.0) trip.emplace_back(c, t + j, x_cells(c, j));
      }
    }
    z.setFromTriplets(trip.begin(), trip.end());
    init_structure(r, std::move(z), cells_, ParameterTransform({CoordMap::Log}));
  }

  std::string name() const override { return "poisson-aggregate"; }
  std::vector<std::string> theta_names() const override { return {"log_sigma"}; }
  std::vector<std::string> theta_natural_names() const override { return {"sigma"}; }

  LikValue log_lik(const VectorXd& eta, const VectorXd&) const override {
    double ll = 0.0;
    for (size_t i = 0; i < cells_.size(); ++i) {
      double mu = region_rate(i, eta);
      if (!(mu > 0.0) || !std::isfinite(mu)) return {kNegInf, true};
      ll += y_[i] * std::log(mu) - mu - std::lgamma(y_[i] + 1.0);
    }
    return {ll, false};
  }

  VectorXd log_lik_grad(const VectorXd& eta, const VectorXd&) const override {
    VectorXd g = VectorXd::Zero(eta.size());
    for (size_t i = 0; i < cells_.size(); ++i) {
      double mu = region_rate(i, eta);
      double f = y_[i] / mu - 1.0;
      for (size_t c = 0; c < cells_[i].size(); ++c) {
        int tcell = cells_[i][c];
        g[tcell] += f * pops_[i][c] * std::exp(eta[tcell]);
      }
    }
    return g;
  }

  SpMat neg_log_lik_hessian(const VectorXd& eta, const VectorXd&) const override {
    std::vector<Eigen::Triplet<double>> trip;
    for (size_t i = 0; i < cells_.size(); ++i) {
      double mu = region_rate(i, eta);
      double f = y_[i] / mu - 1.0;
      const auto& jc = cells_[i];
      for (size_t a = 0; a < jc.size(); ++a) {
        double va = pops_[i][a] * std::exp(eta[jc[a]]);
        for (size_t b = 0; b < jc.size(); ++b) {
          double vb = pops_[i][b] * std::exp(eta[jc[b]]);
          double v = y_[i] * va * vb / (mu * mu);
          if (a == b) v -= f * va;
          trip.emplace_back(jc[a], jc[b], v);
        }
      }
    }
    SpMat c(eta.size(), eta.size());
    c.setFromTriplets(trip.begin(), trip.end());
    return c;
  }

  SpMat prior_precision(const VectorXd& theta_nat) const override {
    const int m = latent_dim();
    SpMat q(m, m);
    q.reserve(Eigen::VectorXi::Constant(m, 1));
    double tau = 1.0 / (theta_nat[0] * theta_nat[0]);
    for (int j = 0; j < t_; ++j) q.insert(j, j) = tau;
    for (int j = 0; j < p_; ++j) q.insert(t_ + j, t_ + j) = kBetaPrecision;
    return q;
  }

  double log_prior(const VectorXd& theta_nat) const override {
    return log_exp_prior(theta_nat[0]);
  }

 private:
  double region_rate(size_t i, const VectorXd& eta) const {
    double mu = 0.0;
    for (size_t c = 0; c < cells_[i].size(); ++c) {
      mu += pops_[i][c] * std::exp(eta[cells_[i][c]]);
    }
    return mu;
  }

  Eigen::VectorXi y_;
  std::vector<std::vector<int>> cells_;
  std::vector<std::vector<double>> pops_;
  int t_ = 0, p_ = 0;
};

// Unconstrained theta is log-variance with a N(0,1) prior; the natural scale
// reports the variance e^theta, so the prior on it is lognormal(0,1).
class GaussianScale final : public ElgmModel {
 public:
  explicit GaussianScale(VectorXd y) : y_(std::move(y)) {
    if (y_.size() < 1) {
      throw Error(ErrorCode::InvalidArgument, "gaussian_scale: needs observations");
    }
    CompensatedSum ss;
    for (int i = 0; i < y_.size(); ++i) ss.add(y_[i] * y_[i]);
    sum_sq_ = ss.value();
    SpMat z(1, 0);
    std::vector<std::vector<int>> sets(y_.size(), std::vector<int>{0});
    init_structure(static_cast<int>(y_.size()), std::move(z), std::move(sets),
                   ParameterTransform({CoordMap::Log}));
  }

  std::string name() const override { return "gaussian-scale"; }
  std::vector<std::string> theta_names() const override { return {"theta"}; }
  std::vector<std::string> theta_natural_names() const override { return {"variance"}; }

  LikValue log_lik(const VectorXd&, const VectorXd& theta_nat) const override {
    const double v = theta_nat[0];
    const double n = static_cast<double>(y_.size());
    double ll = -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * n * std::log(v) -
                0.5 * sum_sq_ / v;
    return {ll, false};
  }

  VectorXd log_lik_grad(const VectorXd& eta, const VectorXd&) const override {
    return VectorXd::Zero(eta.size());
  }

  SpMat neg_log_lik_hessian(const VectorXd& eta, const VectorXd&) const override {
    return SpMat(eta.size(), eta.size());
  }

  SpMat prior_precision(const VectorXd&) const override { return SpMat(0, 0); }

  double log_prior(const VectorXd& theta_nat) const override {
    const double t = std::log(theta_nat[0]);
    return -0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * t * t - t;
  }

 private:
  VectorXd y_;
  double sum_sq_ = 0.0;
};

}  // namespace

std::unique_ptr<ElgmModel> conjugate_gaussian(const VectorXd& y) {
  return std::make_unique<ConjugateGaussian>(y);
}

std::unique_ptr<ElgmModel> bernoulli_glmm(const Eigen::VectorXi& y, const MatrixXd& x,
                                          const std::vector<int>& g1, int d1,
                                          const std::vector<int>& g2, int d2) {
  return std::make_unique<BernoulliGlmm>(y, x, g1, d1, g2, d2);
}

std::unique_ptr<ElgmModel> cox_ph_partial(const VectorXd& time,
                                          const std::vector<int>& censored,
                                          const MatrixXd& x,
                                          const std::optional<std::vector<int>>& group,
                                          int n_groups) {
  return std::make_unique<CoxPhPartial>(time, censored, x, group, n_groups);
}

std::unique_ptr<ElgmModel> poisson_aggregate(
    const Eigen::VectorXi& y, const std::vector<std::vector<int>>& cells,
    const std::vector<std::vector<double>>& cell_pops, int n_cells,
    const MatrixXd& x_cells) {
  return std::make_unique<PoissonAggregate>(y, cells, cell_pops, n_cells, x_cells);
}

std::unique_ptr<ElgmModel> gaussian_scale(const VectorXd& y) {
  return std::make_unique<GaussianScale>(y);
}

}  // namespace elgm::model
