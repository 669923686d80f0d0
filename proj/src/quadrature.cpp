#include "quadrature.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "error.hpp"

namespace elgm::quad {

namespace {

double std_normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

UnivariateRule gauss_hermite_rule(int k) {
  if (k < 1 || k > kMaxUnivariateOrder) {
    throw Error(ErrorCode::InvalidOrder,
                "gauss_hermite_rule: order must be in [1, " +
                    std::to_string(kMaxUnivariateOrder) + "], got " +
                    std::to_string(k));
  }
  UnivariateRule rule;
  rule.order = k;
  if (k == 1) {
    rule.nodes = VectorXd::Zero(1);
    rule.weights = VectorXd::Constant(1, std::sqrt(2.0 * std::numbers::pi));
    return rule;
  }

  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite
  // recurrence: zero diagonal, off-diagonal sqrt(j).
  VectorXd diag = VectorXd::Zero(k);
  VectorXd sub(k - 1);
  for (int j = 1; j < k; ++j) sub[j - 1] = std::sqrt(static_cast<double>(j));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es;
  es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::Internal, "gauss_hermite_rule: eigensolver failed");
  }

  VectorXd nodes = es.eigenvalues();  // ascending
  VectorXd wnorm(k);                  // normalized weights, sum == 1
  for (int j = 0; j < k; ++j) {
    double v = es.eigenvectors()(0, j);
    wnorm[j] = v * v;
  }

  // Symmetrize node/weight pairs about 0 to kill asymmetric rounding; the
  // middle node of an odd rule is exactly 0.
  for (int j = 0; j < k / 2; ++j) {
    int r = k - 1 - j;
    double a = 0.5 * (nodes[r] - nodes[j]);
    nodes[j] = -a;
    nodes[r] = a;
    double w = 0.5 * (wnorm[j] + wnorm[r]);
    wnorm[j] = w;
    wnorm[r] = w;
  }
  if (k % 2 == 1) nodes[k / 2] = 0.0;

  rule.nodes = nodes;
  rule.weights.resize(k);
  for (int j = 0; j < k; ++j) rule.weights[j] = wnorm[j] / std_normal_pdf(nodes[j]);
  return rule;
}

ProductRule product_rule(int s, int k) {
  if (s < 0) {
    throw Error(ErrorCode::InvalidArgument, "product_rule: dimension must be >= 0");
  }
  ProductRule rule;
  rule.dim = s;
  rule.order = k;
  if (s == 0) {
    rule.points.resize(1, 0);
    rule.weights = VectorXd::Constant(1, 1.0);
    return rule;
  }

  UnivariateRule base = gauss_hermite_rule(k);
  double count = std::pow(static_cast<double>(k), s);
  if (count > static_cast<double>(kMaxProductPoints)) {
    throw Error(ErrorCode::Capacity,
                "product_rule: k^s = " + std::to_string(count) +
                    " exceeds the grid cap of " +
                    std::to_string(kMaxProductPoints) +
                    "; reduce k (sparse rules are out of scope)");
  }
  int64_t total = static_cast<int64_t>(std::llround(count));
  rule.points.resize(total, s);
  rule.weights.resize(total);

  std::vector<int> ix(s, 0);  // odometer, last dimension fastest
  for (int64_t p = 0; p < total; ++p) {
    double w = 1.0;
    for (int d = 0; d < s; ++d) {
      rule.points(p, d) = base.nodes[ix[d]];
      w *= base.weights[ix[d]];
    }
    rule.weights[p] = w;
    for (int d = s - 1; d >= 0; --d) {
      if (++ix[d] < k) break;
      ix[d] = 0;
    }
  }
  return rule;
}

AdaptedPoints adapt(const ProductRule& rule, const VectorXd& center,
                    const MatrixXd& cholesky) {
  const int s = rule.dim;
  if (center.size() != s || cholesky.rows() != s || cholesky.cols() != s) {
    throw Error(ErrorCode::InvalidArgument,
                "adapt: center/cholesky dimensions do not match the rule");
  }
  double log_det = 0.0;
  for (int d = 0; d < s; ++d) {
    if (!(cholesky(d, d) > 0.0)) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "adapt: cholesky factor has a non-positive diagonal at index " +
                      std::to_string(d));
    }
    log_det += std::log(cholesky(d, d));
  }
  AdaptedPoints out;
  out.log_det_cholesky = log_det;
  out.weights = rule.weights * std::exp(log_det);
  out.points.resize(rule.points.rows(), s);
  for (int64_t p = 0; p < rule.points.rows(); ++p) {
    VectorXd z = rule.points.row(p).transpose();
    out.points.row(p) =
        (cholesky.triangularView<Eigen::Lower>() * z + center).transpose();
  }
  return out;
}

VectorXd normalize_lambda(const VectorXd& log_values,
                          const VectorXd& raw_weights, double log_det_cholesky) {
  if (log_values.size() != raw_weights.size() || log_values.size() == 0) {
    throw Error(ErrorCode::InvalidArgument,
                "normalize_lambda: mismatched or empty inputs");
  }
  VectorXd t(log_values.size());
  for (int i = 0; i < t.size(); ++i) {
    t[i] = log_values[i] + std::log(raw_weights[i]) + log_det_cholesky;
  }
  double lse = log_sum_exp(t);
  if (!std::isfinite(lse)) {
    throw Error(ErrorCode::DegeneratePosterior,
                "normalize_lambda: every node has zero posterior mass");
  }
  VectorXd lambda(t.size());
  for (int i = 0; i < t.size(); ++i) {
    lambda[i] = std::isfinite(t[i]) ? std::exp(t[i] - lse) : 0.0;
  }
  return lambda;
}

}  // namespace elgm::quad
