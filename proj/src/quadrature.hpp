#pragma once

#include <Eigen/Core>

#include "util.hpp"

namespace elgm::quad {

// Gauss-Hermite rules in the probabilists' convention, reweighted so that
//   sum_j f(z_j) * weights[j]  ~=  integral f(z) dz
// is exact whenever f(z) = p(z) * phi(z) with deg(p) <= 2k-1 and phi the
// standard normal density. Equivalently weights[j] = w_j / phi(z_j) where
// w_j are the classical normalized weights (sum_j w_j == 1).
struct UnivariateRule {
  int order = 0;
  VectorXd nodes;    // ascending, symmetric about 0
  VectorXd weights;  // positive
};

// Cap chosen where the tridiagonal eigendecomposition is still well behaved.
inline constexpr int kMaxUnivariateOrder = 199;
inline constexpr int64_t kMaxProductPoints = 1000000;

UnivariateRule gauss_hermite_rule(int k);

// Tensor product of the univariate rule over s dimensions. Points are listed
// in lexicographic order of node indices (last dimension fastest); the weight
// of a point is the product of the univariate weights. s == 0 gives a single
// empty point with weight 1 so hyperparameter-free models flow through the
// same pipeline.
struct ProductRule {
  int dim = 0;
  int order = 0;
  MatrixXd points;   // (order^dim) x dim
  VectorXd weights;  // order^dim
};

ProductRule product_rule(int s, int k);

// Rule translated to `center` and scaled by a lower-triangular Cholesky
// factor: point -> L z + center, weight -> |L| w(z).
struct AdaptedPoints {
  MatrixXd points;
  VectorXd weights;
  double log_det_cholesky = 0.0;
};

AdaptedPoints adapt(const ProductRule& rule, const VectorXd& center,
                    const MatrixXd& cholesky);

// Mixture weights lambda(z) proportional to exp(log_value) * w(z) * |L|,
// normalized with log-sum-exp. Nodes with log_value == -inf get lambda == 0.
VectorXd normalize_lambda(const VectorXd& log_values,
                          const VectorXd& raw_weights, double log_det_cholesky);

// Quadrature rule adapted to a mode and curvature, with the evaluated
// objective and the resulting mixture weights.
struct AdaptedGrid {
  VectorXd center;       // s
  MatrixXd cholesky;     // s x s lower triangular, L L^T = H^{-1}
  int order = 0;         // k
  MatrixXd nodes;        // k^s x s, L z + center
  VectorXd raw_weights;  // w_k(z)
  VectorXd log_values;   // log of the unnormalized objective at each node
  VectorXd lambda;       // normalized mixture weights, sum == 1
  double log_det_cholesky = 0.0;
};

}  // namespace elgm::quad
