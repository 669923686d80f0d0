#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <functional>
#include <memory>

#include "util.hpp"

namespace elgm::num {

using SpMat = Eigen::SparseMatrix<double>;

// Symmetric matrix that is either dense or sparse. Model Hessians pick their
// storage from the declared sparsity structure (fill fraction > 25% => dense).
class SymMatrix {
 public:
  SymMatrix() = default;
  static SymMatrix dense(MatrixXd a);
  static SymMatrix sparse(SpMat a);

  bool is_dense() const { return is_dense_; }
  int rows() const;
  double diag_mean() const;
  double max_abs() const;
  SymMatrix with_jitter(double tau) const;
  MatrixXd to_dense() const;
  const SpMat& sparse_ref() const { return sparse_; }
  const MatrixXd& dense_ref() const { return dense_; }

 private:
  bool is_dense_ = true;
  MatrixXd dense_;
  SpMat sparse_;
};

// Lower-triangular factor L with L L^T = A + jitter*I. Sparse factorizations
// carry a fill-reducing permutation P (P A P^T = L L^T); all the accessors
// below account for it.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;

  int dim() const { return dim_; }
  double log_det() const { return log_det_; }  // log|A + jitter*I|
  double jitter_applied() const { return jitter_; }

  VectorXd solve(const VectorXd& b) const;       // (A + jitter I)^{-1} b
  VectorXd sqrt_solve(const VectorXd& eps) const;  // x with Cov(x) = A^{-1}
  double quad_form(const VectorXd& v) const;     // v^T (A + jitter I) v
  MatrixXd inverse_dense() const;                // symmetric (A+jitter I)^{-1}
  // Lower factor as a dense matrix (dense factorizations only).
  const MatrixXd& dense_lower() const;

 private:
  friend CholeskyFactor cholesky(const SymMatrix& a);
  int dim_ = 0;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
  bool is_dense_ = true;
  MatrixXd lower_;  // dense path
  std::shared_ptr<Eigen::SimplicialLLT<SpMat>> sparse_;  // sparse path
};

// Factorize a symmetric matrix, retrying with escalating diagonal jitter
// tau = 1e-10 * mean(diag A) * 10^t for t = 0..7 when the plain factorization
// fails. Throws NotPositiveDefinite (with the failing pivot index when the
// dense path is used) once the escalation is exhausted.
CholeskyFactor cholesky(const SymMatrix& a);
CholeskyFactor cholesky(const MatrixXd& a);

struct TrustRegionResult {
  VectorXd minimizer;
  double objective = 0.0;
  double gradient_norm = 0.0;  // inf-norm at the minimizer
  CholeskyFactor hessian_at_opt;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // objective at each accepted iterate
};

struct TrustRegionObjective {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> gradient;
  std::function<SymMatrix(const VectorXd&)> hessian;
};

// Newton trust-region minimization with a dogleg step. Newton directions are
// solved through cholesky() (so indefiniteness falls back to jitter), the
// radius doubles after a full step with ratio > 0.75 and shrinks by 4 on
// ratio < 0.25, and iteration stops at gradient inf-norm <= tol or 200
// iterations.
TrustRegionResult trust_region_minimize(const TrustRegionObjective& f,
                                        const VectorXd& w0, double tol,
                                        int max_iterations = 200);

// Central-difference gradient, h_j = cbrt(eps) * max(1, |x_j|).
VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                     const VectorXd& x);

// Central second differences, h_j = eps^{1/4} * max(1, |x_j|); the result is
// symmetrized as (H + H^T)/2.
MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f,
                    const VectorXd& x);

}  // namespace elgm::num
