#include "numkernels.hpp"

#include <Eigen/SparseCholesky>
#include <cmath>

#include "error.hpp"

namespace elgm::num {

SymMatrix SymMatrix::dense(MatrixXd a) {
  SymMatrix m;
  m.is_dense_ = true;
  m.dense_ = std::move(a);
  return m;
}

SymMatrix SymMatrix::sparse(SpMat a) {
  SymMatrix m;
  m.is_dense_ = false;
  a.makeCompressed();
  m.sparse_ = std::move(a);
  return m;
}

int SymMatrix::rows() const {
  return is_dense_ ? static_cast<int>(dense_.rows())
                   : static_cast<int>(sparse_.rows());
}

double SymMatrix::diag_mean() const {
  int n = rows();
  if (n == 0) return 0.0;
  double s = 0.0;
  if (is_dense_) {
    s = dense_.diagonal().sum();
  } else {
    for (int i = 0; i < n; ++i) s += sparse_.coeff(i, i);
  }
  return s / n;
}

double SymMatrix::max_abs() const {
  if (rows() == 0) return 0.0;
  if (is_dense_) return dense_.cwiseAbs().maxCoeff();
  double m = 0.0;
  for (int k = 0; k < sparse_.outerSize(); ++k) {
    for (SpMat::InnerIterator it(sparse_, k); it; ++it) {
      m = std::max(m, std::fabs(it.value()));
    }
  }
  return m;
}

SymMatrix SymMatrix::with_jitter(double tau) const {
  if (is_dense_) {
    MatrixXd a = dense_;
    a.diagonal().array() += tau;
    return dense(std::move(a));
  }
  SpMat a = sparse_;
  SpMat eye(a.rows(), a.cols());
  eye.setIdentity();
  a += tau * eye;
  return sparse(std::move(a));
}

MatrixXd SymMatrix::to_dense() const {
  return is_dense_ ? dense_ : MatrixXd(sparse_);
}

namespace {

// Hand-rolled dense factorization so a failure can report its pivot.
bool dense_cholesky_lower(const MatrixXd& a, MatrixXd& lower, int& bad_pivot) {
  const int n = static_cast<int>(a.rows());
  lower = MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j);
    if (j > 0) d -= lower.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d)) {
      bad_pivot = j;
      return false;
    }
    lower(j, j) = std::sqrt(d);
    if (j + 1 < n) {
      VectorXd col = a.col(j).tail(n - j - 1);
      if (j > 0) {
        col.noalias() -=
            lower.block(j + 1, 0, n - j - 1, j) * lower.row(j).head(j).transpose();
      }
      lower.col(j).tail(n - j - 1) = col / lower(j, j);
    }
  }
  bad_pivot = -1;
  return true;
}

}  // namespace

VectorXd CholeskyFactor::solve(const VectorXd& b) const {
  if (dim_ == 0) return VectorXd(0);
  if (is_dense_) {
    VectorXd y = lower_.triangularView<Eigen::Lower>().solve(b);
    return lower_.triangularView<Eigen::Lower>().transpose().solve(y);
  }
  return sparse_->solve(b);
}

VectorXd CholeskyFactor::sqrt_solve(const VectorXd& eps) const {
  if (dim_ == 0) return VectorXd(0);
  if (is_dense_) {
    return lower_.triangularView<Eigen::Lower>().transpose().solve(eps);
  }
  // P A P^T = L L^T, so x = P^T L^{-T} eps has Cov(x) = A^{-1}.
  VectorXd y = sparse_->matrixU().solve(eps);
  return sparse_->permutationPinv() * y;
}

double CholeskyFactor::quad_form(const VectorXd& v) const {
  if (dim_ == 0) return 0.0;
  if (is_dense_) {
    VectorXd u = lower_.triangularView<Eigen::Lower>().transpose() * v;
    return u.squaredNorm();
  }
  VectorXd pv = sparse_->permutationP() * v;
  VectorXd u = VectorXd(sparse_->matrixU() * pv);
  return u.squaredNorm();
}

MatrixXd CholeskyFactor::inverse_dense() const {
  MatrixXd inv(dim_, dim_);
  VectorXd e = VectorXd::Zero(dim_);
  for (int j = 0; j < dim_; ++j) {
    e[j] = 1.0;
    inv.col(j) = solve(e);
    e[j] = 0.0;
  }
  return 0.5 * (inv + inv.transpose());
}

const MatrixXd& CholeskyFactor::dense_lower() const {
  if (!is_dense_) {
    throw Error(ErrorCode::Internal,
                "CholeskyFactor: dense factor requested from a sparse factorization");
  }
  return lower_;
}

CholeskyFactor cholesky(const SymMatrix& a) {
  CholeskyFactor f;
  f.dim_ = a.rows();
  if (f.dim_ == 0) return f;

  double base = 1e-10 * std::fabs(a.diag_mean());
  if (base == 0.0) base = 1e-10;

  int last_pivot = -1;
  for (int attempt = 0; attempt <= 8; ++attempt) {
    double tau = (attempt == 0) ? 0.0 : base * std::pow(10.0, attempt - 1);
    SymMatrix ja = (attempt == 0) ? a : a.with_jitter(tau);
    if (a.is_dense()) {
      MatrixXd lower;
      int pivot = -1;
      if (dense_cholesky_lower(ja.dense_ref(), lower, pivot)) {
        f.is_dense_ = true;
        f.lower_ = std::move(lower);
        f.jitter_ = tau;
        f.log_det_ = 2.0 * f.lower_.diagonal().array().log().sum();
        return f;
      }
      last_pivot = pivot;
    } else {
      auto llt = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
      llt->compute(ja.sparse_ref());
      if (llt->info() == Eigen::Success) {
        f.is_dense_ = false;
        f.sparse_ = std::move(llt);
        f.jitter_ = tau;
        double ld = 0.0;
        SpMat lfac = f.sparse_->matrixL();
        for (int i = 0; i < f.dim_; ++i) ld += std::log(lfac.coeff(i, i));
        f.log_det_ = 2.0 * ld;
        return f;
      }
      last_pivot = -1;  // SimplicialLLT does not expose the failing pivot
    }
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              "cholesky: matrix is not positive definite after jitter "
              "escalation (failing pivot " +
                  std::to_string(last_pivot) + ")");
}

CholeskyFactor cholesky(const MatrixXd& a) { return cholesky(SymMatrix::dense(a)); }

namespace {

// Dogleg needs a PD model. Jitter escalation inside cholesky() repairs
// near-singular matrices; an indefinite Hessian at a trial point instead
// gets a Levenberg-style diagonal shift until the factorization succeeds.
CholeskyFactor factor_model_hessian(const SymMatrix& h) {
  try {
    return cholesky(h);
  } catch (const Error&) {
  }
  double scale = std::max(1.0, h.max_abs());
  for (int t = 0; t < 48; ++t) {
    try {
      return cholesky(h.with_jitter(scale * std::pow(2.0, t)));
    } catch (const Error&) {
    }
  }
  throw Error(ErrorCode::NotPositiveDefinite,
              "trust_region_minimize: could not build a positive definite model");
}

}  // namespace

TrustRegionResult trust_region_minimize(const TrustRegionObjective& f,
                                        const VectorXd& w0, double tol,
                                        int max_iterations) {
  if (!(tol > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "trust_region_minimize: tol must be > 0");
  }
  TrustRegionResult res;
  const int m = static_cast<int>(w0.size());
  if (m == 0) {
    res.minimizer = w0;
    res.objective = f.value(w0);
    res.converged = true;
    return res;
  }

  VectorXd w = w0;
  double fw = f.value(w);
  if (!std::isfinite(fw)) {
    throw Error(ErrorCode::InvalidStart,
                "trust_region_minimize: objective is not finite at the start point");
  }
  res.objective_trace.push_back(fw);

  double radius = -1.0;  // set from the first Newton step
  VectorXd grad = f.gradient(w);
  CholeskyFactor hess_factor;
  bool have_factor = false;
  int iters_done = 0;

  for (int iter = 0; iter < max_iterations; ++iter, iters_done = iter) {
    double gnorm = grad.lpNorm<Eigen::Infinity>();
    if (gnorm <= tol) {
      // At a converged interior optimum the true Hessian must factor (with
      // at most jitter); a Levenberg shift here would corrupt the curvature
      // callers rely on.
      if (!have_factor) hess_factor = cholesky(f.hessian(w));
      res.minimizer = w;
      res.objective = fw;
      res.gradient_norm = gnorm;
      res.hessian_at_opt = std::move(hess_factor);
      res.iterations = iter;
      res.converged = true;
      return res;
    }

    hess_factor = factor_model_hessian(f.hessian(w));
    have_factor = true;
    VectorXd newton = hess_factor.solve(-grad);
    double newton_norm = newton.norm();
    if (radius < 0.0) radius = std::max(1.0, newton_norm);

    // Dogleg step restricted to the trust radius.
    VectorXd step;
    if (newton_norm <= radius) {
      step = newton;
    } else {
      double g2 = grad.squaredNorm();
      double ghg = hess_factor.quad_form(grad);
      VectorXd cauchy = -(g2 / ghg) * grad;
      double cnorm = cauchy.norm();
      if (cnorm >= radius) {
        step = -(radius / grad.norm()) * grad;
      } else {
        // Intersection of the dogleg segment with the radius.
        VectorXd d = newton - cauchy;
        double a = d.squaredNorm();
        if (a <= 0.0) {
          step = cauchy;
        } else {
          double b = 2.0 * cauchy.dot(d);
          double c = cnorm * cnorm - radius * radius;
          double t = (-b + std::sqrt(std::max(0.0, b * b - 4.0 * a * c))) / (2.0 * a);
          step = cauchy + t * d;
        }
      }
    }

    double predicted = -(grad.dot(step) + 0.5 * hess_factor.quad_form(step));
    VectorXd w_try = w + step;
    double f_try = f.value(w_try);
    double actual = fw - f_try;

    // Stiff problems can put the gradient tolerance below the objective's
    // roundoff floor (the noise of an n-term log-likelihood sum easily tops
    // eps*|f|). Once the model predicts less change than that floor, the
    // ratio test is meaningless: take the step iff it shrinks the gradient,
    // and stop when even that stalls.
    const double noise =
        1024.0 * std::numeric_limits<double>::epsilon() * (std::fabs(fw) + 1.0);
    if (std::isfinite(f_try) && predicted <= noise) {
      VectorXd g_try = f.gradient(w_try);
      if (g_try.lpNorm<Eigen::Infinity>() < grad.lpNorm<Eigen::Infinity>()) {
        w = w_try;
        fw = std::min(fw, f_try);
        grad = std::move(g_try);
        have_factor = false;
        continue;
      }
      break;  // no objective or gradient progress is representable
    }

    double ratio = std::isfinite(f_try) && predicted > 0.0 ? actual / predicted : -1.0;
    if (std::isfinite(f_try) && actual > 0.0) {
      w = w_try;
      fw = f_try;
      grad = f.gradient(w);
      have_factor = false;
      res.objective_trace.push_back(fw);
    }
    if (ratio > 0.75 && step.norm() >= 0.99 * radius) {
      radius *= 2.0;
    } else if (ratio < 0.25) {
      radius = std::max(0.25 * step.norm(), 1e-12);
    }
  }

  if (!have_factor) hess_factor = factor_model_hessian(f.hessian(w));
  res.minimizer = w;
  res.objective = fw;
  res.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  res.hessian_at_opt = std::move(hess_factor);
  res.iterations = iters_done;
  res.converged = false;
  return res;
}

namespace {

double checked_eval(const std::function<double(const VectorXd&)>& f,
                    const VectorXd& x) {
  double v = f(x);
  if (!std::isfinite(v)) {
    std::string pt = "(";
    for (int i = 0; i < x.size(); ++i) {
      pt += std::to_string(x[i]);
      if (i + 1 < x.size()) pt += ", ";
    }
    pt += ")";
    throw Error(ErrorCode::Domain,
                "finite differences: objective is not finite at stencil point " + pt);
  }
  return v;
}

}  // namespace

VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                     const VectorXd& x) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon());
  const int s = static_cast<int>(x.size());
  VectorXd g(s);
  VectorXd xp = x;
  for (int j = 0; j < s; ++j) {
    double h = h0 * std::max(1.0, std::fabs(x[j]));
    xp[j] = x[j] + h;
    double fp = checked_eval(f, xp);
    xp[j] = x[j] - h;
    double fm = checked_eval(f, xp);
    xp[j] = x[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

MatrixXd fd_hessian(const std::function<double(const VectorXd&)>& f,
                    const VectorXd& x) {
  const double h0 = std::pow(std::numeric_limits<double>::epsilon(), 0.25);
  const int s = static_cast<int>(x.size());
  MatrixXd hess(s, s);
  VectorXd h(s);
  for (int j = 0; j < s; ++j) h[j] = h0 * std::max(1.0, std::fabs(x[j]));

  double f0 = checked_eval(f, x);
  VectorXd xp = x;
  for (int j = 0; j < s; ++j) {
    xp[j] = x[j] + h[j];
    double fp = checked_eval(f, xp);
    xp[j] = x[j] - h[j];
    double fm = checked_eval(f, xp);
    xp[j] = x[j];
    hess(j, j) = (fp - 2.0 * f0 + fm) / (h[j] * h[j]);
  }
  for (int j = 0; j < s; ++j) {
    for (int l = j + 1; l < s; ++l) {
      xp[j] = x[j] + h[j];
      xp[l] = x[l] + h[l];
      double fpp = checked_eval(f, xp);
      xp[l] = x[l] - h[l];
      double fpm = checked_eval(f, xp);
      xp[j] = x[j] - h[j];
      double fmm = checked_eval(f, xp);
      xp[l] = x[l] + h[l];
      double fmp = checked_eval(f, xp);
      xp[j] = x[j];
      xp[l] = x[l];
      hess(j, l) = (fpp - fpm - fmp + fmm) / (4.0 * h[j] * h[l]);
      hess(l, j) = hess(j, l);
    }
  }
  return 0.5 * (hess + hess.transpose());
}

}  // namespace elgm::num
