#include "model_core.hpp"

#include <cmath>
#include <numbers>
#include <set>

#include "error.hpp"

namespace elgm::model {

VectorXd ParameterTransform::to_natural(const VectorXd& u) const {
  VectorXd out(u.size());
  for (int j = 0; j < u.size(); ++j) {
    out[j] = (maps_[j] == CoordMap::Log) ? std::exp(u[j]) : u[j];
  }
  return out;
}

VectorXd ParameterTransform::to_unconstrained(const VectorXd& natural) const {
  VectorXd out(natural.size());
  for (int j = 0; j < natural.size(); ++j) {
    if (maps_[j] == CoordMap::Log) {
      if (!(natural[j] > 0.0)) {
        throw Error(ErrorCode::Domain,
                    "transform: coordinate " + std::to_string(j) +
                        " must be positive on the natural scale");
      }
      out[j] = std::log(natural[j]);
    } else {
      out[j] = natural[j];
    }
  }
  return out;
}

double ParameterTransform::log_jacobian(const VectorXd& u) const {
  double lj = 0.0;
  for (int j = 0; j < u.size(); ++j) {
    if (maps_[j] == CoordMap::Log) lj += u[j];  // d exp(u)/du = exp(u)
  }
  return lj;
}

std::vector<std::string> ElgmModel::theta_names() const {
  std::vector<std::string> names;
  for (int j = 0; j < hyper_dim(); ++j) names.push_back("theta" + std::to_string(j));
  return names;
}

std::vector<std::string> ElgmModel::theta_natural_names() const {
  return theta_names();
}

double ElgmModel::log_prior(const VectorXd&) const { return 0.0; }

std::vector<std::pair<int, int>> ElgmModel::prior_pattern() const {
  // Default: pattern of Q evaluated at the transform of zeros.
  VectorXd theta_nat = transform_.to_natural(VectorXd::Zero(hyper_dim()));
  SpMat q = prior_precision(theta_nat);
  std::vector<std::pair<int, int>> pat;
  for (int k = 0; k < q.outerSize(); ++k) {
    for (SpMat::InnerIterator it(q, k); it; ++it) {
      if (it.row() <= it.col()) pat.emplace_back(it.row(), it.col());
    }
  }
  return pat;
}

void ElgmModel::init_structure(int n_obs, SpMat design,
                               std::vector<std::vector<int>> index_sets,
                               ParameterTransform transform) {
  n_obs_ = n_obs;
  design_ = std::move(design);
  design_.makeCompressed();
  index_sets_ = std::move(index_sets);
  transform_ = std::move(transform);

  const int nn = pred_dim();
  std::vector<bool> covered(nn, false);
  for (const auto& ji : index_sets_) {
    if (ji.empty() || static_cast<int>(ji.size()) > nn) {
      throw Error(ErrorCode::InvalidArgument,
                  "model: every index set must satisfy 1 <= |J_i| <= N_n");
    }
    for (int j : ji) {
      if (j < 0 || j >= nn) {
        throw Error(ErrorCode::InvalidArgument, "model: index set entry out of range");
      }
      covered[j] = true;
    }
  }
  for (int j = 0; j < nn; ++j) {
    if (!covered[j]) {
      throw Error(ErrorCode::InvalidArgument,
                  "model: predictor " + std::to_string(j) + " is in no index set");
    }
  }

  // Decide Hessian storage from the predicted structural fill.
  const int m = latent_dim();
  if (m > 0) {
    auto pattern = predicted_hessian_pattern(*this);
    int64_t nnz = 0;
    for (const auto& [a, b] : pattern) nnz += (a == b) ? 1 : 2;
    hessian_dense_ = nnz > 0.25 * static_cast<double>(m) * m;
  }
}

JointDensity log_joint(const ElgmModel& model, const VectorXd& w,
                       const VectorXd& theta_u) {
  if (w.size() != model.latent_dim() || theta_u.size() != model.hyper_dim()) {
    throw Error(ErrorCode::InvalidArgument, "log_joint: dimension mismatch");
  }
  for (int i = 0; i < w.size(); ++i) {
    if (!std::isfinite(w[i])) {
      throw Error(ErrorCode::InvalidArgument, "log_joint: w must be finite");
    }
  }
  const VectorXd theta_nat = model.transform().to_natural(theta_u);
  LatentState state(model, w);
  LikValue lik = model.log_lik(state.eta, theta_nat);
  if (lik.domain_violation || !std::isfinite(lik.value)) {
    return JointDensity{kNegInf, true};
  }

  const int m = model.latent_dim();
  double quad = 0.0;
  double log_det_q = 0.0;
  if (m > 0) {
    SpMat q = model.prior_precision(theta_nat);
    quad = w.dot(q * w);
    log_det_q = num::cholesky(num::SymMatrix::sparse(q)).log_det();
  }
  double value = lik.value - 0.5 * quad + 0.5 * log_det_q -
                 0.5 * m * std::log(2.0 * std::numbers::pi) +
                 model.log_prior(theta_nat) + model.transform().log_jacobian(theta_u);
  return JointDensity{value, false};
}

VectorXd grad_w_log_joint(const ElgmModel& model, const VectorXd& w,
                          const VectorXd& theta_u) {
  const VectorXd theta_nat = model.transform().to_natural(theta_u);
  LatentState state(model, w);
  VectorXd g_eta = model.log_lik_grad(state.eta, theta_nat);
  SpMat q = model.prior_precision(theta_nat);
  return model.design().transpose() * g_eta - q * w;
}

num::SymMatrix hessian_w(const ElgmModel& model, const VectorXd& w,
                         const VectorXd& theta_u) {
  const VectorXd theta_nat = model.transform().to_natural(theta_u);
  LatentState state(model, w);
  SpMat c_eta = model.neg_log_lik_hessian(state.eta, theta_nat);
  SpMat q = model.prior_precision(theta_nat);
  SpMat h = q + SpMat(model.design().transpose() * c_eta * model.design());
  h.prune(0.0, 0.0);
  if (model.hessian_is_dense()) return num::SymMatrix::dense(MatrixXd(h));
  return num::SymMatrix::sparse(std::move(h));
}

std::vector<std::pair<int, int>> predicted_hessian_pattern(const ElgmModel& model) {
  std::set<std::pair<int, int>> pat;
  for (auto& pq : model.prior_pattern()) {
    pat.insert({std::min(pq.first, pq.second), std::max(pq.first, pq.second)});
  }

  // Latent coordinates touched by each predictor row of Z.
  const SpMat& z = model.design();
  std::vector<std::vector<int>> row_support(z.rows());
  for (int col = 0; col < z.outerSize(); ++col) {
    for (SpMat::InnerIterator it(z, col); it; ++it) {
      row_support[it.row()].push_back(static_cast<int>(it.col()));
    }
  }

  // C_eta couples predictors k,l only when both sit in some J_i, so H couples
  // the union of their Z supports.
  for (const auto& ji : model.index_sets()) {
    std::vector<int> support;
    for (int j : ji) {
      support.insert(support.end(), row_support[j].begin(), row_support[j].end());
    }
    std::sort(support.begin(), support.end());
    support.erase(std::unique(support.begin(), support.end()), support.end());
    for (size_t a = 0; a < support.size(); ++a) {
      for (size_t b = a; b < support.size(); ++b) {
        pat.insert({support[a], support[b]});
      }
    }
  }
  return std::vector<std::pair<int, int>>(pat.begin(), pat.end());
}

}  // namespace elgm::model
