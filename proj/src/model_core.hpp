#pragma once

#include <Eigen/SparseCore>
#include <memory>
#include <string>
#include <vector>

#include "numkernels.hpp"
#include "util.hpp"

namespace elgm::model {

using num::SpMat;

// Per-coordinate bijection between the natural and unconstrained
// hyperparameter scales. All built-in models use identity or log (standard
// deviations live on the log scale).
enum class CoordMap { Identity, Log };

class ParameterTransform {
 public:
  ParameterTransform() = default;
  explicit ParameterTransform(std::vector<CoordMap> maps) : maps_(std::move(maps)) {}

  int dim() const { return static_cast<int>(maps_.size()); }
  VectorXd to_natural(const VectorXd& u) const;
  VectorXd to_unconstrained(const VectorXd& natural) const;
  // log |d natural / d unconstrained| at the unconstrained point
  double log_jacobian(const VectorXd& u) const;
  CoordMap map(int j) const { return maps_[j]; }

 private:
  std::vector<CoordMap> maps_;
};

struct LikValue {
  double value = 0.0;
  bool domain_violation = false;  // likelihood evaluated outside its domain
};

// The model quadruple: likelihood with index sets J_i, design Z, latent
// prior precision Q(theta2), and hyperparameter prior, plus the transform
// between natural and unconstrained theta. The likelihood callbacks take the
// full additive-predictor vector eta = Z w and the natural-scale theta.
class ElgmModel {
 public:
  virtual ~ElgmModel() = default;

  int n_obs() const { return n_obs_; }
  int pred_dim() const { return static_cast<int>(design_.rows()); }  // N_n
  int latent_dim() const { return static_cast<int>(design_.cols()); }  // m
  int hyper_dim() const { return transform_.dim(); }  // s

  const SpMat& design() const { return design_; }
  const std::vector<std::vector<int>>& index_sets() const { return index_sets_; }
  const ParameterTransform& transform() const { return transform_; }

  virtual std::string name() const = 0;
  virtual std::vector<std::string> theta_names() const;  // unconstrained names
  virtual std::vector<std::string> theta_natural_names() const;

  // log pi(Y | eta, theta1)
  virtual LikValue log_lik(const VectorXd& eta, const VectorXd& theta_nat) const = 0;
  virtual VectorXd log_lik_grad(const VectorXd& eta, const VectorXd& theta_nat) const = 0;
  // C_eta = -d^2/d eta^2 log pi(Y | eta, theta1), with the declared pattern
  virtual SpMat neg_log_lik_hessian(const VectorXd& eta, const VectorXd& theta_nat) const = 0;

  // Q(theta2), m x m SPD, includes the Sigma_beta^{-1} block
  virtual SpMat prior_precision(const VectorXd& theta_nat) const = 0;
  // log pi(theta) on the natural scale; excludes the transform Jacobian
  virtual double log_prior(const VectorXd& theta_nat) const;

  // Structural nonzeros of Q for any theta (pattern is theta-free).
  virtual std::vector<std::pair<int, int>> prior_pattern() const;

  // True when Q + Z^T C_eta Z should be stored dense (fill > 25%).
  bool hessian_is_dense() const { return hessian_dense_; }

 protected:
  void init_structure(int n_obs, SpMat design, std::vector<std::vector<int>> index_sets,
                      ParameterTransform transform);

  int n_obs_ = 0;
  SpMat design_;
  std::vector<std::vector<int>> index_sets_;
  ParameterTransform transform_;
  bool hessian_dense_ = false;
};

// Latent point with its cached additive predictor.
struct LatentState {
  VectorXd w;
  VectorXd eta;  // Z w, recomputed whenever w changes

  LatentState(const ElgmModel& model, VectorXd w_in)
      : w(std::move(w_in)), eta(model.design() * w) {}
};

struct JointDensity {
  double log_value = kNegInf;
  bool domain_violation = false;
};

// log pi(Y|W,theta1) - 1/2 w^T Q w + 1/2 log|Q| - (m/2) log 2pi
//   + log pi(theta) + transform log-Jacobian, with theta unconstrained.
JointDensity log_joint(const ElgmModel& model, const VectorXd& w, const VectorXd& theta_u);

// Gradient of log_joint in w: Z^T grad_eta - Q w.
VectorXd grad_w_log_joint(const ElgmModel& model, const VectorXd& w, const VectorXd& theta_u);

// H = Q(theta2) + Z^T C_eta Z, stored dense or sparse per the model's
// declared structure.
num::SymMatrix hessian_w(const ElgmModel& model, const VectorXd& w, const VectorXd& theta_u);

// Structural pattern of H (upper triangle, row <= col) implied by Q and the
// index sets: (a,b) may be nonzero only when a,b are coupled through Q or
// both touch some observation's predictors through Z.
std::vector<std::pair<int, int>> predicted_hessian_pattern(const ElgmModel& model);

}  // namespace elgm::model
