#pragma once

#include <memory>
#include <optional>

#include "model_core.hpp"

namespace elgm::model {

// y_i ~ N(w, 1), w ~ N(0, 1), no hyperparameters. Validation model with a
// closed-form posterior N(n ybar / (n+1), 1/(n+1)).
std::unique_ptr<ElgmModel> conjugate_gaussian(const VectorXd& y);

// Bernoulli GLMM with two crossed random intercepts:
//   logit p_i = x_i^T beta + u1(g1_i) + u2(g2_i),
//   u1j ~ N(0, sigma1^2), u2t ~ N(0, sigma2^2), theta = (log s1, log s2).
// Latent order is W = (u1, u2, beta).
std::unique_ptr<ElgmModel> bernoulli_glmm(const Eigen::VectorXi& y, const MatrixXd& x,
                                          const std::vector<int>& g1, int d1,
                                          const std::vector<int>& g2, int d2);

// Cox proportional hazards with the partial likelihood over suffix risk sets
// of time-ordered subjects; eta_j = x_j^T beta + u(group_j). Ties are broken
// by input order, censored subjects enter risk sets only, and censored
// subjects preceding every observed failure are dropped (they carry no
// partial-likelihood information). With a group column a discrete frailty
// u_g ~ N(0, sigma^2) is added and theta = (log sigma); otherwise s = 0.
std::unique_ptr<ElgmModel> cox_ph_partial(const VectorXd& time,
                                          const std::vector<int>& censored,
                                          const MatrixXd& x,
                                          const std::optional<std::vector<int>>& group,
                                          int n_groups);

// Aggregated-count Poisson model:
//   y_i ~ Poisson(sum_{t in J_i} P_it exp(eta_t)), eta_t = x_t^T beta + u_t,
//   u ~ N(0, sigma^2 I), theta = (log sigma).
// cell_pops[i][c] is the population of the c-th cell of region i, aligned
// with cells[i].
std::unique_ptr<ElgmModel> poisson_aggregate(
    const Eigen::VectorXi& y, const std::vector<std::vector<int>>& cells,
    const std::vector<std::vector<double>>& cell_pops, int n_cells,
    const MatrixXd& x_cells);

// y_i ~ N(0, e^theta), theta ~ N(0, 1). No latent field (m = 0); exercises
// the hyperparameter pipeline with an exactly tractable inner problem.
std::unique_ptr<ElgmModel> gaussian_scale(const VectorXd& y);

}  // namespace elgm::model
