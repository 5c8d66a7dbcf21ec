#pragma once

#include "mpo_lab/adam.hpp"
#include "mpo_lab/dual.hpp"
#include "mpo_lab/policy.hpp"

namespace mpo {

// One evaluation of the M-step Lagrangian
//   L(theta) = E_s[ sum_j w_j log pi(a_j|s, theta) ]
//              + eta_mu (eps_mu - C_mu) + eta_sigma (eps_sigma - C_sigma)
// with ascent gradients on theta and descent gradients on the multipliers.
// Gaussian heads use the decoupled KL terms; categorical heads use a single
// KL against eps_mu on the eta_mu channel.
struct MStepResult {
  MlpGrads policy_grad;  // ascent direction on theta
  double d_eta_mu = 0.0;
  double d_eta_sigma = 0.0;
  double lagrangian = 0.0;
  double weighted_log_lik = 0.0;
  double kl_mean = 0.0;  // C_mu (categorical: the full KL)
  double kl_cov = 0.0;   // C_sigma (categorical: 0)
};

MStepResult mstep_update(const PolicyParams& policy_old, const PolicyParams& policy_new,
                         const EStepBatch& batch, const Matrix& weights, const DualState& dual);

// Likelihood-ratio gradient of the parametric E-step Lagrangian
//   L(theta_q) = E_s[ sum_j prior_j rho_j A_j ] - multiplier KL terms,
//   rho_j = pi(a_j|s, theta_q) / pi(a_j|s, theta_i),
// where the actions were drawn from the old policy and A holds advantages.
// The trust region is the reversed, decoupled KL(q || pi_i).
struct ParametricEStepResult {
  MlpGrads policy_grad;  // ascent direction on theta_q
  double d_eta_mu = 0.0;
  double d_eta_sigma = 0.0;
  double lagrangian = 0.0;
  double objective = 0.0;  // importance-weighted advantage term
  double kl_mean = 0.0;
  double kl_cov = 0.0;
};

ParametricEStepResult parametric_estep_grad(const PolicyParams& var_policy,
                                            const PolicyParams& old_policy,
                                            const EStepBatch& batch, const Matrix& advantages,
                                            const DualState& dual);

// Alternates Adam ascent on theta with multiplier descent on a fixed batch
// until the iteration budget is spent; at convergence the constraint levels
// hold up to solver tolerance.
struct MStepSolveResult {
  PolicyParams policy;
  DualState dual;
  double kl_mean = 0.0;
  double kl_cov = 0.0;
};

MStepSolveResult mstep_solve(const PolicyParams& policy_old, PolicyParams policy,
                             const EStepBatch& batch, const Matrix& weights, DualState dual,
                             int iterations, double lr);

}  // namespace mpo
