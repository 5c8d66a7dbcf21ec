#pragma once

#include <vector>

#include "mpo_lab/tabular_mdp.hpp"
#include "mpo_lab/types.hpp"

namespace mpo {

// A pi-regularized evaluation problem: rewards are penalized by
// alpha * log(q/pi) wherever the variational policy q departs from the
// reference policy pi. Everything here is computed exactly by linear algebra.
struct RegularizedProblem {
  TabularMDP mdp;
  double alpha = 1.0;
  Matrix pi;  // reference policy, n_states x n_actions
  Matrix q;   // variational policy, absolutely continuous w.r.t. pi

  void validate() const;
};

// r(x,a) - alpha * log(q(a|x) / pi(a|x)).
double regularized_reward(const RegularizedProblem& problem, int state, int action);

// Expected regularized reward per state under q: r_q(x) - alpha * KL(q||pi).
Vector regularized_state_reward(const RegularizedProblem& problem);

// Fixed point of the regularized Bellman operator, by direct linear solve.
Vector regularized_value(const RegularizedProblem& problem);

// One application of T^{pi,q}_alpha.
Vector regularized_bellman_apply(const RegularizedProblem& problem, const Vector& v);

// The exact E-step maximizer q(a|x) proportional to pi(a|x) exp(Q(x,a)/alpha),
// with Q the exact action values of pi. Log-sum-exp stabilized.
Matrix soft_optimal_q(const TabularMDP& mdp, const Matrix& pi, double alpha);

// Softmax-parameterized tabular policy: one logit per (state, action).
struct TabularSoftmaxPolicy {
  Matrix theta;

  Matrix distribution() const;  // row-wise softmax
};

struct ImprovementRecord {
  Matrix theta;
  Matrix q;
  double value = 0.0;  // J_i = mu_0 . V^{pi_i, q_i}_alpha
};

// Alternates the exact soft E-step with one occupancy-weighted KL gradient
// step on theta. Produces `iterations` records; values are non-decreasing
// for sufficiently small step sizes.
std::vector<ImprovementRecord> improvement_iteration(const TabularMDP& mdp,
                                                     const TabularSoftmaxPolicy& theta0,
                                                     double alpha, double step_size,
                                                     int iterations);

struct MonotoneBetaResult {
  double beta = 0.0;
  std::vector<ImprovementRecord> trace;
  int halvings = 0;
};

// Halves the step size from `beta0` until the recorded values are monotone
// within `tolerance` over `iterations` records.
MonotoneBetaResult find_monotone_beta(const TabularMDP& mdp, const TabularSoftmaxPolicy& theta0,
                                      double alpha, int iterations, double beta0 = 1e-2,
                                      double tolerance = 1e-9, int max_halvings = 40);

}  // namespace mpo
