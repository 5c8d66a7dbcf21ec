#pragma once

#include <vector>

#include "mpo_lab/rng.hpp"
#include "mpo_lab/types.hpp"

namespace mpo {

// Exact finite MDP. transition[a](s, s') is the probability of moving from
// s to s' under action a; rows of each transition matrix sum to one.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Matrix> transition;  // per action: n_states x n_states
  Matrix reward;                   // n_states x n_actions
  double gamma = 0.99;
  Vector initial_dist;             // n_states, sums to one

  void validate() const;
};

// Policies over a tabular MDP are row-stochastic n_states x n_actions tables.

TabularMDP make_deterministic_chain(int n_states, double gamma);
TabularMDP random_mdp(int n_states, int n_actions, double gamma, Rng& rng);
Matrix random_policy_table(int n_states, int n_actions, Rng& rng);

// State transition matrix and expected reward vector induced by a policy.
Matrix transition_under(const TabularMDP& mdp, const Matrix& policy);
Vector reward_under(const TabularMDP& mdp, const Matrix& policy);

// Exact action values: the unique solution of Q = r + gamma * P V_pi,
// obtained by a direct linear solve of the state Bellman system.
Matrix tabular_exact_q(const TabularMDP& mdp, const Matrix& policy);

// Exact state values V_pi by linear solve.
Vector tabular_exact_v(const TabularMDP& mdp, const Matrix& policy);

// One application of the non-regularized Bellman operator for `policy`.
Vector bellman_apply(const TabularMDP& mdp, const Matrix& policy, const Vector& v);

// Discounted state-occupancy weights from the initial distribution:
// (I - gamma P_pi^T)^{-1} mu_0.
Vector discounted_occupancy(const TabularMDP& mdp, const Matrix& policy);

int sample_initial_state(const TabularMDP& mdp, Rng& rng);
int sample_next_state(const TabularMDP& mdp, int state, int action, Rng& rng);

}  // namespace mpo
