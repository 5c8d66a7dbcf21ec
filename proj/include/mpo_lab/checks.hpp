#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpo_lab/dual.hpp"
#include "mpo_lab/tabular_mdp.hpp"

namespace mpo {
namespace checks {

struct CheckLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckReport {
  std::string suite;
  std::vector<CheckLine> lines;

  bool all_passed() const;
  std::string to_string() const;
};

// Regularized-reward/value property suite on random tabular MDPs:
// the value and operator inequalities, the E-step improvement bound,
// Bellman fixed points and contraction, soft-optimal rows, and the
// monotonicity of the exact improvement iteration.
CheckReport run_oracle_checks(std::uint64_t seed);

// Dual/weights suite: convexity of g, equivalence with a constrained
// simplex-search oracle, KL activation at interior optima, weight/Q rank
// agreement and the (Q, eta) joint rescaling identity.
CheckReport run_estep_checks(std::uint64_t seed);

// Retrace suite: exact-expectation operator fixed point and convergence,
// clipped-weight range, and sampled-target bias.
CheckReport run_retrace_checks(std::uint64_t seed);

// --- independent oracles (test-side machinery, no shared code with the
// production solvers they check) ---

// Derivative-free maximization of E_q[Q] over the probability simplex
// subject to KL(q || prior) <= bound: adaptive pattern search along edge
// directions with a shrinking step.
struct SimplexSearchResult {
  Vector q;
  double expected_q = 0.0;
};

SimplexSearchResult simplex_constrained_search(const Vector& q_values, const Vector& prior,
                                               double kl_bound);

// One application of the exact-expectation Retrace operator on a tabular
// MDP, computed by solving the correction series as a linear system over
// state-action space. Keeps Q^pi fixed and contracts toward it.
Matrix exact_retrace_apply(const TabularMDP& mdp, const Matrix& target_policy,
                           const Matrix& behavior_policy, const Matrix& q);

}  // namespace checks
}  // namespace mpo
