#pragma once

#include <vector>

#include "mpo_lab/policy.hpp"
#include "mpo_lab/types.hpp"

namespace mpo {

// Sampled E-step problem. Row s of q_values holds the critic values of the
// actions proposed for state s. log_prior gives each atom's weight inside
// the inner integral: -log M for fresh policy samples (the self-normalized
// importance form), or log pi(a|s) when actions are enumerated exactly.
struct EStepBatch {
  std::vector<Vector> states;
  std::vector<Matrix> actions;               // Gaussian: per state, dim x M
  std::vector<std::vector<int>> action_ids;  // categorical: per state, M indices
  Matrix q_values;                           // S x M
  Matrix ref_log_probs;                      // S x M, log pi(a|s, theta_i)
  Matrix log_prior;                          // S x M

  Index num_states() const { return q_values.rows(); }
  Index samples_per_state() const { return q_values.cols(); }

  static EStepBatch from_q_values(Matrix q_values);
  void validate() const;
};

// Temperature and Lagrange multipliers with their constraint levels. The
// M-step multipliers are stored softplus-reparameterized so they stay
// positive under additive updates.
struct DualState {
  double eta = 1.0;
  double eta_mu_raw = 1.0;
  double eta_sigma_raw = 1.0;
  double epsilon = 0.1;
  double epsilon_mu = 0.1;
  double epsilon_sigma = 1e-4;

  double eta_mu() const { return softplus(eta_mu_raw); }
  double eta_sigma() const { return softplus(eta_sigma_raw); }

  static constexpr double kEtaMin = 1e-8;
  static constexpr double kEtaMax = 1e6;
};

struct DualEval {
  double value = 0.0;
  double grad = 0.0;  // d value / d eta
};

// The convex dual g(eta) = eta*epsilon + eta * mean_s log sum_j exp(log_prior
// + Q/eta) and its analytic derivative. Log-sum-exp stabilized.
DualEval dual_value_and_grad(double eta, const EStepBatch& batch, double epsilon);

struct EtaSolution {
  double eta = 0.0;
  bool interior = false;  // false when clipped at a bound
};

// Minimizes g over [kEtaMin, kEtaMax] by bisection on the derivative. At an
// interior optimum the induced weights meet the KL constraint exactly.
EtaSolution solve_eta(const EStepBatch& batch, double epsilon, double tolerance = 1e-12);

// Per-state weights over the proposed actions: softmax(log_prior + Q/eta).
// Rows are the non-parametric variational distribution q_i restricted to the
// sampled atoms; within a state the weight ranking follows the Q ranking.
Matrix estep_weights(double eta, const EStepBatch& batch);

// Sample-based KL(q || pi): per-state sum_j w_j (log w_j - log_prior_j),
// averaged over states.
double estep_sample_kl(const Matrix& weights, const Matrix& log_prior);

}  // namespace mpo
