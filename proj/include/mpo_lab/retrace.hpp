#pragma once

#include <functional>
#include <span>
#include <vector>

#include "mpo_lab/mlp.hpp"
#include "mpo_lab/policy.hpp"
#include "mpo_lab/replay.hpp"

namespace mpo {

// Per-step quantities entering the Retrace recursion. expected_next_q is the
// policy expectation of the target critic at the next state (ignored when
// terminal). log_pi is the target policy's log density of the stored action.
struct RetraceStep {
  double reward = 0.0;
  double q_target = 0.0;
  double expected_next_q = 0.0;
  double log_pi = 0.0;
  double behavior_log_prob = 0.0;
  bool terminal = false;
};

// Retrace targets for every step of a window, truncated at the window end:
//   Q_ret[t] = q_target[t] + sum_{j>=t} gamma^{j-t} (prod_{k=t+1..j} c_k) delta_j,
//   delta_j  = r_j + gamma * E_pi[Q'](s_{j+1}) - q_target[j],
//   c_k      = min(1, exp(log_pi_k - behavior_log_prob_k)).
std::vector<double> retrace_targets(std::span<const RetraceStep> steps, double gamma);

using QEvaluator = std::function<double(const Vector& state, const Vector& action)>;

// Convenience wrapper: evaluates the target critic and policy over a window.
// Gaussian policies estimate the bootstrap expectation with `num_samples`
// fresh policy samples; categorical policies sum exactly over actions
// (stored actions then hold the action index in a 1-vector).
std::vector<double> retrace_targets(const TrajectoryWindow& window, const QEvaluator& q_target,
                                    const PolicyParams& policy, int num_samples, double gamma,
                                    Rng& rng);

// Online critic phi plus the frozen target copy phi' used inside targets.
struct CriticParams {
  MlpParams net;
  MlpParams target;
};

CriticParams make_critic(int state_dim, int action_dim, const std::vector<int>& hidden,
                         Activation activation);

// phi' := phi.
void sync_target(CriticParams& critic);

double critic_value(const MlpParams& net, const Vector& state, const Vector& action);
// Batched evaluation; states and actions stack one sample per column.
Vector critic_values(const MlpParams& net, const Matrix& states, const Matrix& actions,
                     MlpCache* cache = nullptr);

struct CriticUpdate {
  double loss = 0.0;
  MlpGrads grads;
  Vector predictions;
};

// Mean squared error against fixed targets; gradients via backprop.
CriticUpdate critic_update(const CriticParams& critic, const Matrix& states, const Matrix& actions,
                           const Vector& targets);

}  // namespace mpo
