#pragma once

#include <optional>
#include <span>
#include <string>

#include "mpo_lab/adam.hpp"
#include "mpo_lab/checkpoint.hpp"
#include "mpo_lab/config.hpp"
#include "mpo_lab/control_env.hpp"
#include "mpo_lab/dual.hpp"
#include "mpo_lab/mstep.hpp"
#include "mpo_lab/replay.hpp"
#include "mpo_lab/retrace.hpp"

namespace mpo {

// Unrecoverable training error (non-finite gradients, missing worker, ...).
struct TrainingFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BundleDiagnostics {
  double q_loss = 0.0;
  double dual_value = 0.0;
  double kl_mean = 0.0;
  double kl_cov = 0.0;
};

// Named descent gradients exchanged between workers and the chief. Policy
// gradients are negated ascent directions so every consumer minimizes.
struct GradientBundle {
  int worker_id = 0;
  std::uint64_t snapshot_version = 0;
  MlpGrads critic;
  MlpGrads policy;
  double eta = 0.0;
  double eta_mu = 0.0;     // w.r.t. the softplus-reparameterized multiplier
  double eta_sigma = 0.0;
  BundleDiagnostics diag;

  bool all_finite() const;
};

// Shared parameters owned by the chief. policy_old (theta_i) and the critic
// target (phi') change only at outer-iteration boundaries.
struct TrainState {
  PolicyParams policy;
  PolicyParams policy_old;
  CriticParams critic;
  DualState dual;
  AdamState adam_policy;
  AdamState adam_critic;
  ScalarAdamState adam_eta;
  ScalarAdamState adam_eta_mu;
  ScalarAdamState adam_eta_sigma;
  ReplayBuffer buffer{1};
  std::uint64_t version = 0;
  long episodes = 0;
  long env_steps = 0;
  long iteration = 0;
};

TrainState init_train_state(const TrainConfig& config);

// One mini-batch pass against an immutable snapshot: Retrace critic
// gradient, E-step dual gradient and M-step gradients (or the parametric
// E-step gradients). Deterministic given (snapshot, rng state).
GradientBundle worker_iteration(const TrainState& snapshot, const TrainConfig& config,
                                int worker_id, Rng& rng);

// Averages exactly G bundles (in worker order) and applies one Adam step per
// parameter group; eta is projected back onto its bounds.
void chief_aggregate(TrainState& state, const TrainConfig& config,
                     std::span<const GradientBundle> bundles);

GradientBundle mean_bundle(std::span<const GradientBundle> bundles);

// Stochastic rollout storing pre-clip behavior log-probabilities.
Trajectory collect_trajectory(const ContinuousEnv& env, const PolicyParams& policy, Rng& env_rng,
                              Rng& action_rng);

// Mean undiscounted return of deterministic (mean-action) rollouts.
double evaluate_policy(const ContinuousEnv& env, const PolicyParams& policy, int episodes,
                       Rng& rng);

struct RunResult {
  long episodes = 0;
  long env_steps = 0;
  long iterations = 0;
  double final_eval_return = std::numeric_limits<double>::quiet_NaN();
  long episodes_to_threshold = -1;  // -1: threshold not reached or not set
  std::string outcome = "completed";
};

// Full training loop. When `out_dir` is set, writes metrics.csv and a final
// checkpoint/ directory there (also on abort).
RunResult train(const TrainConfig& config, const std::string& out_dir = "");

Checkpoint state_to_checkpoint(const TrainState& state, const TrainConfig& config);
PolicyParams policy_from_checkpoint(const Checkpoint& ckpt, bool old_policy = false);
TrainConfig config_from_checkpoint(const Checkpoint& ckpt);

// Worker thread cap from MPO_LAB_THREADS (defaults to hardware concurrency).
int worker_thread_cap();

}  // namespace mpo
