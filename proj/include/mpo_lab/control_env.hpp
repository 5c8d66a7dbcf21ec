#pragma once

#include <string>
#include <vector>

#include "mpo_lab/rng.hpp"
#include "mpo_lab/types.hpp"

namespace mpo {

// One stored interaction. behavior_log_prob is the log density of the
// pre-clip sample under the policy that produced it.
struct Transition {
  Vector state;
  Vector action;  // as executed (post clipping)
  double reward = 0.0;
  Vector next_state;
  double behavior_log_prob = 0.0;
  bool terminal = false;
};

using Trajectory = std::vector<Transition>;

enum class EnvId { kPointMass, kPendulum };

// Deterministic, dependency-free control tasks. Both are pure functions of
// (state, action); episodes end at the horizon without a terminal flag.
struct ContinuousEnv {
  EnvId id = EnvId::kPendulum;
  int state_dim = 0;
  int action_dim = 0;
  int horizon = 200;
  Vector action_low, action_high;
  double dt = 0.05;

  static ContinuousEnv point_mass(int horizon = 200);
  static ContinuousEnv pendulum(int horizon = 200);
};

ContinuousEnv make_env(const std::string& id, int horizon);

Vector env_reset(const ContinuousEnv& env, Rng& rng);

struct StepResult {
  Vector next_state;
  double reward = 0.0;
  bool terminal = false;
};

// Actions outside the bounds are clipped before being applied.
StepResult env_step(const ContinuousEnv& env, const Vector& state, const Vector& action);

Vector clip_action(const ContinuousEnv& env, const Vector& action);

// Pendulum helpers; state is (cos theta, sin theta, angular velocity) with
// theta measured from the upright position.
double pendulum_angle(const Vector& state);
double pendulum_energy(const Vector& state);

}  // namespace mpo
