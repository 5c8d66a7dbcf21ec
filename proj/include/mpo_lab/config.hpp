#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mpo_lab/mlp.hpp"

namespace mpo {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class VariationalMode { kNonparametric, kParametric };

// Everything that determines a run, together with the root seed. Defaults
// follow the published control-suite hyperparameters; the loop-scale knobs
// default to the algorithm listing's inner loop of 1000 steps.
struct TrainConfig {
  // env.*
  std::string env_id = "pendulum";
  int horizon = 200;

  // train.*
  int workers = 1;                    // G
  int trajectories_per_iter = 1;      // L, per worker per outer iteration
  int inner_steps = 1000;             // gradient steps per outer iteration
  int batch_windows = 8;              // windows per mini-batch
  int retrace_steps = 8;              // window length N for truncation
  double gamma = 0.99;
  double lr = 5e-4;
  long trajectory_budget = 1000;      // L_max
  long replay_capacity = 200000;      // steps
  double grad_clip = 1.0;             // per-group global norm

  // mpo.*
  VariationalMode mode = VariationalMode::kNonparametric;
  double epsilon = 0.1;
  double epsilon_mu = 0.1;
  double epsilon_sigma = 1e-4;
  int action_samples = 20;            // M

  // net.*
  std::vector<int> policy_hidden = {100, 100};
  std::vector<int> q_hidden = {200, 200};
  Activation activation = Activation::kTanh;

  // eval.*
  int eval_every = 10;                // outer iterations between evaluations (0 = off)
  int eval_episodes = 3;
  double eval_threshold = 0.0;
  bool has_eval_threshold = false;
  bool stop_at_threshold = false;

  std::uint64_t seed = 0;  // set from --seed, not from the file

  bool operator==(const TrainConfig& other) const;
  void validate() const;
};

// Flat `key = value` document with dotted sections. Unknown keys and
// constraint violations are rejected with the offending key named.
TrainConfig parse_config_text(const std::string& text);
TrainConfig parse_config(const std::string& path);

// Canonical serialization; parsing it back yields an equal config.
std::string serialize_config(const TrainConfig& config);

}  // namespace mpo
