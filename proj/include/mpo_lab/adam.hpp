#pragma once

#include "mpo_lab/mlp.hpp"
#include "mpo_lab/types.hpp"

namespace mpo {

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_hat = 1e-8;
};

// First/second moment estimates mirroring an MlpParams shape.
struct AdamState {
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
  long step_count = 0;
  AdamConfig config;

  static AdamState like(const MlpParams& params, AdamConfig config = {});
};

// Bias-corrected Adam update in place. Rejects non-finite gradients.
void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads);

// Scalar variant for temperatures and Lagrange multipliers.
struct ScalarAdamState {
  double m = 0.0;
  double v = 0.0;
  long step_count = 0;
  AdamConfig config;
};

double adam_step(ScalarAdamState& state, double param, double grad);

}  // namespace mpo
