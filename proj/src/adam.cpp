#include "mpo_lab/adam.hpp"

#include <cmath>

namespace mpo {

AdamState AdamState::like(const MlpParams& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto& w : params.weights) {
    s.m_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
    s.v_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  }
  for (const auto& b : params.biases) {
    s.m_biases.push_back(Vector::Zero(b.size()));
    s.v_biases.push_back(Vector::Zero(b.size()));
  }
  return s;
}

void adam_step(AdamState& state, MlpParams& params, const MlpGrads& grads) {
  if (grads.d_weights.size() != params.weights.size())
    throw DimensionError("adam_step: gradient layer count mismatch");
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));

  auto update = [&](auto& m, auto& v, auto& p, const auto& g) {
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.array() -= c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps_hat);
  };
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    if (grads.d_weights[l].rows() != params.weights[l].rows() ||
        grads.d_weights[l].cols() != params.weights[l].cols())
      throw DimensionError("adam_step: weight gradient shape mismatch");
    update(state.m_weights[l], state.v_weights[l], params.weights[l], grads.d_weights[l]);
    update(state.m_biases[l], state.v_biases[l], params.biases[l], grads.d_biases[l]);
  }
}

double adam_step(ScalarAdamState& state, double param, double grad) {
  if (!std::isfinite(grad)) throw NumericError("adam_step: non-finite gradient");
  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step_count));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step_count));
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v + (1.0 - c.beta2) * grad * grad;
  return param - c.lr * (state.m / bc1) / (std::sqrt(state.v / bc2) + c.eps_hat);
}

}  // namespace mpo
