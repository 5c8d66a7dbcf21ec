#include "mpo_lab/dual.hpp"

#include <cmath>

namespace mpo {

EStepBatch EStepBatch::from_q_values(Matrix q) {
  EStepBatch batch;
  batch.log_prior = Matrix::Constant(q.rows(), q.cols(), -std::log(double(q.cols())));
  batch.ref_log_probs = Matrix::Zero(q.rows(), q.cols());
  batch.q_values = std::move(q);
  return batch;
}

void EStepBatch::validate() const {
  require(q_values.rows() >= 1 && q_values.cols() >= 1, "EStepBatch: empty");
  require(log_prior.rows() == q_values.rows() && log_prior.cols() == q_values.cols(),
          "EStepBatch: log_prior shape");
  require_finite(q_values, "EStepBatch q_values");
  require_finite(log_prior, "EStepBatch log_prior");
}

DualEval dual_value_and_grad(double eta, const EStepBatch& batch, double epsilon) {
  if (!(eta > 0.0)) throw DomainError("dual_value_and_grad: eta must be positive");
  batch.validate();
  const Index n_states = batch.num_states();

  double mean_lse = 0.0;
  double mean_weighted_q = 0.0;
  for (Index s = 0; s < n_states; ++s) {
    const Eigen::ArrayXd t = batch.log_prior.row(s).array() + batch.q_values.row(s).array() / eta;
    const double m = t.maxCoeff();
    const Eigen::ArrayXd e = (t - m).exp();
    const double z = e.sum();
    mean_lse += m + std::log(z);
    mean_weighted_q += (e * batch.q_values.row(s).array().transpose()).sum() / z;
  }
  mean_lse /= n_states;
  mean_weighted_q /= n_states;

  DualEval eval;
  eval.value = eta * epsilon + eta * mean_lse;
  eval.grad = epsilon + mean_lse - mean_weighted_q / eta;
  return eval;
}

EtaSolution solve_eta(const EStepBatch& batch, double epsilon, double tolerance) {
  if (!(epsilon > 0.0)) throw DomainError("solve_eta: epsilon must be positive");
  double lo = DualState::kEtaMin;
  double hi = DualState::kEtaMax;

  // g is convex, so its derivative is nondecreasing in eta.
  if (dual_value_and_grad(lo, batch, epsilon).grad >= 0.0) return {lo, false};
  if (dual_value_and_grad(hi, batch, epsilon).grad <= 0.0) return {hi, false};

  for (int it = 0; it < 200 && (hi - lo) > tolerance * hi; ++it) {
    const double mid = std::sqrt(lo * hi);  // bisect in log space
    if (dual_value_and_grad(mid, batch, epsilon).grad >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return {0.5 * (lo + hi), true};
}

Matrix estep_weights(double eta, const EStepBatch& batch) {
  if (!(eta > 0.0)) throw DomainError("estep_weights: eta must be positive");
  batch.validate();
  Matrix weights(batch.q_values.rows(), batch.q_values.cols());
  for (Index s = 0; s < batch.q_values.rows(); ++s) {
    const Eigen::ArrayXd t = batch.log_prior.row(s).array() + batch.q_values.row(s).array() / eta;
    const Eigen::ArrayXd e = (t - t.maxCoeff()).exp();
    weights.row(s) = (e / e.sum()).transpose();
  }
  return weights;
}

double estep_sample_kl(const Matrix& weights, const Matrix& log_prior) {
  require(weights.rows() == log_prior.rows() && weights.cols() == log_prior.cols(),
          "estep_sample_kl: shape mismatch");
  double kl = 0.0;
  for (Index s = 0; s < weights.rows(); ++s)
    for (Index j = 0; j < weights.cols(); ++j) {
      const double w = weights(s, j);
      if (w > 0.0) kl += w * (std::log(w) - log_prior(s, j));
    }
  return kl / weights.rows();
}

}  // namespace mpo
