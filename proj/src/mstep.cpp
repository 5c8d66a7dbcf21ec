#include "mpo_lab/mstep.hpp"

#include <cmath>

namespace mpo {
namespace {

Matrix stack_states(const std::vector<Vector>& states) {
  require(!states.empty(), "mstep: no states");
  Matrix x(states.front().size(), static_cast<Index>(states.size()));
  for (std::size_t s = 0; s < states.size(); ++s) x.col(static_cast<Index>(s)) = states[s];
  return x;
}

}  // namespace

MStepResult mstep_update(const PolicyParams& policy_old, const PolicyParams& policy_new,
                         const EStepBatch& batch, const Matrix& weights, const DualState& dual) {
  batch.validate();
  require(weights.rows() == batch.num_states() && weights.cols() == batch.samples_per_state(),
          "mstep_update: weight shape mismatch");
  const Index n_states = batch.num_states();
  const Index n_samples = batch.samples_per_state();
  const double eta_mu = dual.eta_mu();
  const double eta_sigma = dual.eta_sigma();
  const Matrix x = stack_states(batch.states);

  MStepResult result;
  MlpCache cache;
  Matrix d_output;
  double log_lik = 0.0, c_mu = 0.0, c_sigma = 0.0;

  if (policy_new.head_kind == HeadKind::kGaussian) {
    require(static_cast<Index>(batch.actions.size()) == n_states, "mstep_update: missing actions");
    const auto heads_old = gaussian_heads_at(policy_old, x);
    const auto heads_new = gaussian_heads_at(policy_new, x, &cache);
    const Matrix& output = cache.post.back();
    d_output = Matrix::Zero(output.rows(), n_states);

    for (Index s = 0; s < n_states; ++s) {
      const GaussianHead& head = heads_new[s];
      GaussianHeadGrad acc = GaussianHeadGrad::zeros(head.dim());
      for (Index j = 0; j < n_samples; ++j) {
        const Vector action = batch.actions[s].col(j);
        log_lik += weights(s, j) * log_prob(head, action);
        acc.add_scaled(log_prob_grad(head, action), weights(s, j));
      }
      const KlTerms kl = kl_decoupled(heads_old[s], head);
      c_mu += kl.mean_term;
      c_sigma += kl.cov_term;
      acc.add_scaled(kl_mean_grad_new(heads_old[s], head), -eta_mu);
      acc.add_scaled(kl_cov_grad_new(heads_old[s], head), -eta_sigma);
      d_output.col(s) =
          gaussian_head_grad_to_output(acc, output.col(s), policy_new.action_dim) / n_states;
    }
  } else {
    require(static_cast<Index>(batch.action_ids.size()) == n_states,
            "mstep_update: missing action ids");
    const auto heads_old = categorical_heads_at(policy_old, x);
    const auto heads_new = categorical_heads_at(policy_new, x, &cache);
    d_output = Matrix::Zero(policy_new.action_dim, n_states);

    for (Index s = 0; s < n_states; ++s) {
      const Vector lp_new = heads_new[s].log_probs();
      const Vector p_new = lp_new.array().exp();
      Vector d_logits = Vector::Zero(policy_new.action_dim);
      double w_total = 0.0;
      for (Index j = 0; j < n_samples; ++j) {
        const int a = batch.action_ids[s][j];
        log_lik += weights(s, j) * lp_new[a];
        d_logits[a] += weights(s, j);
        w_total += weights(s, j);
      }
      d_logits -= w_total * p_new;
      const double kl = kl_categorical(heads_old[s], heads_new[s]);
      c_mu += kl;
      d_logits -= eta_mu * (p_new - heads_old[s].probs());
      d_output.col(s) = d_logits / n_states;
    }
  }

  log_lik /= n_states;
  c_mu /= n_states;
  c_sigma /= n_states;

  auto [grads, d_input] = mlp_backward(policy_new.net, cache, d_output);
  result.policy_grad = std::move(grads);
  result.weighted_log_lik = log_lik;
  result.kl_mean = c_mu;
  result.kl_cov = c_sigma;
  result.d_eta_mu = dual.epsilon_mu - c_mu;
  result.d_eta_sigma =
      policy_new.head_kind == HeadKind::kGaussian ? dual.epsilon_sigma - c_sigma : 0.0;
  result.lagrangian = log_lik + eta_mu * (dual.epsilon_mu - c_mu);
  if (policy_new.head_kind == HeadKind::kGaussian)
    result.lagrangian += eta_sigma * (dual.epsilon_sigma - c_sigma);
  if (!result.policy_grad.all_finite() || !std::isfinite(result.lagrangian))
    throw NumericError("mstep_update: non-finite gradient");
  return result;
}

ParametricEStepResult parametric_estep_grad(const PolicyParams& var_policy,
                                            const PolicyParams& old_policy,
                                            const EStepBatch& batch, const Matrix& advantages,
                                            const DualState& dual) {
  batch.validate();
  require(advantages.rows() == batch.num_states() &&
              advantages.cols() == batch.samples_per_state(),
          "parametric_estep_grad: advantage shape mismatch");
  const Index n_states = batch.num_states();
  const Index n_samples = batch.samples_per_state();
  const double eta_mu = dual.eta_mu();
  const double eta_sigma = dual.eta_sigma();
  const Matrix x = stack_states(batch.states);

  ParametricEStepResult result;
  MlpCache cache;
  Matrix d_output;
  double objective = 0.0, c_mu = 0.0, c_sigma = 0.0;

  if (var_policy.head_kind == HeadKind::kGaussian) {
    const auto heads_ref = gaussian_heads_at(old_policy, x);
    const auto heads_q = gaussian_heads_at(var_policy, x, &cache);
    const Matrix& output = cache.post.back();
    d_output = Matrix::Zero(output.rows(), n_states);

    for (Index s = 0; s < n_states; ++s) {
      const GaussianHead& head = heads_q[s];
      GaussianHeadGrad acc = GaussianHeadGrad::zeros(head.dim());
      for (Index j = 0; j < n_samples; ++j) {
        const Vector action = batch.actions[s].col(j);
        const double lp_q = log_prob(head, action);
        const double coeff = std::exp(batch.log_prior(s, j) + lp_q - batch.ref_log_probs(s, j)) *
                             advantages(s, j);
        objective += coeff;
        acc.add_scaled(log_prob_grad(head, action), coeff);
      }
      const KlTerms kl = kl_decoupled(head, heads_ref[s]);  // reverse KL(q || pi_i)
      c_mu += kl.mean_term;
      c_sigma += kl.cov_term;
      acc.add_scaled(kl_mean_grad_old(head, heads_ref[s]), -eta_mu);
      acc.add_scaled(kl_cov_grad_old(head, heads_ref[s]), -eta_sigma);
      d_output.col(s) =
          gaussian_head_grad_to_output(acc, output.col(s), var_policy.action_dim) / n_states;
    }
  } else {
    const auto heads_ref = categorical_heads_at(old_policy, x);
    const auto heads_q = categorical_heads_at(var_policy, x, &cache);
    d_output = Matrix::Zero(var_policy.action_dim, n_states);

    for (Index s = 0; s < n_states; ++s) {
      const Vector lp_q = heads_q[s].log_probs();
      const Vector p_q = lp_q.array().exp();
      const Vector lp_ref = heads_ref[s].log_probs();
      Vector d_logits = Vector::Zero(var_policy.action_dim);
      double coeff_total = 0.0;
      for (Index j = 0; j < n_samples; ++j) {
        const int a = batch.action_ids[s][j];
        const double coeff = std::exp(batch.log_prior(s, j) + lp_q[a] - batch.ref_log_probs(s, j)) *
                             advantages(s, j);
        objective += coeff;
        d_logits[a] += coeff;
        coeff_total += coeff;
      }
      d_logits -= coeff_total * p_q;
      // KL(q || ref) and its logit gradient: q_k (u_k - KL), u = lp_q - lp_ref.
      const Vector u = lp_q - lp_ref;
      const double kl = p_q.dot(u);
      c_mu += kl;
      d_logits -= eta_mu * p_q.cwiseProduct(u - Vector::Constant(u.size(), kl));
      d_output.col(s) = d_logits / n_states;
    }
  }

  objective /= n_states;
  c_mu /= n_states;
  c_sigma /= n_states;

  auto [grads, d_input] = mlp_backward(var_policy.net, cache, d_output);
  result.policy_grad = std::move(grads);
  result.objective = objective;
  result.kl_mean = c_mu;
  result.kl_cov = c_sigma;
  result.d_eta_mu = dual.epsilon_mu - c_mu;
  result.d_eta_sigma =
      var_policy.head_kind == HeadKind::kGaussian ? dual.epsilon_sigma - c_sigma : 0.0;
  result.lagrangian = objective + eta_mu * (dual.epsilon_mu - c_mu);
  if (var_policy.head_kind == HeadKind::kGaussian)
    result.lagrangian += eta_sigma * (dual.epsilon_sigma - c_sigma);
  if (!result.policy_grad.all_finite() || !std::isfinite(result.lagrangian))
    throw NumericError("parametric_estep_grad: non-finite gradient");
  return result;
}

MStepSolveResult mstep_solve(const PolicyParams& policy_old, PolicyParams policy,
                             const EStepBatch& batch, const Matrix& weights, DualState dual,
                             int iterations, double lr) {
  AdamConfig cfg;
  cfg.lr = lr;
  AdamState adam_policy = AdamState::like(policy.net, cfg);
  ScalarAdamState adam_mu{0.0, 0.0, 0, cfg};
  ScalarAdamState adam_sigma{0.0, 0.0, 0, cfg};

  MStepResult last;
  for (int it = 0; it < iterations; ++it) {
    last = mstep_update(policy_old, policy, batch, weights, dual);
    MlpGrads descent = last.policy_grad;
    descent.scale(-1.0);  // Adam minimizes
    adam_step(adam_policy, policy.net, descent);
    dual.eta_mu_raw = adam_step(adam_mu, dual.eta_mu_raw, last.d_eta_mu * sigmoid(dual.eta_mu_raw));
    dual.eta_sigma_raw =
        adam_step(adam_sigma, dual.eta_sigma_raw, last.d_eta_sigma * sigmoid(dual.eta_sigma_raw));
  }
  last = mstep_update(policy_old, policy, batch, weights, dual);
  return {std::move(policy), dual, last.kl_mean, last.kl_cov};
}

}  // namespace mpo
