#include "mpo_lab/retrace.hpp"

#include <cmath>

namespace mpo {

std::vector<double> retrace_targets(std::span<const RetraceStep> steps, double gamma) {
  const int n = static_cast<int>(steps.size());
  require(n >= 1, "retrace_targets: empty window");
  for (const RetraceStep& s : steps)
    if (!std::isfinite(s.behavior_log_prob))
      throw DomainError("retrace_targets: behavior log-probability is not finite");

  // Backward accumulation: G_t = delta_t + gamma c_{t+1} G_{t+1}.
  std::vector<double> targets(n);
  double tail = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const RetraceStep& s = steps[t];
    const double bootstrap = s.terminal ? 0.0 : s.expected_next_q;
    const double delta = s.reward + gamma * bootstrap - s.q_target;
    double g = delta;
    if (t + 1 < n) {
      const RetraceStep& nx = steps[t + 1];
      const double c = std::min(1.0, std::exp(nx.log_pi - nx.behavior_log_prob));
      g += gamma * c * tail;
    }
    targets[t] = s.q_target + g;
    tail = g;
  }
  return targets;
}

std::vector<double> retrace_targets(const TrajectoryWindow& window, const QEvaluator& q_target,
                                    const PolicyParams& policy, int num_samples, double gamma,
                                    Rng& rng) {
  require(window.length() >= 1, "retrace_targets: empty window");
  std::vector<RetraceStep> steps(window.length());
  for (int t = 0; t < window.length(); ++t) {
    const Transition& tr = window.transitions[t];
    RetraceStep& s = steps[t];
    s.reward = tr.reward;
    s.terminal = tr.terminal;
    s.behavior_log_prob = tr.behavior_log_prob;
    s.q_target = q_target(tr.state, tr.action);

    if (policy.head_kind == HeadKind::kGaussian) {
      const GaussianHead head = gaussian_head_at(policy, tr.state);
      s.log_pi = log_prob(head, tr.action);
      if (!tr.terminal) {
        require(num_samples >= 1, "retrace_targets: need at least one bootstrap sample");
        const GaussianHead next_head = gaussian_head_at(policy, tr.next_state);
        double acc = 0.0;
        for (int m = 0; m < num_samples; ++m)
          acc += q_target(tr.next_state, sample(next_head, rng).first);
        s.expected_next_q = acc / num_samples;
      }
    } else {
      const CategoricalHead head = categorical_head_at(policy, tr.state);
      s.log_pi = log_prob(head, static_cast<Index>(tr.action[0]));
      if (!tr.terminal) {
        const CategoricalHead next_head = categorical_head_at(policy, tr.next_state);
        const Vector probs = next_head.probs();
        double acc = 0.0;
        for (Index a = 0; a < probs.size(); ++a)
          acc += probs[a] * q_target(tr.next_state, Vector::Constant(1, static_cast<double>(a)));
        s.expected_next_q = acc;
      }
    }
  }
  return retrace_targets(steps, gamma);
}

CriticParams make_critic(int state_dim, int action_dim, const std::vector<int>& hidden,
                         Activation activation) {
  std::vector<int> sizes{state_dim + action_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  MlpParams net = make_mlp(sizes, activation);
  return CriticParams{net, net};
}

void sync_target(CriticParams& critic) { critic.target = critic.net; }

double critic_value(const MlpParams& net, const Vector& state, const Vector& action) {
  Vector input(state.size() + action.size());
  input << state, action;
  return mlp_forward(net, input)[0];
}

Vector critic_values(const MlpParams& net, const Matrix& states, const Matrix& actions,
                     MlpCache* cache) {
  require(states.cols() == actions.cols(), "critic_values: batch size mismatch");
  Matrix input(states.rows() + actions.rows(), states.cols());
  input.topRows(states.rows()) = states;
  input.bottomRows(actions.rows()) = actions;
  return mlp_forward(net, input, cache).row(0).transpose();
}

CriticUpdate critic_update(const CriticParams& critic, const Matrix& states, const Matrix& actions,
                           const Vector& targets) {
  require(states.cols() == targets.size(), "critic_update: target count mismatch");
  require_finite(targets, "critic_update targets");
  MlpCache cache;
  const Vector preds = critic_values(critic.net, states, actions, &cache);
  const Vector err = preds - targets;
  const double n = static_cast<double>(targets.size());
  const double loss = err.squaredNorm() / n;
  const Matrix d_out = (2.0 / n) * err.transpose();
  auto [grads, d_input] = mlp_backward(critic.net, cache, d_out);
  return CriticUpdate{loss, std::move(grads), preds};
}

}  // namespace mpo
