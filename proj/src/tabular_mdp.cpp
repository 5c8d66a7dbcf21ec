#include "mpo_lab/tabular_mdp.hpp"

namespace mpo {

void TabularMDP::validate() const {
  require(n_states >= 1 && n_actions >= 1, "TabularMDP: empty state or action space");
  require(static_cast<int>(transition.size()) == n_actions, "TabularMDP: transition tensor size");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DomainError("TabularMDP: gamma must be in [0, 1)");
  for (const Matrix& p : transition) {
    require(p.rows() == n_states && p.cols() == n_states, "TabularMDP: transition shape");
    if ((p.array() < 0.0).any()) throw DomainError("TabularMDP: negative transition probability");
    for (int s = 0; s < n_states; ++s)
      if (std::abs(p.row(s).sum() - 1.0) > 1e-12)
        throw DomainError("TabularMDP: transition row does not sum to 1");
  }
  require(reward.rows() == n_states && reward.cols() == n_actions, "TabularMDP: reward shape");
  require_finite(reward, "TabularMDP reward");
  require(initial_dist.size() == n_states, "TabularMDP: initial distribution size");
  if (std::abs(initial_dist.sum() - 1.0) > 1e-12 || (initial_dist.array() < 0.0).any())
    throw DomainError("TabularMDP: initial distribution invalid");
}

TabularMDP make_deterministic_chain(int n_states, double gamma) {
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = 1;
  Matrix p = Matrix::Zero(n_states, n_states);
  for (int s = 0; s < n_states; ++s) p(s, std::min(s + 1, n_states - 1)) = 1.0;
  mdp.transition = {p};
  mdp.reward = Matrix::Zero(n_states, 1);
  mdp.reward(n_states - 1, 0) = 1.0;
  mdp.gamma = gamma;
  mdp.initial_dist = Vector::Zero(n_states);
  mdp.initial_dist[0] = 1.0;
  mdp.validate();
  return mdp;
}

TabularMDP random_mdp(int n_states, int n_actions, double gamma, Rng& rng) {
  TabularMDP mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.transition.reserve(n_actions);
  for (int a = 0; a < n_actions; ++a) {
    Matrix p(n_states, n_states);
    for (int s = 0; s < n_states; ++s) p.row(s) = rng.dirichlet_uniform(n_states).transpose();
    mdp.transition.push_back(std::move(p));
  }
  mdp.reward = Matrix(n_states, n_actions);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) mdp.reward(s, a) = rng.uniform01();
  mdp.gamma = gamma;
  mdp.initial_dist = Vector::Constant(n_states, 1.0 / n_states);
  mdp.validate();
  return mdp;
}

Matrix random_policy_table(int n_states, int n_actions, Rng& rng) {
  Matrix pi(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) pi.row(s) = rng.dirichlet_uniform(n_actions).transpose();
  return pi;
}

Matrix transition_under(const TabularMDP& mdp, const Matrix& policy) {
  Matrix p = Matrix::Zero(mdp.n_states, mdp.n_states);
  for (int a = 0; a < mdp.n_actions; ++a)
    p += policy.col(a).asDiagonal() * mdp.transition[a];
  return p;
}

Vector reward_under(const TabularMDP& mdp, const Matrix& policy) {
  return (policy.array() * mdp.reward.array()).rowwise().sum();
}

Vector tabular_exact_v(const TabularMDP& mdp, const Matrix& policy) {
  const Matrix p = transition_under(mdp, policy);
  const Matrix system = Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p;
  return system.partialPivLu().solve(reward_under(mdp, policy));
}

Matrix tabular_exact_q(const TabularMDP& mdp, const Matrix& policy) {
  require(policy.rows() == mdp.n_states && policy.cols() == mdp.n_actions,
          "tabular_exact_q: policy shape");
  const Vector v = tabular_exact_v(mdp, policy);
  Matrix q(mdp.n_states, mdp.n_actions);
  for (int a = 0; a < mdp.n_actions; ++a)
    q.col(a) = mdp.reward.col(a) + mdp.gamma * (mdp.transition[a] * v);
  return q;
}

Vector bellman_apply(const TabularMDP& mdp, const Matrix& policy, const Vector& v) {
  return reward_under(mdp, policy) + mdp.gamma * (transition_under(mdp, policy) * v);
}

Vector discounted_occupancy(const TabularMDP& mdp, const Matrix& policy) {
  const Matrix p = transition_under(mdp, policy);
  const Matrix system = Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p.transpose();
  return system.partialPivLu().solve(mdp.initial_dist);
}

int sample_initial_state(const TabularMDP& mdp, Rng& rng) {
  return static_cast<int>(rng.sample_categorical(mdp.initial_dist));
}

int sample_next_state(const TabularMDP& mdp, int state, int action, Rng& rng) {
  if (action < 0 || action >= mdp.n_actions) throw DimensionError("sample_next_state: bad action");
  if (state < 0 || state >= mdp.n_states) throw DimensionError("sample_next_state: bad state");
  return static_cast<int>(rng.sample_categorical(mdp.transition[action].row(state).transpose()));
}

}  // namespace mpo
