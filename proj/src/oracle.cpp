#include "mpo_lab/oracle.hpp"

#include <cmath>

namespace mpo {

void RegularizedProblem::validate() const {
  mdp.validate();
  if (!(alpha > 0.0)) throw DomainError("RegularizedProblem: alpha must be positive");
  require(pi.rows() == mdp.n_states && pi.cols() == mdp.n_actions, "RegularizedProblem: pi shape");
  require(q.rows() == mdp.n_states && q.cols() == mdp.n_actions, "RegularizedProblem: q shape");
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      if (pi(s, a) > 0.0 && q(s, a) <= 0.0)
        throw DomainError("RegularizedProblem: q not absolutely continuous w.r.t. pi");
}

double regularized_reward(const RegularizedProblem& problem, int state, int action) {
  const double p = problem.pi(state, action);
  const double qq = problem.q(state, action);
  if (p > 0.0 && qq <= 0.0)
    throw DomainError("regularized_reward: q(a|x) = 0 where pi(a|x) > 0");
  if (qq == 0.0) return problem.mdp.reward(state, action);  // never reached under q
  return problem.mdp.reward(state, action) - problem.alpha * std::log(qq / p);
}

Vector regularized_state_reward(const RegularizedProblem& problem) {
  const TabularMDP& mdp = problem.mdp;
  Vector r(mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    double acc = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double qq = problem.q(s, a);
      if (qq > 0.0) acc += qq * regularized_reward(problem, s, a);
    }
    r[s] = acc;
  }
  return r;
}

Vector regularized_value(const RegularizedProblem& problem) {
  const TabularMDP& mdp = problem.mdp;
  const Matrix p_q = transition_under(mdp, problem.q);
  const Matrix system = Matrix::Identity(mdp.n_states, mdp.n_states) - mdp.gamma * p_q;
  return system.partialPivLu().solve(regularized_state_reward(problem));
}

Vector regularized_bellman_apply(const RegularizedProblem& problem, const Vector& v) {
  require_finite(v, "regularized_bellman_apply input");
  const TabularMDP& mdp = problem.mdp;
  return regularized_state_reward(problem) + mdp.gamma * (transition_under(mdp, problem.q) * v);
}

Matrix soft_optimal_q(const TabularMDP& mdp, const Matrix& pi, double alpha) {
  if (!(alpha > 0.0)) throw DomainError("soft_optimal_q: alpha must be positive");
  const Matrix q_values = tabular_exact_q(mdp, pi);
  Matrix q(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s) {
    // log q(a|x) = log pi + Q/alpha - logsumexp(...); states where pi puts
    // zero mass on an action keep zero mass.
    Vector logits = Vector::Constant(mdp.n_actions, -std::numeric_limits<double>::infinity());
    for (int a = 0; a < mdp.n_actions; ++a)
      if (pi(s, a) > 0.0) logits[a] = std::log(pi(s, a)) + q_values(s, a) / alpha;
    const double m = logits.maxCoeff();
    double z = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a)
      if (std::isfinite(logits[a])) z += std::exp(logits[a] - m);
    for (int a = 0; a < mdp.n_actions; ++a)
      q(s, a) = std::isfinite(logits[a]) ? std::exp(logits[a] - m) / z : 0.0;
  }
  return q;
}

Matrix TabularSoftmaxPolicy::distribution() const {
  Matrix pi(theta.rows(), theta.cols());
  for (Index s = 0; s < theta.rows(); ++s) {
    const double m = theta.row(s).maxCoeff();
    const Eigen::ArrayXd e = (theta.row(s).array() - m).exp();
    pi.row(s) = e / e.sum();
  }
  return pi;
}

std::vector<ImprovementRecord> improvement_iteration(const TabularMDP& mdp,
                                                     const TabularSoftmaxPolicy& theta0,
                                                     double alpha, double step_size,
                                                     int iterations) {
  require(iterations >= 1, "improvement_iteration: need at least one iteration");
  if (!(step_size > 0.0)) throw DomainError("improvement_iteration: step size must be positive");

  std::vector<ImprovementRecord> records;
  records.reserve(iterations);
  TabularSoftmaxPolicy policy = theta0;
  for (int i = 0; i < iterations; ++i) {
    const Matrix pi = policy.distribution();
    const Matrix q = soft_optimal_q(mdp, pi, alpha);
    RegularizedProblem problem{mdp, alpha, pi, q};
    const double value = mdp.initial_dist.dot(regularized_value(problem));
    if (!std::isfinite(value))
      throw NumericError("improvement_iteration: non-finite objective (step size too large?)");
    records.push_back({policy.theta, q, value});

    // Exact gradient of the occupancy-weighted KL(q_i || pi_theta) at theta_i:
    // d/d theta(x,b) = occupancy(x) * (pi(b|x) - q(b|x)).
    const Vector occupancy = discounted_occupancy(mdp, pi);
    const Matrix grad = occupancy.asDiagonal() * (pi - q);
    policy.theta -= step_size * grad;
  }
  return records;
}

MonotoneBetaResult find_monotone_beta(const TabularMDP& mdp, const TabularSoftmaxPolicy& theta0,
                                      double alpha, int iterations, double beta0, double tolerance,
                                      int max_halvings) {
  double beta = beta0;
  for (int h = 0; h <= max_halvings; ++h, beta *= 0.5) {
    auto trace = improvement_iteration(mdp, theta0, alpha, beta, iterations);
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < trace.size(); ++i)
      if (trace[i + 1].value - trace[i].value < -tolerance) {
        monotone = false;
        break;
      }
    if (monotone) return {beta, std::move(trace), h};
  }
  throw NumericError("find_monotone_beta: no monotone step size found");
}

}  // namespace mpo
