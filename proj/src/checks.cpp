#include "mpo_lab/checks.hpp"

#include <cmath>
#include <sstream>

#include "mpo_lab/oracle.hpp"
#include "mpo_lab/replay.hpp"
#include "mpo_lab/retrace.hpp"

namespace mpo {
namespace checks {
namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

struct Gap {
  double worst = 0.0;
  void track(double g) { worst = std::max(worst, g); }
};

TabularMDP draw_mdp(Rng& rng, int min_states = 2, int max_states = 8, int min_actions = 2,
                    int max_actions = 5, double gamma = 0.9) {
  const int s = min_states + static_cast<int>(rng.uniform_index(max_states - min_states + 1));
  const int a = min_actions + static_cast<int>(rng.uniform_index(max_actions - min_actions + 1));
  return random_mdp(s, a, gamma, rng);
}

}  // namespace

bool CheckReport::all_passed() const {
  for (const auto& line : lines)
    if (!line.passed) return false;
  return true;
}

std::string CheckReport::to_string() const {
  std::ostringstream os;
  os << "suite: " << suite << "\n";
  for (const auto& line : lines)
    os << (line.passed ? "PASS" : "FAIL") << "  " << line.name
       << (line.detail.empty() ? "" : "  (" + line.detail + ")") << "\n";
  os << (all_passed() ? "all checks passed" : "CHECKS FAILED") << "\n";
  return os.str();
}

SimplexSearchResult simplex_constrained_search(const Vector& q_values, const Vector& prior,
                                               double kl_bound) {
  const Index n = q_values.size();
  auto kl_from_prior = [&](const Vector& q) {
    double kl = 0.0;
    for (Index i = 0; i < n; ++i)
      if (q[i] > 0.0) kl += q[i] * std::log(q[i] / prior[i]);
    return kl;
  };

  Vector q = prior;  // feasible start
  double best = q.dot(q_values);
  double step = 0.25;
  while (step > 1e-9) {
    bool improved = false;
    for (Index to = 0; to < n; ++to) {
      for (Index from = 0; from < n; ++from) {
        if (to == from || q[from] <= 0.0) continue;
        const double delta = std::min(step, q[from]);
        Vector candidate = q;
        candidate[to] += delta;
        candidate[from] -= delta;
        const double value = candidate.dot(q_values);
        if (value > best + 1e-15 && kl_from_prior(candidate) <= kl_bound) {
          q = std::move(candidate);
          best = value;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return {q, best};
}

Matrix exact_retrace_apply(const TabularMDP& mdp, const Matrix& target_policy,
                           const Matrix& behavior_policy, const Matrix& q) {
  const int S = mdp.n_states, A = mdp.n_actions;
  const int n = S * A;
  auto idx = [A](int s, int a) { return s * A + a; };

  // Expected TD error under the target policy.
  const Vector v_pi = (target_policy.array() * q.array()).rowwise().sum();
  Vector delta(n);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      delta[idx(s, a)] = mdp.reward(s, a) + mdp.gamma * mdp.transition[a].row(s).dot(v_pi) -
                         q(s, a);

  // Sub-stochastic propagation with clipped importance weights:
  // weight(y, a') = b(a'|y) * min(1, pi/b) = min(b, pi).
  Matrix propagate = Matrix::Zero(n, n);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a)
      for (int y = 0; y < S; ++y)
        for (int ap = 0; ap < A; ++ap)
          propagate(idx(s, a), idx(y, ap)) =
              mdp.gamma * mdp.transition[a](s, y) *
              std::min(behavior_policy(y, ap), target_policy(y, ap));

  const Matrix system = Matrix::Identity(n, n) - propagate;
  const Vector correction = system.partialPivLu().solve(delta);

  Matrix result(S, A);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) result(s, a) = q(s, a) + correction[idx(s, a)];
  return result;
}

CheckReport run_oracle_checks(std::uint64_t seed) {
  CheckReport report;
  report.suite = "oracle";
  Rng rng = derive_stream(seed, "oracle-checks");

  {  // Value inequality V^{pi,q}_alpha <= V^q and the operator counterpart.
    Gap value_gap, op_gap;
    bool ok_value = true, ok_op = true;
    for (int i = 0; i < 100; ++i) {
      TabularMDP mdp = draw_mdp(rng);
      RegularizedProblem problem{mdp, rng.uniform(0.1, 2.0),
                                 random_policy_table(mdp.n_states, mdp.n_actions, rng),
                                 random_policy_table(mdp.n_states, mdp.n_actions, rng)};
      const Vector v_reg = regularized_value(problem);
      const Vector v_q = tabular_exact_v(mdp, problem.q);
      value_gap.track((v_reg - v_q).maxCoeff());
      ok_value = ok_value && (v_reg.array() <= v_q.array() + 1e-12).all();

      const Vector v = 5.0 * rng.normal_vector(mdp.n_states);
      const Vector t_reg = regularized_bellman_apply(problem, v);
      const Vector t_q = bellman_apply(mdp, problem.q, v);
      op_gap.track((t_reg - t_q).maxCoeff());
      ok_op = ok_op && (t_reg.array() <= t_q.array() + 1e-12).all();
    }
    report.lines.push_back({"proposition1_value_inequality", ok_value,
                            "max V_reg - V_q = " + fmt(value_gap.worst)});
    report.lines.push_back(
        {"proposition1_operator_inequality", ok_op, "max T_reg - T_q = " + fmt(op_gap.worst)});
  }

  {  // E-step improvement: V^{pi,q_i}_alpha >= V^{pi} with the soft-optimal q.
    bool ok = true;
    Gap gap;
    for (int i = 0; i < 50; ++i) {
      TabularMDP mdp = draw_mdp(rng);
      const Matrix pi = random_policy_table(mdp.n_states, mdp.n_actions, rng);
      const double alpha = rng.uniform(0.1, 2.0);
      const Matrix q = soft_optimal_q(mdp, pi, alpha);
      RegularizedProblem problem{mdp, alpha, pi, q};
      const Vector v_reg = regularized_value(problem);
      const Vector v_pi = tabular_exact_v(mdp, pi);
      gap.track((v_pi - v_reg).maxCoeff());
      ok = ok && (v_reg.array() >= v_pi.array() - 1e-12).all();
    }
    report.lines.push_back({"estep_improvement", ok, "max V_pi - V_reg = " + fmt(gap.worst)});
  }

  {  // Fixed point and contraction of the regularized operator.
    bool ok_fixed = true, ok_contract = true;
    Gap residual;
    for (int i = 0; i < 50; ++i) {
      TabularMDP mdp = draw_mdp(rng);
      RegularizedProblem problem{mdp, rng.uniform(0.1, 2.0),
                                 random_policy_table(mdp.n_states, mdp.n_actions, rng),
                                 random_policy_table(mdp.n_states, mdp.n_actions, rng)};
      const Vector v_star = regularized_value(problem);
      residual.track((regularized_bellman_apply(problem, v_star) - v_star).cwiseAbs().maxCoeff());
      ok_fixed = ok_fixed && residual.worst <= 1e-10;

      const Vector v1 = 5.0 * rng.normal_vector(mdp.n_states);
      const Vector v2 = 5.0 * rng.normal_vector(mdp.n_states);
      const double lhs = (regularized_bellman_apply(problem, v1) -
                          regularized_bellman_apply(problem, v2)).cwiseAbs().maxCoeff();
      ok_contract = ok_contract && lhs <= mdp.gamma * (v1 - v2).cwiseAbs().maxCoeff() + 1e-12;
    }
    report.lines.push_back(
        {"regularized_bellman_fixed_point", ok_fixed, "max residual = " + fmt(residual.worst)});
    report.lines.push_back({"regularized_bellman_contraction", ok_contract, ""});
  }

  {  // Soft-optimal rows: distributions, and q/pi peaks at the argmax of Q.
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      TabularMDP mdp = draw_mdp(rng);
      const Matrix pi = random_policy_table(mdp.n_states, mdp.n_actions, rng);
      const double alpha = rng.uniform(0.1, 2.0);
      const Matrix q = soft_optimal_q(mdp, pi, alpha);
      const Matrix q_values = tabular_exact_q(mdp, pi);
      for (int s = 0; s < mdp.n_states && ok; ++s) {
        ok = std::abs(q.row(s).sum() - 1.0) <= 1e-12;
        Index argmax = 0;
        q_values.row(s).maxCoeff(&argmax);
        const Eigen::ArrayXd ratio = q.row(s).array() / pi.row(s).array();
        ok = ok && ratio[argmax] >= ratio.maxCoeff() - 1e-12;
      }
    }
    report.lines.push_back({"soft_optimal_rows", ok, ""});
  }

  {  // Proposition 3: non-decreasing J_i on 10 seeded MDPs.
    bool ok = true;
    double worst_drop = 0.0;
    std::string betas;
    for (int i = 0; i < 10; ++i) {
      Rng mdp_rng = derive_stream(seed, "oracle-monotone", i);
      TabularMDP mdp = random_mdp(10, 5, 0.9, mdp_rng);
      TabularSoftmaxPolicy theta0{Matrix::Zero(10, 5)};
      const auto result = find_monotone_beta(mdp, theta0, 0.5, 201, 1e-2, 1e-9);
      for (std::size_t k = 0; k + 1 < result.trace.size(); ++k)
        worst_drop = std::min(worst_drop, result.trace[k + 1].value - result.trace[k].value);
      ok = ok && result.trace.size() == 201;
      betas += (i ? "," : "") + fmt(result.beta);
    }
    ok = ok && worst_drop >= -1e-9;
    report.lines.push_back({"monotonic_improvement", ok,
                            "min J step = " + fmt(worst_drop) + "; beta = " + betas});
  }

  return report;
}

CheckReport run_estep_checks(std::uint64_t seed) {
  CheckReport report;
  report.suite = "estep";
  Rng rng = derive_stream(seed, "estep-checks");

  auto random_batch = [&](Rng& r) {
    const int states = 1 + static_cast<int>(r.uniform_index(8));
    const int samples = 2 + static_cast<int>(r.uniform_index(9));
    const double scale = std::exp(r.uniform(std::log(0.1), std::log(10.0)));
    return EStepBatch::from_q_values(scale * r.normal_matrix(states, samples));
  };

  {  // Convexity of g on a 30-point log grid via divided second differences.
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const EStepBatch batch = random_batch(rng);
      std::vector<double> etas(30), values(30);
      for (int k = 0; k < 30; ++k) {
        etas[k] = std::pow(10.0, -3.0 + 6.0 * k / 29.0);
        values[k] = dual_value_and_grad(etas[k], batch, 0.1).value;
      }
      for (int k = 1; k + 1 < 30; ++k) {
        const double h1 = etas[k] - etas[k - 1];
        const double h2 = etas[k + 1] - etas[k];
        const double second =
            2.0 * ((values[k + 1] - values[k]) / h2 - (values[k] - values[k - 1]) / h1) /
            (h1 + h2);
        worst = std::min(worst, second);
      }
    }
    ok = worst >= -1e-8;
    report.lines.push_back({"dual_convexity", ok, "min second difference = " + fmt(worst)});
  }

  {  // Analytic dg/deta against central finite differences.
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const EStepBatch batch = random_batch(rng);
      const double eta = std::exp(rng.uniform(std::log(0.05), std::log(50.0)));
      const double h = 1e-5 * eta;
      const double g_plus = dual_value_and_grad(eta + h, batch, 0.1).value;
      const double g_minus = dual_value_and_grad(eta - h, batch, 0.1).value;
      const double fd = (g_plus - g_minus) / (2.0 * h);
      const double an = dual_value_and_grad(eta, batch, 0.1).grad;
      const double err = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      worst = std::max(worst, err);
    }
    ok = worst <= 1e-6;
    report.lines.push_back({"dual_gradient_consistency", ok, "max rel err = " + fmt(worst)});
  }

  {  // Equivalence with the constrained simplex search on exact discrete
     // single-state problems, and KL activation at interior optima.
    bool ok_value = true, ok_kl = true;
    double worst_gap = 0.0, worst_kl = 0.0;
    const double epsilon = 0.1;
    for (int i = 0; i < 50; ++i) {
      const int n = 2 + static_cast<int>(rng.uniform_index(9));
      const Vector prior = rng.dirichlet_uniform(n);
      const double scale = std::exp(rng.uniform(std::log(0.5), std::log(3.0)));
      const Vector q_values = scale * rng.normal_vector(n);

      EStepBatch batch;
      batch.q_values = q_values.transpose();
      batch.log_prior = prior.array().log().transpose();
      batch.ref_log_probs = batch.log_prior;

      const EtaSolution eta = solve_eta(batch, epsilon);
      const Matrix weights = estep_weights(eta.eta, batch);
      const double achieved = weights.row(0).dot(q_values);

      const SimplexSearchResult oracle = simplex_constrained_search(q_values, prior, epsilon);
      worst_gap = std::max(worst_gap, std::abs(achieved - oracle.expected_q));
      ok_value = ok_value && std::abs(achieved - oracle.expected_q) <= 1e-4;

      if (eta.interior) {
        const double kl = estep_sample_kl(weights, batch.log_prior);
        worst_kl = std::max(worst_kl, std::abs(kl - epsilon));
        ok_kl = ok_kl && std::abs(kl - epsilon) <= 1e-3;
      }
    }
    report.lines.push_back(
        {"oracle_equivalence", ok_value, "max |E_q[Q] gap| = " + fmt(worst_gap)});
    report.lines.push_back({"kl_activation", ok_kl, "max |KL - eps| = " + fmt(worst_kl)});
  }

  {  // Weight ranking follows Q ranking within each state.
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      const EStepBatch batch = random_batch(rng);
      const double eta = std::exp(rng.uniform(std::log(0.05), std::log(50.0)));
      const Matrix weights = estep_weights(eta, batch);
      for (Index s = 0; s < batch.num_states() && ok; ++s)
        for (Index a = 0; a < batch.samples_per_state() && ok; ++a)
          for (Index b = 0; b < batch.samples_per_state() && ok; ++b)
            if (batch.q_values(s, a) > batch.q_values(s, b))
              ok = weights(s, a) >= weights(s, b) - 1e-12;
    }
    report.lines.push_back({"weight_rank_agreement", ok, ""});
  }

  {  // Joint rescaling: g(k eta; k Q) = k g(eta; Q) and identical weights.
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const EStepBatch batch = random_batch(rng);
      EStepBatch scaled = batch;
      const double k = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
      scaled.q_values *= k;
      const double eta = std::exp(rng.uniform(std::log(0.05), std::log(50.0)));

      const double g = dual_value_and_grad(eta, batch, 0.1).value;
      const double g_scaled = dual_value_and_grad(k * eta, scaled, 0.1).value;
      worst = std::max(worst, std::abs(g_scaled - k * g) / std::max(1.0, std::abs(k * g)));

      const Matrix w = estep_weights(eta, batch);
      const Matrix w_scaled = estep_weights(k * eta, scaled);
      worst = std::max(worst, (w - w_scaled).cwiseAbs().maxCoeff());
    }
    ok = worst <= 1e-9;
    report.lines.push_back({"scaling_identity", ok, "max deviation = " + fmt(worst)});
  }

  return report;
}

CheckReport run_retrace_checks(std::uint64_t seed) {
  CheckReport report;
  report.suite = "retrace";
  Rng rng = derive_stream(seed, "retrace-checks");

  {  // Q^pi is a fixed point of the exact-expectation operator.
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      TabularMDP mdp = draw_mdp(rng, 4, 6, 2, 4);
      const Matrix pi = random_policy_table(mdp.n_states, mdp.n_actions, rng);
      const Matrix b = random_policy_table(mdp.n_states, mdp.n_actions, rng);
      const Matrix q_pi = tabular_exact_q(mdp, pi);
      const Matrix applied = exact_retrace_apply(mdp, pi, b, q_pi);
      worst = std::max(worst, (applied - q_pi).cwiseAbs().maxCoeff());
    }
    ok = worst <= 1e-8;
    report.lines.push_back({"exact_fixed_point", ok, "max residual = " + fmt(worst)});
  }

  {  // Iterating the exact operator from zero converges to Q^pi.
    bool ok = true;
    double worst = 0.0;
    for (int i = 0; i < 10; ++i) {
      TabularMDP mdp = draw_mdp(rng, 4, 6, 2, 4);
      const Matrix pi = random_policy_table(mdp.n_states, mdp.n_actions, rng);
      const Matrix b = random_policy_table(mdp.n_states, mdp.n_actions, rng);
      const Matrix q_pi = tabular_exact_q(mdp, pi);
      Matrix q = Matrix::Zero(mdp.n_states, mdp.n_actions);
      double err = (q - q_pi).cwiseAbs().maxCoeff();
      for (int it = 0; it < 500 && err > 1e-6; ++it) {
        q = exact_retrace_apply(mdp, pi, b, q);
        err = (q - q_pi).cwiseAbs().maxCoeff();
      }
      worst = std::max(worst, err);
    }
    ok = worst <= 1e-6;
    report.lines.push_back({"exact_convergence", ok, "max final error = " + fmt(worst)});
  }

  {  // Importance weights are clipped at 1: raising pi above b changes nothing.
    bool ok = true;
    for (int i = 0; i < 50 && ok; ++i) {
      const int len = 2 + static_cast<int>(rng.uniform_index(7));
      std::vector<RetraceStep> on_policy(len), over(len);
      for (int t = 0; t < len; ++t) {
        RetraceStep s;
        s.reward = rng.normal();
        s.q_target = rng.normal();
        s.expected_next_q = rng.normal();
        s.behavior_log_prob = rng.normal();
        s.log_pi = s.behavior_log_prob;
        on_policy[t] = s;
        s.log_pi = s.behavior_log_prob + std::abs(rng.normal());
        over[t] = s;
      }
      const auto t_on = retrace_targets(std::span<const RetraceStep>(on_policy), 0.9);
      const auto t_over = retrace_targets(std::span<const RetraceStep>(over), 0.9);
      for (int t = 0; t < len; ++t) ok = ok && t_on[t] == t_over[t];
    }
    report.lines.push_back({"clipped_importance_weights", ok, ""});
  }

  {  // Sampled targets built around the exact Q^pi are unbiased.
    TabularMDP mdp = random_mdp(6, 3, 0.9, rng);
    const Matrix pi = random_policy_table(mdp.n_states, mdp.n_actions, rng);
    const Matrix b = random_policy_table(mdp.n_states, mdp.n_actions, rng);
    const Matrix q_pi = tabular_exact_q(mdp, pi);
    const Vector v_pi = (pi.array() * q_pi.array()).rowwise().sum();

    ReplayBuffer buffer(1000000);
    for (int traj = 0; traj < 300; ++traj) {
      Trajectory t;
      int s = sample_initial_state(mdp, rng);
      for (int step = 0; step < 30; ++step) {
        const int a = static_cast<int>(rng.sample_categorical(b.row(s).transpose()));
        const int next = sample_next_state(mdp, s, a, rng);
        Transition tr;
        tr.state = Vector::Constant(1, s);
        tr.action = Vector::Constant(1, a);
        tr.reward = mdp.reward(s, a);
        tr.next_state = Vector::Constant(1, next);
        tr.behavior_log_prob = std::log(b(s, a));
        t.push_back(std::move(tr));
        s = next;
      }
      buffer.append(std::move(t));
    }

    double sum = 0.0, sum_sq = 0.0;
    const int n_windows = 10000;
    const auto windows = buffer.sample_windows(n_windows, 8, rng);
    for (const auto& window : windows) {
      std::vector<RetraceStep> steps(window.length());
      for (int t = 0; t < window.length(); ++t) {
        const Transition& tr = window.transitions[t];
        const int s = static_cast<int>(tr.state[0]);
        const int a = static_cast<int>(tr.action[0]);
        const int next = static_cast<int>(tr.next_state[0]);
        steps[t] = RetraceStep{tr.reward, q_pi(s, a), v_pi[next], std::log(pi(s, a)),
                               tr.behavior_log_prob, false};
      }
      const auto targets = retrace_targets(std::span<const RetraceStep>(steps), mdp.gamma);
      const Transition& first = window.transitions.front();
      const double diff = targets[0] - q_pi(static_cast<int>(first.state[0]),
                                            static_cast<int>(first.action[0]));
      sum += diff;
      sum_sq += diff * diff;
    }
    const double mean = sum / n_windows;
    const double variance = std::max(sum_sq / n_windows - mean * mean, 0.0);
    const double stderr_mean = std::sqrt(variance / n_windows);
    const bool ok = std::abs(mean) <= 3.0 * std::max(stderr_mean, 1e-12);
    report.lines.push_back({"sampled_target_bias", ok,
                            "mean = " + fmt(mean) + ", 3se = " + fmt(3.0 * stderr_mean)});
  }

  return report;
}

}  // namespace checks
}  // namespace mpo
