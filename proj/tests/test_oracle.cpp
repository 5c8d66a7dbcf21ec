#include <doctest.h>

#include "mpo_lab/oracle.hpp"

using namespace mpo;

namespace {

RegularizedProblem random_problem(Rng& rng, int states = 6, int actions = 3, double gamma = 0.9) {
  TabularMDP mdp = random_mdp(states, actions, gamma, rng);
  return RegularizedProblem{mdp, rng.uniform(0.2, 2.0),
                            random_policy_table(states, actions, rng),
                            random_policy_table(states, actions, rng)};
}

}  // namespace

TEST_CASE("q equal to pi removes the penalty") {
  Rng rng(1);
  RegularizedProblem problem = random_problem(rng);
  problem.q = problem.pi;
  for (int s = 0; s < problem.mdp.n_states; ++s)
    for (int a = 0; a < problem.mdp.n_actions; ++a)
      CHECK(regularized_reward(problem, s, a) == doctest::Approx(problem.mdp.reward(s, a)));
  const Vector v_reg = regularized_value(problem);
  const Vector v_q = tabular_exact_v(problem.mdp, problem.q);
  CHECK((v_reg - v_q).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero rewards with q equal to pi give zero value") {
  Rng rng(2);
  RegularizedProblem problem = random_problem(rng);
  problem.mdp.reward.setZero();
  problem.q = problem.pi;
  CHECK(regularized_value(problem).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("two-action closed form for the regularized reward") {
  TabularMDP mdp = make_deterministic_chain(1, 0.9);
  mdp.n_actions = 2;
  mdp.transition = {Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  mdp.reward = Matrix::Zero(1, 2);
  mdp.validate();
  const double delta = 0.25, alpha = 0.7;
  Matrix pi(1, 2), q(1, 2);
  pi << 0.5, 0.5;
  q << 1.0 - delta, delta;
  RegularizedProblem problem{mdp, alpha, pi, q};
  CHECK(regularized_reward(problem, 0, 0) ==
        doctest::Approx(-alpha * std::log(2.0 * (1.0 - delta))).epsilon(1e-12));

  // scaling alpha by two doubles the penalty component
  RegularizedProblem doubled = problem;
  doubled.alpha = 2.0 * alpha;
  CHECK(regularized_reward(doubled, 0, 1) - mdp.reward(0, 1) ==
        doctest::Approx(2.0 * (regularized_reward(problem, 0, 1) - mdp.reward(0, 1))));
}

TEST_CASE("absolute continuity violations raise a domain error") {
  Rng rng(3);
  RegularizedProblem problem = random_problem(rng, 3, 2);
  problem.q(0, 0) = 0.0;
  problem.q(0, 1) = 1.0;
  CHECK_THROWS_AS(regularized_reward(problem, 0, 0), DomainError);
  CHECK_THROWS_AS(problem.validate(), DomainError);
}

TEST_CASE("regularized value satisfies its Bellman equation") {
  Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    RegularizedProblem problem = random_problem(rng);
    const Vector v = regularized_value(problem);
    CHECK((regularized_bellman_apply(problem, v) - v).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("zero value vector stays zero under the operator with zero rewards") {
  Rng rng(5);
  RegularizedProblem problem = random_problem(rng);
  problem.mdp.reward.setZero();
  problem.q = problem.pi;
  const Vector v = regularized_bellman_apply(problem, Vector(Vector::Zero(problem.mdp.n_states)));
  CHECK(v.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("regularized operator contracts at rate gamma") {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    RegularizedProblem problem = random_problem(rng);
    const Vector v1 = 10.0 * rng.normal_vector(problem.mdp.n_states);
    const Vector v2 = 10.0 * rng.normal_vector(problem.mdp.n_states);
    const double lhs = (regularized_bellman_apply(problem, v1) -
                        regularized_bellman_apply(problem, v2)).cwiseAbs().maxCoeff();
    CHECK(lhs <= problem.mdp.gamma * (v1 - v2).cwiseAbs().maxCoeff() + 1e-12);
  }
}

TEST_CASE("repeated operator application converges to the linear-solve value") {
  Rng rng(7);
  RegularizedProblem problem = random_problem(rng);
  const Vector v_star = regularized_value(problem);
  Vector v = Vector::Zero(problem.mdp.n_states);
  double prev_err = (v - v_star).cwiseAbs().maxCoeff();
  for (int it = 0; it < 200; ++it) {
    v = regularized_bellman_apply(problem, v);
    const double err = (v - v_star).cwiseAbs().maxCoeff();
    CHECK(err <= problem.mdp.gamma * prev_err + 1e-12);
    prev_err = err;
  }
  CHECK(prev_err < 1e-9);
}

TEST_CASE("constant Q rows leave the soft-optimal policy at pi") {
  Rng rng(8);
  TabularMDP mdp = random_mdp(4, 3, 0.9, rng);
  mdp.reward.setZero();  // exact Q is zero everywhere, constant across actions
  const Matrix pi = random_policy_table(4, 3, rng);
  const Matrix q = soft_optimal_q(mdp, pi, 0.5);
  CHECK((q - pi).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("softmax evaluation for a two-action soft-optimal policy") {
  // One state, two self-loop actions, gamma = 0, so Q = r = (1, 0) exactly.
  TabularMDP mdp;
  mdp.n_states = 1;
  mdp.n_actions = 2;
  mdp.transition = {Matrix::Ones(1, 1), Matrix::Ones(1, 1)};
  mdp.reward = Matrix(1, 2);
  mdp.reward << 1.0, 0.0;
  mdp.gamma = 0.0;
  mdp.initial_dist = Vector::Ones(1);
  mdp.validate();
  Matrix pi(1, 2);
  pi << 0.5, 0.5;
  const Matrix q = soft_optimal_q(mdp, pi, 1.0);
  CHECK(q(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-9));
  CHECK(q(0, 0) == doctest::Approx(0.7311).epsilon(1e-3));
  CHECK(q(0, 1) == doctest::Approx(0.2689).epsilon(1e-3));
}

TEST_CASE("huge alpha recovers pi") {
  Rng rng(9);
  TabularMDP mdp = random_mdp(5, 4, 0.9, rng);
  const Matrix pi = random_policy_table(5, 4, rng);
  const Matrix q = soft_optimal_q(mdp, pi, 1e8);
  CHECK((q - pi).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("single state single action improvement iteration is constant") {
  TabularMDP mdp = make_deterministic_chain(1, 0.9);
  TabularSoftmaxPolicy theta0{Matrix::Zero(1, 1)};
  const auto trace = improvement_iteration(mdp, theta0, 0.5, 1e-2, 20);
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i].value == doctest::Approx(trace[0].value).epsilon(1e-12));
}

TEST_CASE("gradient vanishes when pi already matches the soft-optimal q") {
  // With zero rewards q_i = pi exactly, and uniform rows are representable,
  // so a gradient step must not move theta.
  Rng rng(10);
  TabularMDP mdp = random_mdp(4, 3, 0.9, rng);
  mdp.reward.setZero();
  TabularSoftmaxPolicy theta0{Matrix::Zero(4, 3)};
  const auto trace = improvement_iteration(mdp, theta0, 0.5, 1e-2, 2);
  CHECK((trace[1].theta - trace[0].theta).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("improvement iteration is monotone on random MDPs for small beta") {
  for (std::uint64_t i = 0; i < 3; ++i) {
    Rng rng(200 + i);
    TabularMDP mdp = random_mdp(10, 5, 0.9, rng);
    TabularSoftmaxPolicy theta0{Matrix::Zero(10, 5)};
    const auto result = find_monotone_beta(mdp, theta0, 0.5, 201, 1e-2, 1e-9);
    REQUIRE(result.trace.size() == 201);
    double min_step = 0.0;
    for (std::size_t k = 0; k + 1 < result.trace.size(); ++k)
      min_step = std::min(min_step, result.trace[k + 1].value - result.trace[k].value);
    CHECK(min_step >= -1e-9);
    CHECK(result.beta > 0.0);
  }
}

TEST_CASE("improvement values rise substantially from a cold start") {
  Rng rng(11);
  TabularMDP mdp = random_mdp(8, 4, 0.9, rng);
  TabularSoftmaxPolicy theta0{Matrix::Zero(8, 4)};
  const auto trace = improvement_iteration(mdp, theta0, 0.5, 1e-2, 100);
  CHECK(trace.back().value > trace.front().value);
}
