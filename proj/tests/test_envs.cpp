#include <doctest.h>

#include "mpo_lab/control_env.hpp"

using namespace mpo;

TEST_CASE("point mass reset is deterministic under a fixed seed") {
  const ContinuousEnv env = ContinuousEnv::point_mass();
  Rng a(17), b(17);
  const Vector s1 = env_reset(env, a);
  const Vector s2 = env_reset(env, b);
  CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0);
  CHECK(s1.tail<2>().isZero(0.0));
}

TEST_CASE("point mass at the origin with zero action stays put at max reward") {
  const ContinuousEnv env = ContinuousEnv::point_mass();
  const Vector origin = Vector::Zero(4);
  const StepResult r = env_step(env, origin, Vector::Zero(2));
  CHECK(r.next_state.isZero(0.0));
  CHECK(r.reward == 0.0);
  // any other state scores strictly worse
  Vector off(4);
  off << 0.2, 0.0, 0.1, 0.0;
  CHECK(env_step(env, off, Vector::Zero(2)).reward < 0.0);
}

TEST_CASE("point mass integrates the double integrator") {
  const ContinuousEnv env = ContinuousEnv::point_mass();
  Vector s(4);
  s << 0.0, 0.0, 1.0, -1.0;
  Vector u(2);
  u << 0.5, 0.5;
  const StepResult r = env_step(env, s, u);
  CHECK(r.next_state[0] == doctest::Approx(0.05));
  CHECK(r.next_state[1] == doctest::Approx(-0.05));
  CHECK(r.next_state[2] == doctest::Approx(1.025));
  CHECK(r.next_state[3] == doctest::Approx(-0.975));
}

TEST_CASE("pendulum reset angles and velocities stay in range over 1000 seeds") {
  const ContinuousEnv env = ContinuousEnv::pendulum();
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const Vector s = env_reset(env, rng);
    const double angle = pendulum_angle(s);
    CHECK(angle >= -M_PI);
    CHECK(angle <= M_PI);
    CHECK(std::abs(std::abs(angle) - M_PI) <= 0.1 + 1e-12);  // near hanging
    CHECK(std::abs(s[2]) <= 0.1 + 1e-12);
    CHECK(s.head<2>().norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("pendulum energy is conserved under zero torque to 1e-3 per step") {
  const ContinuousEnv env = ContinuousEnv::pendulum();
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const double theta = rng.uniform(-M_PI, M_PI);
    const double omega = rng.uniform(-6.0, 6.0);
    Vector s(3);
    s << std::cos(theta), std::sin(theta), omega;
    const double before = pendulum_energy(s);
    const StepResult r = env_step(env, s, Vector::Zero(1));
    const double after = pendulum_energy(r.next_state);
    CHECK(std::abs(after - before) < 1e-3);
  }
}

TEST_CASE("pendulum reward penalizes angle, speed and torque") {
  const ContinuousEnv env = ContinuousEnv::pendulum();
  Vector upright(3);
  upright << 1.0, 0.0, 0.0;
  CHECK(env_step(env, upright, Vector::Zero(1)).reward == 0.0);
  Vector hanging(3);
  hanging << -1.0, 0.0, 0.0;
  CHECK(env_step(env, hanging, Vector::Zero(1)).reward == doctest::Approx(-M_PI * M_PI));
  const double torque_only = env_step(env, upright, Vector::Constant(1, 1.0)).reward;
  CHECK(torque_only == doctest::Approx(-0.001));
}

TEST_CASE("actions are clipped to the bounds") {
  const ContinuousEnv env = ContinuousEnv::pendulum();
  Vector s(3);
  s << 1.0, 0.0, 0.0;
  const StepResult big = env_step(env, s, Vector::Constant(1, 50.0));
  const StepResult at_limit = env_step(env, s, Vector::Constant(1, 2.0));
  CHECK(big.reward == at_limit.reward);
  CHECK((big.next_state - at_limit.next_state).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("environments are deterministic functions of seed and actions") {
  const ContinuousEnv env = ContinuousEnv::pendulum();
  Rng r1(5), r2(5), actions(99);
  Vector s1 = env_reset(env, r1);
  Vector s2 = env_reset(env, r2);
  for (int t = 0; t < 50; ++t) {
    const Vector u = Vector::Constant(1, actions.uniform(-2.0, 2.0));
    s1 = env_step(env, s1, u).next_state;
    s2 = env_step(env, s2, u).next_state;
  }
  CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unknown environment ids are rejected") {
  CHECK_THROWS_AS(make_env("cartpole", 100), DomainError);
}
