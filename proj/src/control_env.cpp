#include "mpo_lab/control_env.hpp"

#include <cmath>

namespace mpo {
namespace {

// Pendulum constants: unit rod with gravity 10, torque limit 2, velocity
// clamp 8. theta = 0 is upright.
constexpr double kGravityTerm = 15.0;  // 3 g / (2 l)
constexpr double kTorqueTerm = 3.0;    // 3 / (m l^2)
constexpr double kTorqueLimit = 2.0;
constexpr double kMaxSpeed = 8.0;

double wrap_angle(double theta) {
  return theta - 2.0 * M_PI * std::floor((theta + M_PI) / (2.0 * M_PI));
}

struct PendulumDeriv {
  double dtheta, domega;
};

PendulumDeriv pendulum_deriv(double theta, double omega, double torque) {
  return {omega, kGravityTerm * std::sin(theta) + kTorqueTerm * torque};
}

}  // namespace

ContinuousEnv ContinuousEnv::point_mass(int horizon) {
  ContinuousEnv env;
  env.id = EnvId::kPointMass;
  env.state_dim = 4;
  env.action_dim = 2;
  env.horizon = horizon;
  env.action_low = Vector::Constant(2, -1.0);
  env.action_high = Vector::Constant(2, 1.0);
  env.dt = 0.05;
  return env;
}

ContinuousEnv ContinuousEnv::pendulum(int horizon) {
  ContinuousEnv env;
  env.id = EnvId::kPendulum;
  env.state_dim = 3;
  env.action_dim = 1;
  env.horizon = horizon;
  env.action_low = Vector::Constant(1, -kTorqueLimit);
  env.action_high = Vector::Constant(1, kTorqueLimit);
  env.dt = 0.05;
  return env;
}

ContinuousEnv make_env(const std::string& id, int horizon) {
  if (id == "point_mass") return ContinuousEnv::point_mass(horizon);
  if (id == "pendulum") return ContinuousEnv::pendulum(horizon);
  throw DomainError("make_env: unknown environment id '" + id + "'");
}

Vector env_reset(const ContinuousEnv& env, Rng& rng) {
  if (env.id == EnvId::kPointMass) {
    Vector s = Vector::Zero(4);
    s[0] = rng.uniform(-1.0, 1.0);
    s[1] = rng.uniform(-1.0, 1.0);
    return s;
  }
  // Hanging down with small noise.
  const double theta = wrap_angle(M_PI + rng.uniform(-0.1, 0.1));
  const double omega = rng.uniform(-0.1, 0.1);
  Vector s(3);
  s << std::cos(theta), std::sin(theta), omega;
  return s;
}

Vector clip_action(const ContinuousEnv& env, const Vector& action) {
  if (action.size() != env.action_dim) throw DimensionError("clip_action: action size");
  return action.cwiseMax(env.action_low).cwiseMin(env.action_high);
}

StepResult env_step(const ContinuousEnv& env, const Vector& state, const Vector& action) {
  if (state.size() != env.state_dim) throw DimensionError("env_step: state size");
  const Vector u = clip_action(env, action);

  if (env.id == EnvId::kPointMass) {
    const double reward = -(state.head<2>().squaredNorm() + 0.1 * state.tail<2>().squaredNorm() +
                            0.001 * u.squaredNorm());
    Vector next(4);
    next.head<2>() = state.head<2>() + env.dt * state.tail<2>();
    next.tail<2>() = state.tail<2>() + env.dt * u;
    return {std::move(next), reward, false};
  }

  const double theta = pendulum_angle(state);
  const double omega = state[2];
  const double torque = u[0];
  const double reward = -(theta * theta + 0.1 * omega * omega + 0.001 * torque * torque);

  // Classic RK4 step; keeps the frictionless energy drift well below 1e-3
  // per step at dt = 0.05.
  const auto k1 = pendulum_deriv(theta, omega, torque);
  const auto k2 = pendulum_deriv(theta + 0.5 * env.dt * k1.dtheta, omega + 0.5 * env.dt * k1.domega, torque);
  const auto k3 = pendulum_deriv(theta + 0.5 * env.dt * k2.dtheta, omega + 0.5 * env.dt * k2.domega, torque);
  const auto k4 = pendulum_deriv(theta + env.dt * k3.dtheta, omega + env.dt * k3.domega, torque);
  const double theta_next =
      theta + env.dt / 6.0 * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);
  double omega_next =
      omega + env.dt / 6.0 * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  omega_next = std::clamp(omega_next, -kMaxSpeed, kMaxSpeed);

  Vector next(3);
  next << std::cos(theta_next), std::sin(theta_next), omega_next;
  return {std::move(next), reward, false};
}

double pendulum_angle(const Vector& state) { return std::atan2(state[1], state[0]); }

double pendulum_energy(const Vector& state) {
  const double omega = state[2];
  return omega * omega / 6.0 + 5.0 * state[0];  // state[0] = cos(theta)
}

}  // namespace mpo
