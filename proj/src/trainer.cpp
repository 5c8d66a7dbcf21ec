#include "mpo_lab/trainer.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include "mpo_lab/metrics.hpp"

namespace mpo {
namespace {

void clip_to_norm(MlpGrads& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) grads.scale(max_norm / norm);
}

double clip_to_norm(double v, double max_norm) {
  return std::abs(v) > max_norm ? v * (max_norm / std::abs(v)) : v;
}

void put_mlp(Checkpoint& ck, const std::string& prefix, const MlpParams& net) {
  for (int l = 0; l < net.num_layers(); ++l) {
    ck.put(prefix + ".layer" + std::to_string(l) + ".weight", net.weights[l]);
    ck.put(prefix + ".layer" + std::to_string(l) + ".bias", net.biases[l]);
  }
}

void get_mlp(const Checkpoint& ck, const std::string& prefix, MlpParams& net) {
  for (int l = 0; l < net.num_layers(); ++l) {
    const Matrix& w = ck.tensor(prefix + ".layer" + std::to_string(l) + ".weight");
    require(w.rows() == net.weights[l].rows() && w.cols() == net.weights[l].cols(),
            "checkpoint: weight shape mismatch at " + prefix);
    net.weights[l] = w;
    net.biases[l] = ck.vector(prefix + ".layer" + std::to_string(l) + ".bias");
  }
}

double trajectory_return(const Trajectory& traj) {
  double total = 0.0;
  for (const Transition& t : traj) total += t.reward;
  return total;
}

}  // namespace

bool GradientBundle::all_finite() const {
  return critic.all_finite() && policy.all_finite() && std::isfinite(eta) &&
         std::isfinite(eta_mu) && std::isfinite(eta_sigma);
}

int worker_thread_cap() {
  if (const char* env = std::getenv("MPO_LAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  const ContinuousEnv env = make_env(config.env_id, config.horizon);

  TrainState state;
  state.policy =
      make_gaussian_policy(env.state_dim, config.policy_hidden, env.action_dim, config.activation);
  Rng policy_rng = derive_stream(config.seed, "init.policy");
  init_mlp(state.policy.net, policy_rng, 0.01);
  state.policy_old = state.policy;

  state.critic = make_critic(env.state_dim, env.action_dim, config.q_hidden, config.activation);
  Rng critic_rng = derive_stream(config.seed, "init.critic");
  init_mlp(state.critic.net, critic_rng);
  sync_target(state.critic);

  state.dual.epsilon = config.epsilon;
  state.dual.epsilon_mu = config.epsilon_mu;
  state.dual.epsilon_sigma = config.epsilon_sigma;

  AdamConfig adam;
  adam.lr = config.lr;
  state.adam_policy = AdamState::like(state.policy.net, adam);
  state.adam_critic = AdamState::like(state.critic.net, adam);
  state.adam_eta = ScalarAdamState{0.0, 0.0, 0, adam};
  state.adam_eta_mu = ScalarAdamState{0.0, 0.0, 0, adam};
  state.adam_eta_sigma = ScalarAdamState{0.0, 0.0, 0, adam};

  state.buffer = ReplayBuffer(static_cast<std::size_t>(config.replay_capacity));
  return state;
}

GradientBundle worker_iteration(const TrainState& snapshot, const TrainConfig& config,
                                int worker_id, Rng& rng) {
  if (snapshot.buffer.total_steps() == 0)
    throw TrainingFault("worker_iteration: replay buffer is empty");

  const auto windows =
      snapshot.buffer.sample_windows(config.batch_windows, config.retrace_steps, rng);
  int n = 0;
  for (const auto& w : windows) n += w.length();

  const int state_dim = snapshot.policy.state_dim();
  const int action_dim = snapshot.policy.action_dim;
  const int proposals = config.action_samples;

  Matrix states(state_dim, n), actions(action_dim, n), next_states(state_dim, n);
  std::vector<RetraceStep> steps(n);
  {
    int t = 0;
    for (const auto& w : windows)
      for (const Transition& tr : w.transitions) {
        states.col(t) = tr.state;
        actions.col(t) = tr.action;
        next_states.col(t) = tr.next_state;
        steps[t].reward = tr.reward;
        steps[t].terminal = tr.terminal;
        steps[t].behavior_log_prob = tr.behavior_log_prob;
        ++t;
      }
  }

  // Everything below references the snapshot policy theta_i and the frozen
  // critic phi', never the in-flight parameters.
  const auto heads_cur = gaussian_heads_at(snapshot.policy_old, states);
  const auto heads_next = gaussian_heads_at(snapshot.policy_old, next_states);
  for (int t = 0; t < n; ++t) steps[t].log_pi = log_prob(heads_cur[t], actions.col(t));

  {
    Matrix boot_states(state_dim, n * proposals), boot_actions(action_dim, n * proposals);
    for (int t = 0; t < n; ++t)
      for (int m = 0; m < proposals; ++m) {
        boot_states.col(t * proposals + m) = next_states.col(t);
        boot_actions.col(t * proposals + m) = sample(heads_next[t], rng).first;
      }
    const Vector boot_q = critic_values(snapshot.critic.target, boot_states, boot_actions);
    for (int t = 0; t < n; ++t)
      steps[t].expected_next_q =
          boot_q.segment(t * proposals, proposals).sum() / static_cast<double>(proposals);
  }

  const Vector q_tgt = critic_values(snapshot.critic.target, states, actions);
  for (int t = 0; t < n; ++t) steps[t].q_target = q_tgt[t];

  Vector targets(n);
  {
    int offset = 0;
    for (const auto& w : windows) {
      const auto span = std::span<const RetraceStep>(steps).subspan(offset, w.length());
      const auto t = retrace_targets(span, config.gamma);
      for (int i = 0; i < w.length(); ++i) targets[offset + i] = t[i];
      offset += w.length();
    }
  }

  const CriticUpdate critic_result = critic_update(snapshot.critic, states, actions, targets);

  // E-step batch: fresh proposals from theta_i at the window states, valued
  // by the target critic.
  EStepBatch batch;
  batch.states.reserve(n);
  batch.actions.reserve(n);
  {
    Matrix prop_states(state_dim, n * proposals), prop_actions(action_dim, n * proposals);
    batch.ref_log_probs = Matrix(n, proposals);
    for (int t = 0; t < n; ++t) {
      batch.states.push_back(states.col(t));
      Matrix per_state(action_dim, proposals);
      for (int m = 0; m < proposals; ++m) {
        auto [action, lp] = sample(heads_cur[t], rng);
        per_state.col(m) = action;
        prop_states.col(t * proposals + m) = states.col(t);
        prop_actions.col(t * proposals + m) = action;
        batch.ref_log_probs(t, m) = lp;
      }
      batch.actions.push_back(std::move(per_state));
    }
    const Vector prop_q = critic_values(snapshot.critic.target, prop_states, prop_actions);
    batch.q_values = Matrix(n, proposals);
    for (int t = 0; t < n; ++t)
      batch.q_values.row(t) = prop_q.segment(t * proposals, proposals).transpose();
    batch.log_prior = Matrix::Constant(n, proposals, -std::log(double(proposals)));
  }

  GradientBundle bundle;
  bundle.worker_id = worker_id;
  bundle.snapshot_version = snapshot.version;
  bundle.critic = critic_result.grads;
  bundle.diag.q_loss = critic_result.loss;

  if (config.mode == VariationalMode::kNonparametric) {
    const DualEval dual_eval = dual_value_and_grad(snapshot.dual.eta, batch, config.epsilon);
    const Matrix weights = estep_weights(snapshot.dual.eta, batch);
    MStepResult ms = mstep_update(snapshot.policy_old, snapshot.policy, batch, weights,
                                  snapshot.dual);
    bundle.policy = std::move(ms.policy_grad);
    bundle.policy.scale(-1.0);  // chief descends
    bundle.eta = dual_eval.grad;
    bundle.eta_mu = ms.d_eta_mu * sigmoid(snapshot.dual.eta_mu_raw);
    bundle.eta_sigma = ms.d_eta_sigma * sigmoid(snapshot.dual.eta_sigma_raw);
    bundle.diag.dual_value = dual_eval.value;
    bundle.diag.kl_mean = ms.kl_mean;
    bundle.diag.kl_cov = ms.kl_cov;
  } else {
    const Matrix advantages = batch.q_values.colwise() - batch.q_values.rowwise().mean();
    ParametricEStepResult pe =
        parametric_estep_grad(snapshot.policy, snapshot.policy_old, batch, advantages,
                              snapshot.dual);
    bundle.policy = std::move(pe.policy_grad);
    bundle.policy.scale(-1.0);
    bundle.eta = 0.0;
    bundle.eta_mu = pe.d_eta_mu * sigmoid(snapshot.dual.eta_mu_raw);
    bundle.eta_sigma = pe.d_eta_sigma * sigmoid(snapshot.dual.eta_sigma_raw);
    bundle.diag.dual_value = pe.lagrangian;
    bundle.diag.kl_mean = pe.kl_mean;
    bundle.diag.kl_cov = pe.kl_cov;
  }

  clip_to_norm(bundle.critic, config.grad_clip);
  clip_to_norm(bundle.policy, config.grad_clip);
  bundle.eta = clip_to_norm(bundle.eta, config.grad_clip);
  bundle.eta_mu = clip_to_norm(bundle.eta_mu, config.grad_clip);
  bundle.eta_sigma = clip_to_norm(bundle.eta_sigma, config.grad_clip);

  if (!bundle.all_finite()) throw TrainingFault("worker_iteration: non-finite gradient bundle");
  return bundle;
}

GradientBundle mean_bundle(std::span<const GradientBundle> bundles) {
  require(!bundles.empty(), "mean_bundle: no bundles");
  GradientBundle mean = bundles[0];
  for (std::size_t i = 1; i < bundles.size(); ++i) {
    mean.critic.add_scaled(bundles[i].critic, 1.0);
    mean.policy.add_scaled(bundles[i].policy, 1.0);
    mean.eta += bundles[i].eta;
    mean.eta_mu += bundles[i].eta_mu;
    mean.eta_sigma += bundles[i].eta_sigma;
    mean.diag.q_loss += bundles[i].diag.q_loss;
    mean.diag.dual_value += bundles[i].diag.dual_value;
    mean.diag.kl_mean += bundles[i].diag.kl_mean;
    mean.diag.kl_cov += bundles[i].diag.kl_cov;
  }
  const double inv = 1.0 / static_cast<double>(bundles.size());
  mean.critic.scale(inv);
  mean.policy.scale(inv);
  mean.eta *= inv;
  mean.eta_mu *= inv;
  mean.eta_sigma *= inv;
  mean.diag.q_loss *= inv;
  mean.diag.dual_value *= inv;
  mean.diag.kl_mean *= inv;
  mean.diag.kl_cov *= inv;
  return mean;
}

void chief_aggregate(TrainState& state, const TrainConfig& config,
                     std::span<const GradientBundle> bundles) {
  if (static_cast<int>(bundles.size()) != config.workers)
    throw TrainingFault("chief_aggregate: expected " + std::to_string(config.workers) +
                        " bundles, got " + std::to_string(bundles.size()));
  for (std::size_t w = 0; w < bundles.size(); ++w) {
    if (bundles[w].worker_id != static_cast<int>(w))
      throw TrainingFault("chief_aggregate: bundles out of worker order");
    if (bundles[w].snapshot_version != state.version)
      throw TrainingFault("chief_aggregate: bundle from stale snapshot");
    if (!bundles[w].all_finite()) throw TrainingFault("chief_aggregate: non-finite bundle");
  }

  const GradientBundle mean = mean_bundle(bundles);
  adam_step(state.adam_critic, state.critic.net, mean.critic);
  adam_step(state.adam_policy, state.policy.net, mean.policy);
  state.dual.eta = std::clamp(adam_step(state.adam_eta, state.dual.eta, mean.eta),
                              DualState::kEtaMin, DualState::kEtaMax);
  state.dual.eta_mu_raw = adam_step(state.adam_eta_mu, state.dual.eta_mu_raw, mean.eta_mu);
  state.dual.eta_sigma_raw =
      adam_step(state.adam_eta_sigma, state.dual.eta_sigma_raw, mean.eta_sigma);
  state.version += 1;
}

Trajectory collect_trajectory(const ContinuousEnv& env, const PolicyParams& policy, Rng& env_rng,
                              Rng& action_rng) {
  Trajectory traj;
  traj.reserve(env.horizon);
  Vector state = env_reset(env, env_rng);
  for (int t = 0; t < env.horizon; ++t) {
    const GaussianHead head = gaussian_head_at(policy, state);
    auto [raw_action, log_p] = sample(head, action_rng);
    const Vector action = clip_action(env, raw_action);
    StepResult step = env_step(env, state, action);
    traj.push_back(Transition{state, action, step.reward, step.next_state, log_p, step.terminal});
    state = std::move(step.next_state);
  }
  return traj;
}

double evaluate_policy(const ContinuousEnv& env, const PolicyParams& policy, int episodes,
                       Rng& rng) {
  double total = 0.0;
  for (int e = 0; e < episodes; ++e) {
    Vector state = env_reset(env, rng);
    for (int t = 0; t < env.horizon; ++t) {
      const Vector action = clip_action(env, gaussian_head_at(policy, state).mean);
      StepResult step = env_step(env, state, action);
      total += step.reward;
      state = std::move(step.next_state);
    }
  }
  return total / episodes;
}

namespace {

std::vector<GradientBundle> run_workers(const TrainState& state, const TrainConfig& config,
                                        std::vector<Rng>& rngs) {
  const int G = config.workers;
  std::vector<GradientBundle> bundles(G);
  const int cap = std::min(G, worker_thread_cap());
  if (cap <= 1) {
    for (int w = 0; w < G; ++w) bundles[w] = worker_iteration(state, config, w, rngs[w]);
    return bundles;
  }
  for (int base = 0; base < G; base += cap) {
    const int count = std::min(cap, G - base);
    std::vector<std::future<GradientBundle>> futures;
    futures.reserve(count);
    for (int i = 0; i < count; ++i) {
      const int w = base + i;
      futures.push_back(std::async(std::launch::async, [&, w] {
        return worker_iteration(state, config, w, rngs[w]);
      }));
    }
    for (int i = 0; i < count; ++i) {
      if (futures[i].wait_for(std::chrono::minutes(5)) != std::future_status::ready)
        throw TrainingFault("chief: worker " + std::to_string(base + i) +
                            " missing past timeout; iteration aborted");
      bundles[base + i] = futures[i].get();
    }
  }
  return bundles;
}

}  // namespace

Checkpoint state_to_checkpoint(const TrainState& state, const TrainConfig& config) {
  Checkpoint ck;
  put_mlp(ck, "policy", state.policy.net);
  put_mlp(ck, "policy_old", state.policy_old.net);
  put_mlp(ck, "critic", state.critic.net);
  put_mlp(ck, "critic_target", state.critic.target);
  ck.put_scalar("dual.eta", state.dual.eta);
  ck.put_scalar("dual.eta_mu_raw", state.dual.eta_mu_raw);
  ck.put_scalar("dual.eta_sigma_raw", state.dual.eta_sigma_raw);
  ck.meta["config"] = serialize_config(config);
  ck.meta["seed"] = std::to_string(config.seed);
  ck.meta["iteration"] = std::to_string(state.iteration);
  ck.meta["episodes"] = std::to_string(state.episodes);
  ck.meta["env_steps"] = std::to_string(state.env_steps);
  return ck;
}

TrainConfig config_from_checkpoint(const Checkpoint& ckpt) {
  TrainConfig config = parse_config_text(ckpt.meta.at("config"));
  if (ckpt.meta.count("seed")) config.seed = std::stoull(ckpt.meta.at("seed"));
  return config;
}

PolicyParams policy_from_checkpoint(const Checkpoint& ckpt, bool old_policy) {
  const TrainConfig config = config_from_checkpoint(ckpt);
  const ContinuousEnv env = make_env(config.env_id, config.horizon);
  PolicyParams policy =
      make_gaussian_policy(env.state_dim, config.policy_hidden, env.action_dim, config.activation);
  get_mlp(ckpt, old_policy ? "policy_old" : "policy", policy.net);
  return policy;
}

RunResult train(const TrainConfig& config, const std::string& out_dir) {
  config.validate();
  const ContinuousEnv env = make_env(config.env_id, config.horizon);
  TrainState state = init_train_state(config);

  const int G = config.workers;
  std::vector<Rng> env_rngs, action_rngs, worker_rngs;
  for (int w = 0; w < G; ++w) {
    env_rngs.push_back(derive_stream(config.seed, "env", w));
    action_rngs.push_back(derive_stream(config.seed, "policy-sampling", w));
    worker_rngs.push_back(derive_stream(config.seed, "replay-sampling", w));
  }
  Rng eval_rng = derive_stream(config.seed, "eval");

  std::ofstream metrics_stream;
  std::optional<MetricsWriter> metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics_stream.open(std::filesystem::path(out_dir) / "metrics.csv", std::ios::trunc);
    if (!metrics_stream) throw std::runtime_error("train: cannot write metrics.csv in " + out_dir);
    metrics.emplace(metrics_stream);
  }

  RunResult result;
  auto write_checkpoint = [&] {
    if (!out_dir.empty())
      state_to_checkpoint(state, config).save((std::filesystem::path(out_dir) / "checkpoint").string());
  };

  auto run_eval = [&] {
    result.final_eval_return = evaluate_policy(env, state.policy, config.eval_episodes, eval_rng);
    if (config.has_eval_threshold && result.episodes_to_threshold < 0 &&
        result.final_eval_return >= config.eval_threshold)
      result.episodes_to_threshold = state.episodes;
  };

  try {
    bool stop = false;
    while (!stop && state.episodes < config.trajectory_budget) {
      double return_sum = 0.0;
      long collected = 0;
      for (int w = 0; w < G; ++w)
        for (int l = 0; l < config.trajectories_per_iter; ++l) {
          Trajectory traj = collect_trajectory(env, state.policy_old, env_rngs[w], action_rngs[w]);
          state.env_steps += static_cast<long>(traj.size());
          state.episodes += 1;
          return_sum += trajectory_return(traj);
          collected += 1;
          state.buffer.append(std::move(traj));
        }

      BundleDiagnostics diag_sum;
      for (int k = 0; k < config.inner_steps; ++k) {
        const auto bundles = run_workers(state, config, worker_rngs);
        chief_aggregate(state, config, bundles);
        const GradientBundle mean = mean_bundle(bundles);
        diag_sum.q_loss += mean.diag.q_loss;
        diag_sum.dual_value += mean.diag.dual_value;
        diag_sum.kl_mean += mean.diag.kl_mean;
        diag_sum.kl_cov += mean.diag.kl_cov;
      }

      state.policy_old = state.policy;
      sync_target(state.critic);
      state.iteration += 1;

      if (config.eval_every > 0 && state.iteration % config.eval_every == 0) {
        run_eval();
        if (config.stop_at_threshold && result.episodes_to_threshold >= 0) stop = true;
      }

      if (metrics) {
        MetricsRow row;
        row.iteration = state.iteration;
        row.env_steps = state.env_steps;
        row.episodes = state.episodes;
        row.mean_return = collected > 0 ? return_sum / collected : 0.0;
        row.q_loss = diag_sum.q_loss / config.inner_steps;
        row.eta = state.dual.eta;
        row.eta_mu = state.dual.eta_mu();
        row.eta_sigma = state.dual.eta_sigma();
        row.kl_mean = diag_sum.kl_mean / config.inner_steps;
        row.kl_cov = diag_sum.kl_cov / config.inner_steps;
        row.dual_value = diag_sum.dual_value / config.inner_steps;
        metrics->append(row);
      }
    }

    if (config.eval_every > 0 && !stop &&
        (state.iteration == 0 || state.iteration % config.eval_every != 0))
      run_eval();
  } catch (const std::exception& e) {
    write_checkpoint();
    throw TrainingFault(std::string("training aborted: ") + e.what());
  }

  write_checkpoint();
  result.episodes = state.episodes;
  result.env_steps = state.env_steps;
  result.iterations = state.iteration;
  result.outcome = "completed";
  return result;
}

}  // namespace mpo
