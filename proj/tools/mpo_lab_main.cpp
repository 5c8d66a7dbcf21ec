#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mpo_lab/checks.hpp"
#include "mpo_lab/config.hpp"
#include "mpo_lab/trainer.hpp"

namespace {

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string run_id(const mpo::TrainConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(
                    fnv1a(mpo::serialize_config(config) + std::to_string(config.seed))));
  return buf;
}

// Run manifest written at start and finalized at the end of a run.
void write_manifest(const std::string& out_dir, const mpo::TrainConfig& config,
                    const std::string& started, const std::string& outcome) {
  std::ofstream mf(std::filesystem::path(out_dir) / "run.json", std::ios::trunc);
  mf << "{\n";
  mf << "  \"run_id\": \"" << run_id(config) << "\",\n";
  mf << "  \"seed\": " << config.seed << ",\n";
  mf << "  \"started\": \"" << started << "\",\n";
  mf << "  \"finished\": \"" << (outcome == "running" ? "" : iso_timestamp()) << "\",\n";
  mf << "  \"outcome\": \"" << outcome << "\",\n";
  mf << "  \"config\": \"config.txt\"\n";
  mf << "}\n";
}

int run_check_suite(const mpo::checks::CheckReport& report, const std::string& out_dir) {
  const std::string text = report.to_string();
  std::cout << text;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(std::filesystem::path(out_dir) / (report.suite + "_report.txt"));
    out << text;
  }
  return report.all_passed() ? 0 : 1;
}

mpo::TrainConfig load_config(const std::string& path, std::uint64_t seed) {
  mpo::TrainConfig config = path.empty() ? mpo::TrainConfig{} : mpo::parse_config(path);
  config.seed = seed;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPO training and verification laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_dir;
  std::uint64_t seed = 0;
  int eval_episodes = 10;

  auto add_common = [&](CLI::App* cmd, bool with_config = true) {
    if (with_config) cmd->add_option("--config", config_path, "Config file (key = value lines)");
    cmd->add_option("--seed", seed, "Root random seed");
    cmd->add_option("--out", out_dir, "Output directory");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Run MPO training");
  add_common(train_cmd);

  CLI::App* eval_cmd = app.add_subcommand("eval", "Roll out a checkpoint and report mean return");
  add_common(eval_cmd, false);
  eval_cmd->add_option("--checkpoint", checkpoint_dir, "Checkpoint directory")->required();
  eval_cmd->add_option("--episodes", eval_episodes, "Evaluation episodes");

  CLI::App* oracle_cmd = app.add_subcommand("oracle-check", "Exact improvement-theory suite");
  add_common(oracle_cmd, false);
  CLI::App* estep_cmd = app.add_subcommand("estep-check", "Dual and weight oracles");
  add_common(estep_cmd, false);
  CLI::App* retrace_cmd = app.add_subcommand("retrace-check", "Retrace fixed-point suites");
  add_common(retrace_cmd, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      mpo::TrainConfig config = load_config(config_path, seed);
      const std::string started = iso_timestamp();
      if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "config.txt")
            << mpo::serialize_config(config);
        write_manifest(out_dir, config, started, "running");
      }
      try {
        const mpo::RunResult result = mpo::train(config, out_dir);
        if (!out_dir.empty()) write_manifest(out_dir, config, started, "completed");
        std::cout << "completed: episodes=" << result.episodes
                  << " env_steps=" << result.env_steps << " iterations=" << result.iterations;
        if (std::isfinite(result.final_eval_return))
          std::cout << " eval_return=" << result.final_eval_return;
        if (result.episodes_to_threshold >= 0)
          std::cout << " episodes_to_threshold=" << result.episodes_to_threshold;
        std::cout << "\n";
      } catch (const std::exception& e) {
        if (!out_dir.empty()) write_manifest(out_dir, config, started, "aborted");
        throw;
      }
      return 0;
    }
    if (eval_cmd->parsed()) {
      const mpo::Checkpoint ckpt = mpo::Checkpoint::load(checkpoint_dir);
      const mpo::TrainConfig config = mpo::config_from_checkpoint(ckpt);
      const mpo::PolicyParams policy = mpo::policy_from_checkpoint(ckpt);
      const mpo::ContinuousEnv env = mpo::make_env(config.env_id, config.horizon);
      mpo::Rng rng = mpo::derive_stream(seed, "eval");
      const double mean_return = mpo::evaluate_policy(env, policy, eval_episodes, rng);
      std::cout << "mean_return=" << mean_return << " episodes=" << eval_episodes << "\n";
      return 0;
    }
    if (oracle_cmd->parsed()) return run_check_suite(mpo::checks::run_oracle_checks(seed), out_dir);
    if (estep_cmd->parsed()) return run_check_suite(mpo::checks::run_estep_checks(seed), out_dir);
    if (retrace_cmd->parsed())
      return run_check_suite(mpo::checks::run_retrace_checks(seed), out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
