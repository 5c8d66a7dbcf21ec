#include "mpo_lab/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mpo {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  long v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw ConfigError("config key '" + key + "': expected an integer, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(static_cast<int>(parse_long(key, item)));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': expected a list of sizes");
  return out;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

bool TrainConfig::operator==(const TrainConfig& other) const {
  return serialize_config(*this) == serialize_config(other) && seed == other.seed;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (env_id != "pendulum" && env_id != "point_mass")
    bad("env.id", "unknown environment '" + env_id + "'");
  if (horizon < 1) bad("env.horizon", "must be at least 1");
  if (workers < 1) bad("train.workers", "must be at least 1");
  if (trajectories_per_iter < 1) bad("train.trajectories_per_iter", "must be at least 1");
  if (inner_steps < 1) bad("train.inner_steps", "must be at least 1");
  if (batch_windows < 1) bad("train.batch_windows", "must be at least 1");
  if (retrace_steps < 1) bad("train.retrace_steps", "must be at least 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) bad("train.gamma", "must be in [0, 1)");
  if (!(lr > 0.0)) bad("train.lr", "must be positive");
  if (trajectory_budget < 0) bad("train.trajectory_budget", "must be nonnegative");
  if (replay_capacity < 1) bad("train.replay_capacity", "must be positive");
  if (!(grad_clip > 0.0)) bad("train.grad_clip", "must be positive");
  if (!(epsilon > 0.0)) bad("mpo.epsilon", "must be positive");
  if (!(epsilon_mu > 0.0)) bad("mpo.epsilon_mu", "must be positive");
  if (!(epsilon_sigma > 0.0)) bad("mpo.epsilon_sigma", "must be positive");
  if (action_samples < 1) bad("mpo.action_samples", "must be at least 1");
  for (int h : policy_hidden)
    if (h < 1) bad("net.policy_hidden", "sizes must be positive");
  for (int h : q_hidden)
    if (h < 1) bad("net.q_hidden", "sizes must be positive");
  if (eval_every < 0) bad("eval.every", "must be nonnegative");
  if (eval_episodes < 1) bad("eval.episodes", "must be at least 1");
  if (has_eval_threshold && !std::isfinite(eval_threshold))
    bad("eval.threshold", "must be finite");
}

TrainConfig parse_config_text(const std::string& text) {
  TrainConfig c;
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>>
      setters = {
          {"env.id", [&](const std::string&, const std::string& v) { c.env_id = v; }},
          {"env.horizon",
           [&](const std::string& k, const std::string& v) {
             c.horizon = static_cast<int>(parse_long(k, v));
           }},
          {"train.workers",
           [&](const std::string& k, const std::string& v) {
             c.workers = static_cast<int>(parse_long(k, v));
           }},
          {"train.trajectories_per_iter",
           [&](const std::string& k, const std::string& v) {
             c.trajectories_per_iter = static_cast<int>(parse_long(k, v));
           }},
          {"train.inner_steps",
           [&](const std::string& k, const std::string& v) {
             c.inner_steps = static_cast<int>(parse_long(k, v));
           }},
          {"train.batch_windows",
           [&](const std::string& k, const std::string& v) {
             c.batch_windows = static_cast<int>(parse_long(k, v));
           }},
          {"train.retrace_steps",
           [&](const std::string& k, const std::string& v) {
             c.retrace_steps = static_cast<int>(parse_long(k, v));
           }},
          {"train.gamma",
           [&](const std::string& k, const std::string& v) { c.gamma = parse_double(k, v); }},
          {"train.lr",
           [&](const std::string& k, const std::string& v) { c.lr = parse_double(k, v); }},
          {"train.trajectory_budget",
           [&](const std::string& k, const std::string& v) { c.trajectory_budget = parse_long(k, v); }},
          {"train.replay_capacity",
           [&](const std::string& k, const std::string& v) { c.replay_capacity = parse_long(k, v); }},
          {"train.grad_clip",
           [&](const std::string& k, const std::string& v) { c.grad_clip = parse_double(k, v); }},
          {"mpo.mode",
           [&](const std::string& k, const std::string& v) {
             if (v == "nonparametric")
               c.mode = VariationalMode::kNonparametric;
             else if (v == "parametric")
               c.mode = VariationalMode::kParametric;
             else
               throw ConfigError("config key '" + k + "': expected nonparametric or parametric");
           }},
          {"mpo.epsilon",
           [&](const std::string& k, const std::string& v) { c.epsilon = parse_double(k, v); }},
          {"mpo.epsilon_mu",
           [&](const std::string& k, const std::string& v) { c.epsilon_mu = parse_double(k, v); }},
          {"mpo.epsilon_sigma",
           [&](const std::string& k, const std::string& v) {
             c.epsilon_sigma = parse_double(k, v);
           }},
          {"mpo.action_samples",
           [&](const std::string& k, const std::string& v) {
             c.action_samples = static_cast<int>(parse_long(k, v));
           }},
          {"net.policy_hidden",
           [&](const std::string& k, const std::string& v) { c.policy_hidden = parse_int_list(k, v); }},
          {"net.q_hidden",
           [&](const std::string& k, const std::string& v) { c.q_hidden = parse_int_list(k, v); }},
          {"net.activation",
           [&](const std::string& k, const std::string& v) {
             if (v == "tanh")
               c.activation = Activation::kTanh;
             else if (v == "elu")
               c.activation = Activation::kElu;
             else
               throw ConfigError("config key '" + k + "': expected tanh or elu");
           }},
          {"eval.every",
           [&](const std::string& k, const std::string& v) {
             c.eval_every = static_cast<int>(parse_long(k, v));
           }},
          {"eval.episodes",
           [&](const std::string& k, const std::string& v) {
             c.eval_episodes = static_cast<int>(parse_long(k, v));
           }},
          {"eval.threshold",
           [&](const std::string& k, const std::string& v) {
             c.eval_threshold = parse_double(k, v);
             c.has_eval_threshold = true;
           }},
          {"eval.stop_at_threshold",
           [&](const std::string& k, const std::string& v) {
             c.stop_at_threshold = parse_bool(k, v);
           }},
      };

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }
  c.validate();
  return c;
}

TrainConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const TrainConfig& c) {
  std::ostringstream os;
  os << "env.horizon = " << c.horizon << "\n";
  os << "env.id = " << c.env_id << "\n";
  os << "eval.episodes = " << c.eval_episodes << "\n";
  os << "eval.every = " << c.eval_every << "\n";
  os << "eval.stop_at_threshold = " << (c.stop_at_threshold ? "true" : "false") << "\n";
  if (c.has_eval_threshold) os << "eval.threshold = " << format_double(c.eval_threshold) << "\n";
  os << "mpo.action_samples = " << c.action_samples << "\n";
  os << "mpo.epsilon = " << format_double(c.epsilon) << "\n";
  os << "mpo.epsilon_mu = " << format_double(c.epsilon_mu) << "\n";
  os << "mpo.epsilon_sigma = " << format_double(c.epsilon_sigma) << "\n";
  os << "mpo.mode = " << (c.mode == VariationalMode::kNonparametric ? "nonparametric" : "parametric")
     << "\n";
  os << "net.activation = " << (c.activation == Activation::kTanh ? "tanh" : "elu") << "\n";
  os << "net.policy_hidden = " << join_ints(c.policy_hidden) << "\n";
  os << "net.q_hidden = " << join_ints(c.q_hidden) << "\n";
  os << "train.batch_windows = " << c.batch_windows << "\n";
  os << "train.gamma = " << format_double(c.gamma) << "\n";
  os << "train.grad_clip = " << format_double(c.grad_clip) << "\n";
  os << "train.inner_steps = " << c.inner_steps << "\n";
  os << "train.lr = " << format_double(c.lr) << "\n";
  os << "train.replay_capacity = " << c.replay_capacity << "\n";
  os << "train.retrace_steps = " << c.retrace_steps << "\n";
  os << "train.trajectories_per_iter = " << c.trajectories_per_iter << "\n";
  os << "train.trajectory_budget = " << c.trajectory_budget << "\n";
  os << "train.workers = " << c.workers << "\n";
  return os.str();
}

}  // namespace mpo
