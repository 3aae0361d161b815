#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hp3o {

enum class Algo { kPpo, kHp3o, kHp3oPlus };
enum class BaselineMode { kTimestep, kNearestState };

inline std::string to_string(Algo a) {
  switch (a) {
    case Algo::kPpo: return "ppo";
    case Algo::kHp3o: return "hp3o";
    case Algo::kHp3oPlus: return "hp3o_plus";
  }
  return "?";
}

inline Algo parse_algo(const std::string& s) {
  if (s == "ppo") return Algo::kPpo;
  if (s == "hp3o") return Algo::kHp3o;
  if (s == "hp3o_plus") return Algo::kHp3oPlus;
  throw std::invalid_argument("unknown algo: " + s);
}

inline std::string to_string(BaselineMode m) {
  return m == BaselineMode::kTimestep ? "timestep" : "nearest_state";
}

inline BaselineMode parse_baseline_mode(const std::string& s) {
  if (s == "timestep") return BaselineMode::kTimestep;
  if (s == "nearest_state") return BaselineMode::kNearestState;
  throw std::invalid_argument("unknown baseline_mode: " + s);
}

struct TrainConfig {
  Algo algo = Algo::kHp3o;
  std::string env = "cartpole";
  double gamma = 0.99;
  double clip_eps = 0.2;
  long episodes = 0;  // K; 0 means run until the step budget is spent
  long steps = 100000;
  int epochs = 10;
  int buffer_capacity = 10;
  int batch_trajectories = 4;
  int minibatch_size = 64;
  double actor_lr = 3e-4;
  double critic_lr = 1e-3;
  // linear decay of the learning rate to 0 over the step budget, per network
  bool actor_lr_anneal = false;
  bool critic_lr_anneal = false;
  bool advantage_normalization = false;
  double entropy_coef = 0.0;
  double max_grad_norm = 0.0;  // 0 disables global-norm clipping
  std::vector<int> hidden{64, 64};
  BaselineMode baseline_mode = BaselineMode::kTimestep;
  unsigned long long seed = 0;
  long checkpoint_interval = 0;  // episodes; 0 writes only the final checkpoint
  bool record_value_pairs = true;

  void validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must be in (0,1)");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("clip_eps must be in (0,1)");
    if (episodes < 0 || steps < 0) throw std::invalid_argument("episodes/steps must be >= 0");
    if (episodes == 0 && steps == 0) throw std::invalid_argument("need an episode count or step budget");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (buffer_capacity < 1) throw std::invalid_argument("buffer_capacity must be >= 1");
    if (batch_trajectories < 1) throw std::invalid_argument("batch_trajectories must be >= 1");
    if (minibatch_size < 1) throw std::invalid_argument("minibatch_size must be >= 1");
    if (!(actor_lr > 0.0) || !(critic_lr > 0.0)) throw std::invalid_argument("learning rates must be > 0");
    if (entropy_coef < 0.0 || max_grad_norm < 0.0)
      throw std::invalid_argument("entropy_coef and max_grad_norm must be >= 0");
    for (int h : hidden)
      if (h < 1) throw std::invalid_argument("hidden sizes must be positive");
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw std::invalid_argument("config key '" + key + "': cannot parse '" + v + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + key + "': expected true/false, got '" + v + "'");
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

}  // namespace detail

using KeyValues = std::map<std::string, std::string>;

// Flat "key = value" text; '#' starts a comment.
inline KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": missing '='");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }
  return kv;
}

inline KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  return parse_key_values(in);
}

inline void apply(TrainConfig& c, const std::string& key, const std::string& v) {
  using detail::parse_bool;
  using detail::parse_number;
  if (key == "algo") c.algo = parse_algo(v);
  else if (key == "env") c.env = v;
  else if (key == "gamma") c.gamma = parse_number<double>(key, v);
  else if (key == "clip_eps") c.clip_eps = parse_number<double>(key, v);
  else if (key == "episodes") c.episodes = parse_number<long>(key, v);
  else if (key == "steps") c.steps = parse_number<long>(key, v);
  else if (key == "epochs") c.epochs = parse_number<int>(key, v);
  else if (key == "buffer_capacity") c.buffer_capacity = parse_number<int>(key, v);
  else if (key == "batch_trajectories") c.batch_trajectories = parse_number<int>(key, v);
  else if (key == "minibatch_size") c.minibatch_size = parse_number<int>(key, v);
  else if (key == "actor_lr") c.actor_lr = parse_number<double>(key, v);
  else if (key == "critic_lr") c.critic_lr = parse_number<double>(key, v);
  else if (key == "actor_lr_anneal") c.actor_lr_anneal = parse_bool(key, v);
  else if (key == "critic_lr_anneal") c.critic_lr_anneal = parse_bool(key, v);
  else if (key == "advantage_normalization") c.advantage_normalization = parse_bool(key, v);
  else if (key == "entropy_coef") c.entropy_coef = parse_number<double>(key, v);
  else if (key == "max_grad_norm") c.max_grad_norm = parse_number<double>(key, v);
  else if (key == "hidden") {
    c.hidden.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!detail::trim(item).empty()) c.hidden.push_back(parse_number<int>(key, detail::trim(item)));
  } else if (key == "baseline_mode") c.baseline_mode = parse_baseline_mode(v);
  else if (key == "seed") c.seed = parse_number<unsigned long long>(key, v);
  else if (key == "checkpoint_interval") c.checkpoint_interval = parse_number<long>(key, v);
  else if (key == "record_value_pairs") c.record_value_pairs = parse_bool(key, v);
  else throw std::invalid_argument("unknown config key: " + key);
}

inline void apply(TrainConfig& c, const KeyValues& kv) {
  for (const auto& [k, v] : kv) apply(c, k, v);
}

inline KeyValues to_key_values(const TrainConfig& c) {
  using detail::format_double;
  std::string hidden;
  for (std::size_t i = 0; i < c.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(c.hidden[i]);
  return {{"algo", to_string(c.algo)},
          {"env", c.env},
          {"gamma", format_double(c.gamma)},
          {"clip_eps", format_double(c.clip_eps)},
          {"episodes", std::to_string(c.episodes)},
          {"steps", std::to_string(c.steps)},
          {"epochs", std::to_string(c.epochs)},
          {"buffer_capacity", std::to_string(c.buffer_capacity)},
          {"batch_trajectories", std::to_string(c.batch_trajectories)},
          {"minibatch_size", std::to_string(c.minibatch_size)},
          {"actor_lr", format_double(c.actor_lr)},
          {"critic_lr", format_double(c.critic_lr)},
          {"actor_lr_anneal", c.actor_lr_anneal ? "true" : "false"},
          {"critic_lr_anneal", c.critic_lr_anneal ? "true" : "false"},
          {"advantage_normalization", c.advantage_normalization ? "true" : "false"},
          {"entropy_coef", format_double(c.entropy_coef)},
          {"max_grad_norm", format_double(c.max_grad_norm)},
          {"hidden", hidden},
          {"baseline_mode", to_string(c.baseline_mode)},
          {"seed", std::to_string(c.seed)},
          {"checkpoint_interval", std::to_string(c.checkpoint_interval)},
          {"record_value_pairs", c.record_value_pairs ? "true" : "false"}};
}

inline void write_key_values(std::ostream& os, const KeyValues& kv) {
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

}  // namespace hp3o
