#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <json.hpp>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hp3o/algo.hpp"
#include "hp3o/config.hpp"
#include "hp3o/env.hpp"
#include "hp3o/metrics.hpp"
#include "hp3o/nn.hpp"
#include "hp3o/trajectory.hpp"

namespace hp3o {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

// Everything needed to re-run an experiment.
struct RunManifest {
  TrainConfig config;
  std::vector<unsigned long long> seeds;
  std::string out_dir;
  std::string version = kVersion;
  std::string timestamp;
};

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : to_key_values(m.config)) cfg[k] = v;
  return {{"config", cfg},       {"env", m.config.env}, {"algo", to_string(m.config.algo)},
          {"seeds", m.seeds},    {"out", m.out_dir},    {"version", m.version},
          {"timestamp", m.timestamp}};
}

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  if (!j.contains("config") || !j["config"].is_object()) throw std::invalid_argument("manifest: missing config");
  KeyValues kv;
  for (const auto& [k, v] : j["config"].items()) kv[k] = v.get<std::string>();
  hp3o::apply(m.config, kv);
  if (j.contains("seeds")) m.seeds = j["seeds"].get<std::vector<unsigned long long>>();
  if (j.contains("out")) m.out_dir = j["out"].get<std::string>();
  if (j.contains("version")) m.version = j["version"].get<std::string>();
  if (j.contains("timestamp")) m.timestamp = j["timestamp"].get<std::string>();
  return m;
}

inline RunManifest read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest: " + path);
  return manifest_from_json(nlohmann::json::parse(in));
}

inline void write_json_file(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

inline nlohmann::json json_number_or_null(std::optional<double> v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

struct RunOutcome {
  RunStats stats;
  double final_return = 0.0;
  std::optional<double> ev_final;
  long episodes = 0;
};

// Trains one seed and writes log.csv, checkpoints/, summary.json (and trajectories.jsonl) to dir.
inline RunOutcome train_to_directory(const TrainConfig& cfg, const fs::path& dir, bool dump_trajectories = false) {
  fs::create_directories(dir / "checkpoints");
  std::ofstream log(dir / "log.csv");
  if (!log) throw std::runtime_error("cannot write " + (dir / "log.csv").string());
  log << kLogHeader << '\n';
  std::ofstream traj;
  if (dump_trajectories) traj.open(dir / "trajectories.jsonl");

  auto env = make_env(cfg.env);
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeLog& row, const Trajectory& t) {
    write_log_row(log, row);
    if (dump_trajectories) dump_trajectory(traj, t);
  };
  hooks.on_checkpoint = [&](const Checkpoint& c) {
    std::ostringstream name;
    name << "ckpt_" << std::setw(6) << std::setfill('0') << c.episode << ".json";
    write_json_file(dir / "checkpoints" / name.str(), to_json(c));
  };
  TrainResult r = train(cfg, *env, hooks);
  write_json_file(dir / "checkpoints" / "final.json",
                  to_json(Checkpoint{r.policy, r.critic, r.actor_adam, r.critic_adam,
                                     static_cast<long>(r.log.size()),
                                     r.log.empty() ? 0 : r.log.back().env_steps}));

  RunOutcome o;
  o.stats = std::move(r.stats);
  o.episodes = static_cast<long>(r.log.size());
  o.final_return = o.stats.returns.empty() ? 0.0 : final_return(o.stats);
  o.ev_final = final_explained_variance(o.stats);
  write_json_file(dir / "summary.json", {{"env", cfg.env},
                                         {"algo", to_string(cfg.algo)},
                                         {"seed", cfg.seed},
                                         {"episodes", o.episodes},
                                         {"env_steps", o.stats.env_steps.empty() ? 0.0 : o.stats.env_steps.back()},
                                         {"final_return", o.final_return},
                                         {"ev_final", json_number_or_null(o.ev_final)}});
  return o;
}

inline void write_curve_csv(std::ostream& os, const SeedAggregate& a) {
  using detail::format_double;
  os << "env_steps,mean,std,min,max\n";
  for (std::size_t i = 0; i < a.grid.size(); ++i)
    os << format_double(a.grid[i]) << ',' << format_double(a.mean_curve[i]) << ',' << format_double(a.std_band[i])
       << ',' << format_double(a.min_curve[i]) << ',' << format_double(a.max_curve[i]) << '\n';
}

struct BenchResult {
  SeedAggregate aggregate;
  std::vector<unsigned long long> seeds;
  std::vector<double> ev_final;  // NaN where undefined
  std::vector<std::string> failures;
  nlohmann::json summary;
};

// Runs every seed of one algorithm (at most `jobs` at a time) under out/<algo>/seed_<s>/ and
// writes out/summary_<algo>.json and out/curve_<algo>.csv.
inline BenchResult bench_to_directory(const TrainConfig& base, const std::vector<unsigned long long>& seeds,
                                      const fs::path& out, unsigned jobs = 1) {
  if (seeds.size() < 2) throw std::invalid_argument("bench needs at least 2 seeds");
  const std::string algo = to_string(base.algo);
  std::vector<std::optional<RunOutcome>> outcomes(seeds.size());
  std::vector<std::string> errors(seeds.size());
  std::mutex mu;
  std::size_t next = 0;
  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard lock(mu);
        if (next >= seeds.size()) return;
        i = next++;
      }
      TrainConfig cfg = base;
      cfg.seed = seeds[i];
      try {
        outcomes[i] = train_to_directory(cfg, out / algo / ("seed_" + std::to_string(seeds[i])));
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(seeds.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  BenchResult br;
  std::vector<RunStats> runs;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!outcomes[i]) {
      br.failures.push_back("seed " + std::to_string(seeds[i]) + ": " + errors[i]);
      continue;
    }
    br.seeds.push_back(seeds[i]);
    br.ev_final.push_back(outcomes[i]->ev_final.value_or(std::numeric_limits<double>::quiet_NaN()));
    runs.push_back(std::move(outcomes[i]->stats));
  }
  if (runs.size() < 2) {
    std::string msg = "bench: fewer than 2 seeds succeeded";
    for (const auto& f : br.failures) msg += "; " + f;
    throw std::runtime_error(msg);
  }
  br.aggregate = aggregate_seeds(runs);

  nlohmann::json ev = nlohmann::json::array();
  for (double v : br.ev_final) ev.push_back(json_number_or_null(v));
  br.summary = {{"env", base.env},
                {"algo", algo},
                {"seeds", br.seeds},
                {"final_returns", br.aggregate.final_returns},
                {"final_mean", br.aggregate.final_mean},
                {"final_std", br.aggregate.final_std},
                {"relative_std", br.aggregate.relative_std},
                {"ev_final", ev},
                {"failed", br.failures}};
  write_json_file(out / ("summary_" + algo + ".json"), br.summary);
  std::ofstream curve(out / ("curve_" + algo + ".csv"));
  write_curve_csv(curve, br.aggregate);
  return br;
}

}  // namespace hp3o
