// hp3o command line: train, bench, verify-bounds, plot.
#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hp3o/config.hpp"
#include "hp3o/plot.hpp"
#include "hp3o/run.hpp"
#include "hp3o/theory.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shared flags of train and bench. Precedence: defaults < manifest < config file < flags < --set.
struct RunFlags {
  std::string algo, env, out, config, manifest;
  long steps = -1;
  std::vector<std::string> sets;
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--algo", f.algo, "ppo | hp3o | hp3o_plus");
  app->add_option("--env", f.env, "cartpole | pendulum | gridworld");
  app->add_option("--steps", f.steps, "environment step budget");
  app->add_option("--out", f.out, "output directory")->required();
  app->add_option("--config", f.config, "key = value config file");
  app->add_option("--manifest", f.manifest, "replay the configuration of a previous run");
  app->add_option("--set", f.sets, "override one config key, key=value");
}

hp3o::TrainConfig resolve_config(const RunFlags& f, std::vector<unsigned long long>* manifest_seeds = nullptr) {
  hp3o::TrainConfig cfg;
  bool env_given = false;
  try {
    if (!f.manifest.empty()) {
      hp3o::RunManifest m = hp3o::read_manifest(f.manifest);
      cfg = m.config;
      env_given = true;
      if (manifest_seeds) *manifest_seeds = m.seeds;
    }
    if (!f.config.empty()) {
      const auto kv = hp3o::read_key_values(f.config);
      env_given = env_given || kv.count("env");
      hp3o::apply(cfg, kv);
    }
    if (!f.algo.empty()) cfg.algo = hp3o::parse_algo(f.algo);
    if (!f.env.empty()) {
      cfg.env = f.env;
      env_given = true;
    }
    if (f.steps >= 0) cfg.steps = f.steps;
    for (const auto& s : f.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      const std::string key = s.substr(0, eq);
      if (key == "env") env_given = true;
      hp3o::apply(cfg, key, s.substr(eq + 1));
    }
    if (!env_given) throw UsageError("--env is required (or supply it via --config/--manifest)");
    hp3o::make_env(cfg.env);
    cfg.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

int cmd_train(const RunFlags& f, unsigned long long seed, bool seed_given, bool dump) {
  std::vector<unsigned long long> mseeds;
  hp3o::TrainConfig cfg = resolve_config(f, &mseeds);
  if (seed_given) cfg.seed = seed;
  else if (!mseeds.empty()) cfg.seed = mseeds.front();

  const hp3o::fs::path out(f.out);
  hp3o::fs::create_directories(out);
  hp3o::RunManifest m{cfg, {cfg.seed}, f.out, hp3o::kVersion, hp3o::utc_timestamp()};
  hp3o::write_json_file(out / "manifest.json", hp3o::to_json(m));
  std::ofstream(out / "config.txt") << [&] {
    std::ostringstream os;
    hp3o::write_key_values(os, hp3o::to_key_values(cfg));
    return os.str();
  }();

  const hp3o::RunOutcome o = hp3o::train_to_directory(cfg, out, dump);
  std::cout << "episodes=" << o.episodes << " final_return=" << o.final_return;
  if (o.ev_final) std::cout << " ev_final=" << *o.ev_final;
  std::cout << '\n';
  return kOk;
}

std::vector<unsigned long long> parse_seed_list(const std::string& s) {
  std::vector<unsigned long long> seeds;
  const auto dash = s.find('-');
  try {
    if (s.find(',') == std::string::npos && dash != std::string::npos && dash > 0) {
      const auto lo = std::stoull(s.substr(0, dash)), hi = std::stoull(s.substr(dash + 1));
      for (auto v = lo; v <= hi; ++v) seeds.push_back(v);
    } else if (s.find(',') == std::string::npos) {
      const auto n = std::stoull(s);  // a bare count N means seeds 1..N
      for (unsigned long long v = 1; v <= n; ++v) seeds.push_back(v);
    } else {
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) seeds.push_back(std::stoull(item));
    }
  } catch (const std::exception&) {
    throw UsageError("cannot parse --seeds '" + s + "'");
  }
  return seeds;
}

int cmd_bench(const RunFlags& f, const std::string& seeds_arg, const std::string& algos_arg, unsigned jobs) {
  RunFlags base_flags = f;
  base_flags.algo.clear();
  std::vector<unsigned long long> mseeds;
  hp3o::TrainConfig base = resolve_config(base_flags, &mseeds);
  std::vector<unsigned long long> seeds =
      seeds_arg.empty() && !mseeds.empty() ? mseeds : parse_seed_list(seeds_arg.empty() ? "5" : seeds_arg);
  if (seeds.size() < 2) throw UsageError("bench needs at least 2 seeds to report spread");

  std::vector<hp3o::Algo> algos;
  {
    std::string list = !f.algo.empty() ? f.algo : (algos_arg.empty() ? hp3o::to_string(base.algo) : algos_arg);
    std::stringstream ss(list);
    std::string item;
    try {
      while (std::getline(ss, item, ',')) algos.push_back(hp3o::parse_algo(item));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }

  const hp3o::fs::path out(f.out);
  hp3o::fs::create_directories(out);
  hp3o::RunManifest m{base, seeds, f.out, hp3o::kVersion, hp3o::utc_timestamp()};
  hp3o::write_json_file(out / "manifest.json", hp3o::to_json(m));

  int rc = kOk;
  for (hp3o::Algo a : algos) {
    hp3o::TrainConfig cfg = base;
    cfg.algo = a;
    try {
      const hp3o::BenchResult br = hp3o::bench_to_directory(cfg, seeds, out, jobs);
      std::cout << hp3o::to_string(a) << ": final_mean=" << br.aggregate.final_mean
                << " final_std=" << br.aggregate.final_std << " relative_std=" << br.aggregate.relative_std
                << '\n';
      for (const auto& fail : br.failures) {
        std::cerr << hp3o::to_string(a) << ": " << fail << '\n';
        rc = kFailure;
      }
    } catch (const std::runtime_error& e) {
      std::cerr << hp3o::to_string(a) << ": " << e.what() << '\n';
      rc = kFailure;
    }
  }
  return rc;
}

int cmd_verify(long instances, unsigned long long seed, const std::string& checks_arg, const std::string& out) {
  std::vector<std::string> checks;
  if (checks_arg.empty() || checks_arg == "all") {
    checks = hp3o::theory::all_checks();
  } else {
    std::stringstream ss(checks_arg);
    std::string item;
    while (std::getline(ss, item, ',')) checks.push_back(item);
  }
  if (instances < 1) throw UsageError("--instances must be >= 1");
  hp3o::theory::SweepReport rep;
  try {
    rep = hp3o::theory::run_bound_sweep(instances, seed, checks);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const std::string text = hp3o::theory::to_json(rep).dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream os(out);
    if (!os) throw std::runtime_error("cannot write " + out);
    os << text;
  }
  for (const auto& [name, s] : rep.checks)
    std::cerr << name << ": " << s.passed << "/" << s.total << " min_slack=" << s.min_slack << '\n';
  return rep.all_passed() ? kOk : kFailure;
}

int cmd_plot(const std::vector<std::string>& inputs, std::vector<std::string> labels, const std::string& out,
             const std::string& title) {
  if (!labels.empty() && labels.size() != inputs.size())
    throw UsageError("--label must be given once per input");
  std::vector<hp3o::plot::Series> series;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::string label = labels.empty() ? hp3o::fs::path(inputs[i]).stem().string() : labels[i];
    series.push_back(hp3o::plot::read_curve_csv_file(inputs[i], label));
  }
  hp3o::plot::PlotOptions opt;
  if (!title.empty()) opt.title = title;
  std::ofstream os(out, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + out);
  os << hp3o::plot::render_svg(series, opt);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy optimization with a trajectory replay buffer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", hp3o::kVersion);

  RunFlags train_flags;
  unsigned long long train_seed = 0;
  bool dump = false;
  auto* train = app.add_subcommand("train", "train one seed");
  add_run_flags(train, train_flags);
  auto* seed_opt = train->add_option("--seed", train_seed, "run seed");
  train->add_flag("--dump-trajectories", dump, "write every episode to trajectories.jsonl");

  RunFlags bench_flags;
  std::string bench_seeds, bench_algos;
  unsigned jobs = 1;
  auto* bench = app.add_subcommand("bench", "train several seeds and aggregate");
  add_run_flags(bench, bench_flags);
  bench->add_option("--seeds", bench_seeds, "N (seeds 1..N), a-b, or a comma list; default 5");
  bench->add_option("--algos", bench_algos, "comma list of algorithms");
  bench->add_option("--jobs", jobs, "concurrent seeds")->check(CLI::PositiveNumber);

  long instances = 1000;
  unsigned long long vseed = 0;
  std::string checks, vout;
  auto* verify = app.add_subcommand("verify-bounds", "check the analytical bounds on random tabular MDPs");
  verify->add_option("--instances", instances, "number of random instances");
  verify->add_option("--seed", vseed, "sweep seed");
  verify->add_option("--checks", checks, "comma list or 'all'");
  verify->add_option("--out", vout, "report path (default stdout)");

  std::vector<std::string> plot_inputs, plot_labels;
  std::string plot_out, plot_title;
  auto* plot = app.add_subcommand("plot", "render learning curves as SVG");
  plot->add_option("--in", plot_inputs, "curve_<algo>.csv or log.csv files")->required();
  plot->add_option("--label", plot_labels, "legend label per input");
  plot->add_option("--out", plot_out, "SVG path")->required();
  plot->add_option("--title", plot_title, "plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*train) return cmd_train(train_flags, train_seed, seed_opt->count() > 0, dump);
    if (*bench) return cmd_bench(bench_flags, bench_seeds, bench_algos, jobs);
    if (*verify) return cmd_verify(instances, vseed, checks, vout);
    if (*plot) return cmd_plot(plot_inputs, plot_labels, plot_out, plot_title);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
