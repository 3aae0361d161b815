#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>
#include <string>

#include "hp3o/config.hpp"
#include "hp3o/metrics.hpp"
#include "hp3o/plot.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hp3o_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HP3O_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

hp3o::RunStats linear_run(double slope, double offset, int n = 20) {
  hp3o::RunStats r;
  for (int i = 1; i <= n; ++i) {
    r.env_steps.push_back(10.0 * i);
    r.returns.push_back(offset + slope * i);
  }
  return r;
}

}  // namespace

TEST(ExplainedVariance, Examples) {
  const std::vector<double> y{1, 2, 3, 4};
  EXPECT_NEAR(*hp3o::explained_variance(y, y), 1.0, 1e-12);
  EXPECT_NEAR(*hp3o::explained_variance(y, std::vector<double>{2, 3, 4, 5}), 1.0, 1e-12);
  EXPECT_NEAR(*hp3o::explained_variance(y, std::vector<double>{4, 3, 2, 1}), -3.0, 1e-12);
  EXPECT_FALSE(hp3o::explained_variance(std::vector<double>{2, 2, 2}, std::vector<double>{1, 2, 3}));
}

TEST(ExplainedVariance, ShiftInvariantAndAtMostOne) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> y(30), yh(30), ys(30), yhs(30);
    const double c = 10.0 * n(rng);
    for (int i = 0; i < 30; ++i) {
      y[i] = n(rng);
      yh[i] = y[i] + 0.5 * n(rng);
      ys[i] = y[i] + c;
      yhs[i] = yh[i] + c;
    }
    const double ev = *hp3o::explained_variance(y, yh);
    EXPECT_LE(ev, 1.0);
    EXPECT_NEAR(ev, *hp3o::explained_variance(ys, yhs), 1e-9);
  }
}

TEST(Aggregate, TwoRunsFinalStatistics) {
  hp3o::RunStats a, b;
  for (int i = 1; i <= 10; ++i) {
    a.env_steps.push_back(i);
    a.returns.push_back(480.0);
    b.env_steps.push_back(i);
    b.returns.push_back(520.0);
  }
  const auto agg = hp3o::aggregate_seeds({a, b});
  EXPECT_NEAR(agg.final_mean, 500.0, 1e-12);
  EXPECT_NEAR(agg.final_std, 28.2842712474619, 1e-10);
  EXPECT_NEAR(agg.relative_std, 0.0565685424949238, 1e-12);
}

TEST(Aggregate, IdenticalRunsHaveNoBand) {
  const auto r = linear_run(2.0, 1.0);
  const auto agg = hp3o::aggregate_seeds({r, r, r});
  for (double s : agg.std_band) EXPECT_NEAR(s, 0.0, 1e-12);
  EXPECT_NEAR(agg.final_std, 0.0, 1e-12);
}

TEST(Aggregate, MeanLiesBetweenMinAndMax) {
  const auto agg = hp3o::aggregate_seeds({linear_run(1.0, 0.0), linear_run(-1.0, 5.0), linear_run(0.5, 2.0)});
  for (std::size_t i = 0; i < agg.grid.size(); ++i) {
    EXPECT_LE(agg.min_curve[i], agg.mean_curve[i] + 1e-12);
    EXPECT_GE(agg.max_curve[i], agg.mean_curve[i] - 1e-12);
  }
  EXPECT_THROW(hp3o::aggregate_seeds({linear_run(1.0, 0.0)}), std::invalid_argument);
}

TEST(FinalMetrics, WindowAndPooling) {
  hp3o::RunStats r = linear_run(1.0, 0.0, 30);
  EXPECT_DOUBLE_EQ(hp3o::final_return(r), 25.5);
  EXPECT_FALSE(hp3o::final_explained_variance(r));
  for (int i = 1; i <= 10; ++i) r.updates.push_back({100.0 * i, {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}});
  r.updates.front().predictions = {9.0, 9.0, 9.0};  // outside the final 10%
  EXPECT_NEAR(*hp3o::final_explained_variance(r), 1.0, 1e-12);
}

TEST(Config, ParseApplyAndRoundTrip) {
  std::istringstream in("algo = hp3o_plus  # comment\nepochs=3\nhidden = 32, 32\n\n");
  hp3o::TrainConfig c;
  hp3o::apply(c, hp3o::parse_key_values(in));
  EXPECT_EQ(c.algo, hp3o::Algo::kHp3oPlus);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.hidden, (std::vector<int>{32, 32}));

  hp3o::TrainConfig d;
  hp3o::apply(d, hp3o::to_key_values(c));
  EXPECT_EQ(hp3o::to_key_values(d), hp3o::to_key_values(c));

  EXPECT_THROW(hp3o::apply(c, "learning_rate", "1"), std::invalid_argument);
  EXPECT_THROW(hp3o::apply(c, "epochs", "three"), std::invalid_argument);
  std::istringstream bad("epochs 3\n");
  EXPECT_THROW(hp3o::parse_key_values(bad), std::invalid_argument);
}

TEST(Plot, SingleRunLogHasNoBand) {
  std::istringstream log("episode,env_steps,return\n0,10,10\n1,30,20\n");
  const auto s = hp3o::plot::read_curve_csv(log, "run");
  EXPECT_TRUE(s.band.empty());
  const std::string svg = hp3o::plot::render_svg({s});
  EXPECT_EQ(svg.find("class=\"band\""), std::string::npos);
  EXPECT_NE(svg.find("class=\"mean\""), std::string::npos);
}

TEST(Plot, SeriesGetDistinctColorsAndOutputIsStable) {
  std::istringstream a("env_steps,mean,std\n0,1,0.5\n10,2,0.5\n"), b("env_steps,mean,std\n0,3,1\n10,1,1\n");
  const auto sa = hp3o::plot::read_curve_csv(a, "a"), sb = hp3o::plot::read_curve_csv(b, "b");
  const std::string svg = hp3o::plot::render_svg({sa, sb});
  EXPECT_NE(svg.find(hp3o::plot::palette()[0]), std::string::npos);
  EXPECT_NE(svg.find(hp3o::plot::palette()[1]), std::string::npos);
  EXPECT_EQ(svg, hp3o::plot::render_svg({sa, sb}));
  std::size_t bands = 0;
  for (auto p = svg.find("class=\"band\""); p != std::string::npos; p = svg.find("class=\"band\"", p + 1)) ++bands;
  EXPECT_EQ(bands, 2u);
}

TEST(Plot, MalformedCsvIsRejected) {
  using hp3o::plot::CsvError;
  std::istringstream ragged("env_steps,mean\n1,2\n3\n"), text("env_steps,mean\n1,abc\n"), empty("env_steps,mean\n"),
      header("x,y\n1,2\n");
  EXPECT_THROW(hp3o::plot::read_curve_csv(ragged, "r"), CsvError);
  EXPECT_THROW(hp3o::plot::read_curve_csv(text, "t"), CsvError);
  EXPECT_THROW(hp3o::plot::read_curve_csv(empty, "e"), CsvError);
  EXPECT_THROW(hp3o::plot::read_curve_csv(header, "h"), CsvError);
}

TEST(Cli, MissingEnvIsAUsageError) {
  const auto dir = scratch("noenv");
  EXPECT_EQ(run_cli("train --algo hp3o --steps 100 --out " + (dir / "run").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("train --env gridworld --steps 100 --set nonsense=1 --out " + (dir / "run").string()), 2);
}

TEST(Cli, ManifestReplayReproducesTheLog) {
  const auto dir = scratch("replay");
  const std::string first = (dir / "first").string(), second = (dir / "second").string();
  ASSERT_EQ(run_cli("train --env gridworld --algo hp3o --steps 3000 --seed 7 --set hidden=16 --out " + first), 0);
  for (const char* f : {"log.csv", "summary.json", "manifest.json", "config.txt", "checkpoints/final.json"})
    EXPECT_TRUE(fs::exists(fs::path(first) / f)) << f;
  ASSERT_EQ(run_cli("train --manifest " + first + "/manifest.json --out " + second), 0);
  EXPECT_EQ(slurp(fs::path(first) / "log.csv"), slurp(fs::path(second) / "log.csv"));
}

TEST(Cli, BenchNeedsTwoSeedsAndIsReproducible) {
  const auto dir = scratch("bench");
  const std::string common = "bench --env gridworld --algo hp3o --steps 1500 --set hidden=16 ";
  EXPECT_EQ(run_cli(common + "--seeds 1 --out " + (dir / "one").string()), 2);
  ASSERT_EQ(run_cli(common + "--seeds 1-2 --out " + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli(common + "--seeds 1,2 --jobs 2 --out " + (dir / "b").string()), 0);
  const auto summary = nlohmann::json::parse(slurp(dir / "a" / "summary_hp3o.json"));
  for (const char* k : {"env", "algo", "seeds", "final_returns", "final_mean", "final_std", "relative_std", "ev_final"})
    EXPECT_TRUE(summary.contains(k)) << k;
  EXPECT_EQ(summary["seeds"].size(), 2u);
  EXPECT_EQ(slurp(dir / "a" / "summary_hp3o.json"), slurp(dir / "b" / "summary_hp3o.json"));
  EXPECT_EQ(slurp(dir / "a" / "curve_hp3o.csv"), slurp(dir / "b" / "curve_hp3o.csv"));
  EXPECT_EQ(run_cli("plot --in " + (dir / "a" / "curve_hp3o.csv").string() + " --out " + (dir / "c.svg").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "c.svg"));
}

TEST(Cli, VerifyBoundsReport) {
  const auto dir = scratch("verify");
  ASSERT_EQ(run_cli("verify-bounds --instances 100 --seed 3 --out " + (dir / "a.json").string()), 0);
  ASSERT_EQ(run_cli("verify-bounds --instances 100 --seed 3 --out " + (dir / "b.json").string()), 0);
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "b.json"));
  const auto rep = nlohmann::json::parse(slurp(dir / "a.json"));
  EXPECT_TRUE(rep["all_passed"].get<bool>());
  EXPECT_EQ(rep["checks"].size(), 5u);

  ASSERT_EQ(run_cli("verify-bounds --instances 20 --checks lemma1 --out " + (dir / "l1.json").string()), 0);
  const auto only = nlohmann::json::parse(slurp(dir / "l1.json"));
  EXPECT_EQ(only["checks"].size(), 1u);
  EXPECT_TRUE(only["checks"].contains("lemma1"));
  EXPECT_EQ(run_cli("verify-bounds --checks lemma9"), 2);
}
