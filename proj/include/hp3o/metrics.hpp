#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace hp3o {

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty series");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double population_variance(std::span<const double> xs) {
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return acc / static_cast<double>(xs.size());
}

inline double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw std::invalid_argument("sample_std needs at least two values");
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

// EV = 1 - Var(y - yhat) / Var(y), population variances. Empty when Var(y) == 0.
inline std::optional<double> explained_variance(std::span<const double> targets,
                                                std::span<const double> predictions) {
  if (targets.size() != predictions.size())
    throw std::invalid_argument("explained_variance: length mismatch");
  if (targets.size() < 2) throw std::invalid_argument("explained_variance: need >= 2 points");
  const double var_y = population_variance(targets);
  if (!(var_y > 0.0)) return std::nullopt;
  std::vector<double> residual(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) residual[i] = targets[i] - predictions[i];
  return 1.0 - population_variance(residual) / var_y;
}

// Critic targets and predictions seen by one update.
struct UpdateValues {
  double env_steps = 0.0;
  std::vector<double> targets;
  std::vector<double> predictions;
};

struct RunStats {
  long seed = 0;
  std::vector<double> env_steps;  // cumulative, at the end of each episode
  std::vector<double> returns;    // undiscounted episode returns
  std::vector<UpdateValues> updates;

  void validate() const {
    if (env_steps.size() != returns.size())
      throw std::invalid_argument("RunStats: env_steps and returns differ in length");
    if (!std::is_sorted(env_steps.begin(), env_steps.end()))
      throw std::invalid_argument("RunStats: env_steps must be non-decreasing");
  }
};

// Mean undiscounted return of the last `window` episodes.
inline double final_return(const RunStats& run, std::size_t window = 10) {
  if (run.returns.empty()) throw std::invalid_argument("final_return: empty run");
  const std::size_t n = std::min(window, run.returns.size());
  return mean(std::span<const double>(run.returns).last(n));
}

// EV pooled over every update whose env_steps lies in the final `fraction` of the run.
inline std::optional<double> final_explained_variance(const RunStats& run, double fraction = 0.1) {
  if (run.updates.empty()) return std::nullopt;
  const double end = run.updates.back().env_steps;
  const double start = (1.0 - fraction) * end;
  std::vector<double> y, yhat;
  for (const auto& u : run.updates) {
    if (u.env_steps < start) continue;
    y.insert(y.end(), u.targets.begin(), u.targets.end());
    yhat.insert(yhat.end(), u.predictions.begin(), u.predictions.end());
  }
  if (y.size() < 2) return std::nullopt;
  return explained_variance(y, yhat);
}

// Piecewise-linear interpolation of (xs, ys) at x; clamps outside the sampled range.
inline double interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
  if (xs.empty()) throw std::invalid_argument("interpolate: empty series");
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  if (xs[hi] == xs[lo]) return ys[hi];
  const double w = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + w * (ys[hi] - ys[lo]);
}

struct SeedAggregate {
  std::vector<double> grid;
  std::vector<double> mean_curve;
  std::vector<double> std_band;
  std::vector<double> min_curve;
  std::vector<double> max_curve;
  std::vector<double> final_returns;
  double final_mean = 0.0;
  double final_std = 0.0;
  double relative_std = 0.0;
};

// Pointwise mean and sample std across runs on a shared env-step grid; relative std is
// final_std / |final_mean| over per-run final returns.
inline SeedAggregate aggregate_seeds(const std::vector<RunStats>& runs, std::size_t grid_points = 200,
                                     std::size_t final_window = 10) {
  if (runs.size() < 2) throw std::invalid_argument("aggregate_seeds: need at least two runs");
  if (grid_points < 2) throw std::invalid_argument("aggregate_seeds: need at least two grid points");
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& r : runs) {
    r.validate();
    if (r.returns.empty()) throw std::invalid_argument("aggregate_seeds: run without episodes");
    lo = std::max(lo, r.env_steps.front());
    hi = std::min(hi, r.env_steps.back());
  }
  if (hi < lo) hi = lo;

  SeedAggregate agg;
  agg.grid.resize(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i)
    agg.grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1);

  std::vector<double> column(runs.size());
  for (double x : agg.grid) {
    for (std::size_t r = 0; r < runs.size(); ++r)
      column[r] = interpolate(runs[r].env_steps, runs[r].returns, x);
    agg.mean_curve.push_back(mean(column));
    agg.std_band.push_back(sample_std(column));
    agg.min_curve.push_back(*std::min_element(column.begin(), column.end()));
    agg.max_curve.push_back(*std::max_element(column.begin(), column.end()));
  }

  for (const auto& r : runs) agg.final_returns.push_back(final_return(r, final_window));
  agg.final_mean = mean(agg.final_returns);
  agg.final_std = sample_std(agg.final_returns);
  agg.relative_std = agg.final_std / std::abs(agg.final_mean);
  return agg;
}

}  // namespace hp3o
