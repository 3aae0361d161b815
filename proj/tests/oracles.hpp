#pragma once
// Independent reference computations the library is checked against. Nothing here calls the
// code under test for the quantity being checked.

#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "hp3o/core.hpp"
#include "hp3o/nn.hpp"
#include "hp3o/theory.hpp"
#include "hp3o/trajectory.hpp"

namespace oracle {

using hp3o::Matrix;
using hp3o::Rng;
using hp3o::Vector;

// Mean length of a uniform-random CartPole episode, from a separate 200k-episode simulation
// of the same equations; the per-episode standard deviation was 11.85.
inline constexpr double kRandomCartPoleMeanLength = 22.27;
inline constexpr double kRandomCartPoleLengthStd = 11.85;

// G_t = sum_{l=t+1}^{T} gamma^{l-t-1} r_l, evaluated term by term.
inline std::vector<double> returns_to_go_double_sum(const std::vector<double>& r, double gamma) {
  const std::size_t n = r.size();
  std::vector<double> g(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t l = t + 1; l <= n; ++l) g[t] += std::pow(gamma, static_cast<double>(l - t - 1)) * r[l - 1];
  return g;
}

// Central differences of a scalar function of a parameter vector.
inline Vector finite_difference(const std::function<double(const Vector&)>& f, Vector x, double h = 1e-5) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    x[i] = xi + h;
    const double up = f(x);
    x[i] = xi - h;
    const double down = f(x);
    x[i] = xi;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double max_relative_error(const Vector& a, const Vector& b, double floor = 1e-6) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

// Plain nested-loop evaluation of a tanh MLP with a linear output layer.
inline std::vector<double> mlp_loops(const hp3o::Mlp& net, const std::vector<double>& x) {
  std::vector<double> h = x;
  for (int layer = 0; layer < net.n_layers(); ++layer) {
    const auto w = net.weight(layer);
    const auto b = net.bias(layer);
    std::vector<double> next(static_cast<std::size_t>(w.rows()), 0.0);
    for (Eigen::Index o = 0; o < w.rows(); ++o) {
      double acc = b[o];
      for (Eigen::Index i = 0; i < w.cols(); ++i) acc += w(o, i) * h[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(o)] = layer + 1 < net.n_layers() ? std::tanh(acc) : acc;
    }
    h = std::move(next);
  }
  return h;
}

// Reference FIFO: ids and returns only.
struct BufferModel {
  std::size_t capacity;
  std::deque<std::pair<long, double>> items;

  std::optional<long> push(long id, double ret) {
    items.emplace_back(id, ret);
    if (items.size() <= capacity) return std::nullopt;
    const long out = items.front().first;
    items.pop_front();
    return out;
  }

  // Linear scan from the newest entry backwards, strict improvement only.
  std::size_t best() const {
    std::size_t b = items.size() - 1;
    for (std::size_t i = items.size() - 1; i-- > 0;)
      if (items[i].second > items[b].second) b = i;
    return b;
  }
};

inline hp3o::Trajectory make_trajectory(Rng& rng, long id, std::size_t len, double gamma, int obs_dim = 2) {
  std::normal_distribution<double> n(0.0, 1.0);
  hp3o::Trajectory t;
  t.episode_index = id;
  for (std::size_t i = 0; i < len; ++i) {
    Vector o(obs_dim);
    for (int k = 0; k < obs_dim; ++k) o[k] = n(rng);
    t.observations.push_back(o);
    t.actions.push_back(Vector::Constant(1, static_cast<double>(rng() % 2)));
    t.rewards.push_back(n(rng));
    t.behavior_logprobs.push_back(-std::abs(n(rng)));
  }
  hp3o::cache_discounted_return(t, gamma);
  return t;
}

// Monte-Carlo estimate of J with geometric termination: each step continues with probability
// gamma, so the undiscounted reward sum of an episode is an unbiased sample of J.
struct McEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
};

inline McEstimate monte_carlo_objective(const hp3o::theory::TabularMDP& mdp, const hp3o::theory::TabularPolicy& pi,
                                        long total_steps, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto draw = [&](auto&& row) {
    const double x = u(rng);
    double c = 0.0;
    for (Eigen::Index i = 0; i < row.size(); ++i) {
      c += row[i];
      if (x < c) return static_cast<int>(i);
    }
    return static_cast<int>(row.size() - 1);
  };
  double sum = 0.0, sum_sq = 0.0;
  long episodes = 0, steps = 0;
  while (steps < total_steps) {
    int s = draw(mdp.initial);
    double ret = 0.0;
    for (;;) {
      const int a = draw(pi.probs.row(s));
      ret += mdp.reward(s, a);
      ++steps;
      if (u(rng) >= mdp.gamma) break;
      s = draw(mdp.transition.row(mdp.row(s, a)));
    }
    sum += ret;
    sum_sq += ret * ret;
    ++episodes;
  }
  McEstimate e;
  e.mean = sum / static_cast<double>(episodes);
  const double var = sum_sq / static_cast<double>(episodes) - e.mean * e.mean;
  e.standard_error = std::sqrt(var / static_cast<double>(episodes));
  return e;
}

}  // namespace oracle
