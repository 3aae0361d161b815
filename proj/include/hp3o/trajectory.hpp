#pragma once

#include "hp3o/core.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <deque>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

namespace hp3o {

// One full episode. rewards[t] is r_{t+1}, the reward received after acting a_t in s_t.
struct Trajectory {
  std::vector<Observation> observations;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::vector<double> behavior_logprobs;
  long episode_index = 0;
  double discounted_return = 0.0;
  bool terminated = false;

  std::size_t length() const { return rewards.size(); }

  double undiscounted_return() const {
    return std::accumulate(rewards.begin(), rewards.end(), 0.0);
  }

  bool consistent() const {
    const auto n = rewards.size();
    return n >= 1 && observations.size() == n && actions.size() == n &&
           behavior_logprobs.size() == n;
  }
};

// sum_t gamma^t r_{t+1}
inline double discounted_sum(const std::vector<double>& rewards, double gamma) {
  double g = 0.0;
  for (auto it = rewards.rbegin(); it != rewards.rend(); ++it) g = *it + gamma * g;
  return g;
}

inline void cache_discounted_return(Trajectory& tau, double gamma) {
  tau.discounted_return = discounted_sum(tau.rewards, gamma);
}

// G_t = sum_{l=t+1}^T gamma^{l-t-1} r_l via the backward recursion G_t = r_{t+1} + gamma G_{t+1}.
inline std::vector<double> compute_returns_to_go(const Trajectory& tau, double gamma) {
  if (tau.rewards.empty()) throw std::invalid_argument("returns-to-go: empty trajectory");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("returns-to-go: gamma not in (0,1]");
  std::vector<double> g(tau.rewards.size());
  double acc = 0.0;
  for (std::size_t i = tau.rewards.size(); i-- > 0;) {
    acc = tau.rewards[i] + gamma * acc;
    g[i] = acc;
  }
  return g;
}

class EmptyBufferError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bounded FIFO store of complete trajectories, oldest first. Lengths are kept as generated.
class TrajectoryBuffer {
 public:
  explicit TrajectoryBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw std::invalid_argument("TrajectoryBuffer: capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const Trajectory& operator[](std::size_t i) const { return entries_[i]; }
  const std::deque<Trajectory>& entries() const { return entries_; }

  std::optional<Trajectory> push(Trajectory tau) {
    entries_.push_back(std::move(tau));
    if (entries_.size() <= capacity_) return std::nullopt;
    Trajectory evicted = std::move(entries_.front());
    entries_.pop_front();
    return evicted;
  }

  // Index of the entry with the largest cached discounted return; ties go to the newest.
  std::size_t best_index() const {
    if (entries_.empty()) throw EmptyBufferError("best_trajectory: buffer is empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < entries_.size(); ++i)
      if (entries_[i].discounted_return >= entries_[best].discounted_return) best = i;
    return best;
  }

  const Trajectory& best_trajectory() const { return entries_[best_index()]; }

 private:
  std::size_t capacity_;
  std::deque<Trajectory> entries_;
};

// One timestep of an update batch, pointing back at its source trajectory.
struct Transition {
  Observation observation;
  Action action;
  double return_to_go = 0.0;
  double behavior_logprob = 0.0;
  long trajectory_id = 0;
  std::size_t timestep = 0;
};

struct UpdateBatch {
  // Buffer indices of the selected trajectories; best_position indexes into this list.
  std::vector<std::size_t> selected;
  std::size_t best_position = 0;
  // returns_to_go[k] belongs to selected[k].
  std::vector<std::vector<double>> returns_to_go;
  std::vector<Transition> transitions;
};

// Flattens the given buffer entries into transitions with their returns-to-go.
inline void flatten_into(UpdateBatch& batch, const TrajectoryBuffer& buffer, double gamma) {
  batch.returns_to_go.clear();
  batch.transitions.clear();
  for (std::size_t idx : batch.selected) {
    const Trajectory& tau = buffer[idx];
    auto g = compute_returns_to_go(tau, gamma);
    for (std::size_t t = 0; t < tau.length(); ++t)
      batch.transitions.push_back(
          {tau.observations[t], tau.actions[t], g[t], tau.behavior_logprobs[t], tau.episode_index, t});
    batch.returns_to_go.push_back(std::move(g));
  }
}

// Best trajectory plus min(|B|-1, size-1) distinct others drawn uniformly without replacement.
inline UpdateBatch assemble_batch(const TrajectoryBuffer& buffer, std::size_t batch_trajectories,
                                  double gamma, Rng& rng) {
  if (batch_trajectories < 1) throw std::invalid_argument("assemble_batch: |B| must be >= 1");
  const std::size_t best = buffer.best_index();
  std::vector<std::size_t> others;
  others.reserve(buffer.size() - 1);
  for (std::size_t i = 0; i < buffer.size(); ++i)
    if (i != best) others.push_back(i);
  const std::size_t k = std::min(batch_trajectories - 1, others.size());
  // partial Fisher-Yates
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, others.size() - 1);
    std::swap(others[i], others[pick(rng)]);
  }
  UpdateBatch batch;
  batch.selected.assign(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(batch.selected.begin(), batch.selected.end());
  batch.selected.push_back(best);
  batch.best_position = batch.selected.size() - 1;
  flatten_into(batch, buffer, gamma);
  return batch;
}

// A permutation of [0, n) cut into minibatches; the last may be shorter.
inline std::vector<std::vector<std::size_t>> shuffled_minibatches(std::size_t n,
                                                                  std::size_t minibatch_size,
                                                                  Rng& rng) {
  if (minibatch_size == 0) throw std::invalid_argument("minibatch_size must be positive");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(perm[i - 1], perm[pick(rng)]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += minibatch_size)
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + minibatch_size)));
  return out;
}

// Rough footprint in bytes of N stored trajectories of mean length T: N * T * n * (d_s + d_a).
inline std::uint64_t estimate_memory(std::uint64_t capacity, std::uint64_t mean_length,
                                     std::uint64_t float_bytes, std::uint64_t obs_dim,
                                     std::uint64_t action_dim) {
  return capacity * mean_length * float_bytes * (obs_dim + action_dim);
}

// Trajectory dump: one JSON object per line,
// {"episode_index", "length", "discounted_return", "terminated", "observation_dim",
//  "action_dim", "observations" (row-major T x d_s), "actions" (T x d_a), "rewards",
//  "behavior_logprobs"}.
inline nlohmann::json trajectory_record(const Trajectory& tau) {
  const std::size_t ds = tau.observations.empty() ? 0 : tau.observations.front().size();
  const std::size_t da = tau.actions.empty() ? 0 : tau.actions.front().size();
  std::vector<double> obs, act;
  obs.reserve(tau.length() * ds);
  act.reserve(tau.length() * da);
  for (const auto& o : tau.observations) obs.insert(obs.end(), o.data(), o.data() + o.size());
  for (const auto& a : tau.actions) act.insert(act.end(), a.data(), a.data() + a.size());
  return {{"episode_index", tau.episode_index},
          {"length", tau.length()},
          {"discounted_return", tau.discounted_return},
          {"terminated", tau.terminated},
          {"observation_dim", ds},
          {"action_dim", da},
          {"observations", obs},
          {"actions", act},
          {"rewards", tau.rewards},
          {"behavior_logprobs", tau.behavior_logprobs}};
}

inline Trajectory trajectory_from_record(const nlohmann::json& j) {
  Trajectory tau;
  tau.episode_index = j.at("episode_index").get<long>();
  tau.discounted_return = j.at("discounted_return").get<double>();
  tau.terminated = j.at("terminated").get<bool>();
  const auto n = j.at("length").get<std::size_t>();
  const auto ds = j.at("observation_dim").get<Eigen::Index>();
  const auto da = j.at("action_dim").get<Eigen::Index>();
  const auto obs = j.at("observations").get<std::vector<double>>();
  const auto act = j.at("actions").get<std::vector<double>>();
  tau.rewards = j.at("rewards").get<std::vector<double>>();
  tau.behavior_logprobs = j.at("behavior_logprobs").get<std::vector<double>>();
  if (obs.size() != n * ds || act.size() != n * da || tau.rewards.size() != n)
    throw std::runtime_error("trajectory record: array sizes disagree with length");
  for (std::size_t t = 0; t < n; ++t) {
    tau.observations.push_back(Eigen::Map<const Vector>(obs.data() + t * ds, ds));
    tau.actions.push_back(Eigen::Map<const Vector>(act.data() + t * da, da));
  }
  return tau;
}

inline void dump_trajectory(std::ostream& os, const Trajectory& tau) {
  os << trajectory_record(tau).dump() << '\n';
}

}  // namespace hp3o
