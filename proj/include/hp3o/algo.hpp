#pragma once

#include "hp3o/config.hpp"
#include "hp3o/env.hpp"
#include "hp3o/metrics.hpp"
#include "hp3o/nn.hpp"
#include "hp3o/rollout.hpp"
#include "hp3o/trajectory.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace hp3o {

// Column-per-transition view of an update batch with its advantage estimates.
struct AdvantageBatch {
  Matrix observations;
  Matrix actions;
  Vector returns;            // G_t
  Vector baseline;           // b_t
  Vector advantages;         // G_t - b_t
  Vector policy_advantages;  // advantages, standardized when normalization is on
  Vector behavior_logprob;
  Vector critic_values;      // V_phi(s_t), always the critic's prediction

  Eigen::Index size() const { return returns.size(); }

  AdvantageBatch subset(const std::vector<std::size_t>& idx) const {
    AdvantageBatch b;
    const auto n = static_cast<Eigen::Index>(idx.size());
    b.observations.resize(observations.rows(), n);
    b.actions.resize(actions.rows(), n);
    b.returns.resize(n);
    b.baseline.resize(n);
    b.advantages.resize(n);
    b.policy_advantages.resize(n);
    b.behavior_logprob.resize(n);
    b.critic_values.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto i = static_cast<Eigen::Index>(idx[j]);
      b.observations.col(j) = observations.col(i);
      b.actions.col(j) = actions.col(i);
      b.returns[j] = returns[i];
      b.baseline[j] = baseline[i];
      b.advantages[j] = advantages[i];
      b.policy_advantages[j] = policy_advantages[i];
      b.behavior_logprob[j] = behavior_logprob[i];
      b.critic_values[j] = critic_values[i];
    }
    return b;
  }
};

inline AdvantageBatch gather_transitions(const std::vector<Transition>& transitions) {
  if (transitions.empty()) throw std::invalid_argument("advantage batch: no transitions");
  AdvantageBatch b;
  const auto n = static_cast<Eigen::Index>(transitions.size());
  b.observations.resize(transitions.front().observation.size(), n);
  b.actions.resize(transitions.front().action.size(), n);
  b.returns.resize(n);
  b.behavior_logprob.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& tr = transitions[j];
    b.observations.col(j) = tr.observation;
    b.actions.col(j) = tr.action;
    b.returns[j] = tr.return_to_go;
    b.behavior_logprob[j] = tr.behavior_logprob;
  }
  if (!b.returns.allFinite()) throw NonFiniteError("advantage batch: non-finite returns-to-go");
  return b;
}

// Sets advantages = G - baseline, then the (optionally standardized) policy advantages.
inline void finalize_advantages(AdvantageBatch& b, bool normalize) {
  b.advantages = b.returns - b.baseline;
  if (!b.advantages.allFinite()) throw NonFiniteError("advantage estimates are not finite");
  b.policy_advantages = b.advantages;
  if (normalize && b.size() > 1) {
    const double m = b.advantages.mean();
    const double sd = std::sqrt((b.advantages.array() - m).square().mean());
    b.policy_advantages = (b.advantages.array() - m) / std::max(sd, 1e-8);
  }
}

// HP3O / PPO: A_t = G_t - V_phi(s_t).
inline AdvantageBatch advantage_hp3o(const std::vector<Transition>& transitions,
                                     const ValueNet& critic, bool normalize = false) {
  AdvantageBatch b = gather_transitions(transitions);
  b.critic_values = critic.values(b.observations);
  if (!b.critic_values.allFinite()) throw NonFiniteError("critic values are not finite");
  b.baseline = b.critic_values;
  finalize_advantages(b, normalize);
  return b;
}

enum class BaselineSource { kBest, kCurrent };

struct BestValueBaseline {
  std::vector<double> values;
  std::vector<BaselineSource> sources;
};

// V^{tau*}(s_t) aligned by timestep: the best trajectory's return-to-go at t unless the
// current one's is larger; past the end of tau* the current return-to-go is used.
inline BestValueBaseline best_value_baseline(const std::vector<double>& current_rtg,
                                             const std::vector<double>& best_rtg) {
  if (current_rtg.empty() || best_rtg.empty())
    throw std::invalid_argument("best_value_baseline: empty trajectory");
  BestValueBaseline out;
  out.values.resize(current_rtg.size());
  out.sources.resize(current_rtg.size());
  for (std::size_t t = 0; t < current_rtg.size(); ++t) {
    if (t < best_rtg.size() && !(current_rtg[t] > best_rtg[t])) {
      out.values[t] = best_rtg[t];
      out.sources[t] = BaselineSource::kBest;
    } else {
      out.values[t] = current_rtg[t];
      out.sources[t] = BaselineSource::kCurrent;
    }
  }
  return out;
}

inline BestValueBaseline best_value_baseline(const Trajectory& current, const Trajectory& best,
                                             double gamma) {
  return best_value_baseline(compute_returns_to_go(current, gamma), compute_returns_to_go(best, gamma));
}

// Nearest-state variant: the candidate for s_t is the best trajectory's return-to-go at its
// state closest to s_t in Euclidean distance (earliest index on ties); same replacement rule.
inline BestValueBaseline best_value_baseline_nearest(const Trajectory& current,
                                                     const std::vector<double>& current_rtg,
                                                     const Trajectory& best,
                                                     const std::vector<double>& best_rtg) {
  if (current.length() == 0 || best.length() == 0)
    throw std::invalid_argument("best_value_baseline_nearest: empty trajectory");
  Matrix best_states(best.observations.front().size(), static_cast<Eigen::Index>(best.length()));
  for (std::size_t i = 0; i < best.length(); ++i)
    best_states.col(static_cast<Eigen::Index>(i)) = best.observations[i];
  BestValueBaseline out;
  out.values.resize(current.length());
  out.sources.resize(current.length());
  for (std::size_t t = 0; t < current.length(); ++t) {
    Eigen::Index match = 0;
    (best_states.colwise() - current.observations[t]).colwise().squaredNorm().minCoeff(&match);
    const double candidate = best_rtg[static_cast<std::size_t>(match)];
    if (current_rtg[t] > candidate) {
      out.values[t] = current_rtg[t];
      out.sources[t] = BaselineSource::kCurrent;
    } else {
      out.values[t] = candidate;
      out.sources[t] = BaselineSource::kBest;
    }
  }
  return out;
}

// HP3O+: A_t = G_t - V^{tau*}(s_t) for every trajectory in the batch. The critic is still
// evaluated so its predictions can be logged and used as regression context.
inline AdvantageBatch advantage_hp3o_plus(const UpdateBatch& batch, const TrajectoryBuffer& buffer,
                                          const ValueNet& critic, BaselineMode mode,
                                          bool normalize = false) {
  AdvantageBatch b = gather_transitions(batch.transitions);
  b.critic_values = critic.values(b.observations);
  if (!b.critic_values.allFinite()) throw NonFiniteError("critic values are not finite");
  b.baseline.resize(b.size());
  const Trajectory& best = buffer[batch.selected[batch.best_position]];
  const std::vector<double>& best_rtg = batch.returns_to_go[batch.best_position];
  Eigen::Index offset = 0;
  for (std::size_t k = 0; k < batch.selected.size(); ++k) {
    const Trajectory& tau = buffer[batch.selected[k]];
    const auto& rtg = batch.returns_to_go[k];
    const BestValueBaseline base = mode == BaselineMode::kTimestep
                                       ? best_value_baseline(rtg, best_rtg)
                                       : best_value_baseline_nearest(tau, rtg, best, best_rtg);
    for (std::size_t t = 0; t < base.values.size(); ++t) b.baseline[offset++] = base.values[t];
  }
  finalize_advantages(b, normalize);
  return b;
}

inline double clip(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

// min(rho A, clip(rho, 1-eps, 1+eps) A)
inline double surrogate_term(double ratio, double advantage, double eps) {
  return std::min(ratio * advantage, clip(ratio, 1.0 - eps, 1.0 + eps) * advantage);
}

struct SurrogateResult {
  double objective = 0.0;  // mean clipped surrogate, to be maximized
  double loss = 0.0;       // -objective - entropy_coef * mean entropy
  double clip_fraction = 0.0;
  double ratio_mean = 0.0;
  double entropy_mean = 0.0;
  Vector grad;             // d loss / d policy.flat()
};

// Clipped surrogate over the batch. Subgradient convention: the min takes its first branch on
// ties, and clip has zero slope at and beyond its breakpoints.
inline SurrogateResult ppo_clip_loss(const PolicyNet& policy, const AdvantageBatch& batch,
                                     double eps, double entropy_coef = 0.0, bool with_grad = true) {
  const Eigen::Index m = batch.size();
  if (m == 0) throw std::invalid_argument("ppo_clip_loss: empty batch");
  if (!batch.policy_advantages.allFinite()) throw NonFiniteError("ppo_clip_loss: advantages not finite");
  PolicyNet::BatchEval ev = policy.evaluate(batch.observations, batch.actions);
  const double lo = 1.0 - eps, hi = 1.0 + eps;
  SurrogateResult r;
  Vector d_logprob(m);
  long clipped = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double ratio = std::exp(ev.logprob[j] - batch.behavior_logprob[j]);
    if (!std::isfinite(ratio)) throw NonFiniteError("ppo_clip_loss: non-finite probability ratio");
    const double adv = batch.policy_advantages[j];
    const double unclipped = ratio * adv;
    const double clipped_term = clip(ratio, lo, hi) * adv;
    double d_ratio;
    if (unclipped <= clipped_term) {
      r.objective += unclipped;
      d_ratio = adv;
    } else {
      r.objective += clipped_term;
      d_ratio = (ratio > lo && ratio < hi) ? adv : 0.0;
    }
    if (ratio < lo || ratio > hi) ++clipped;
    r.ratio_mean += ratio;
    d_logprob[j] = -d_ratio * ratio / static_cast<double>(m);
  }
  const double md = static_cast<double>(m);
  r.objective /= md;
  r.ratio_mean /= md;
  r.clip_fraction = static_cast<double>(clipped) / md;
  r.entropy_mean = ev.entropy.mean();
  r.loss = -r.objective - entropy_coef * r.entropy_mean;
  if (!std::isfinite(r.loss)) throw NonFiniteError("ppo_clip_loss: non-finite loss");
  if (with_grad) {
    const Vector d_entropy = Vector::Constant(m, -entropy_coef / md);
    r.grad = policy.backward(ev, batch.actions, d_logprob, d_entropy);
  }
  return r;
}

struct ValueLossResult {
  double loss = 0.0;
  Vector grad;
};

// (1/m) sum (G_t - V_phi(s_t))^2, minimized.
inline ValueLossResult value_loss(const ValueNet& critic, const Matrix& observations,
                                  const Vector& targets, bool with_grad = true) {
  require_shape(observations.cols() == targets.size(), "value_loss: batch size mismatch");
  if (targets.size() == 0) throw std::invalid_argument("value_loss: empty batch");
  Mlp::Cache cache;
  const Vector v = critic.values(observations, with_grad ? &cache : nullptr);
  const Vector residual = targets - v;
  const double m = static_cast<double>(targets.size());
  ValueLossResult r;
  r.loss = residual.squaredNorm() / m;
  if (!std::isfinite(r.loss)) throw NonFiniteError("value_loss: non-finite loss");
  if (with_grad) r.grad = critic.backward(cache, (-2.0 / m) * residual);
  return r;
}

inline ValueLossResult value_loss(const ValueNet& critic, const AdvantageBatch& batch,
                                  bool with_grad = true) {
  return value_loss(critic, batch.observations, batch.returns, with_grad);
}

inline void clip_grad_norm(Vector& g, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = g.norm();
  if (n > max_norm) g *= max_norm / n;
}

// ---- training loop ----------------------------------------------------------------------

struct EpisodeLog {
  long episode = 0;
  long env_steps = 0;
  double episode_return = 0.0;
  double discounted_return = 0.0;
  double best_buffer_return = 0.0;
  double policy_loss = std::numeric_limits<double>::quiet_NaN();
  double value_loss = std::numeric_limits<double>::quiet_NaN();
  double clip_fraction = std::numeric_limits<double>::quiet_NaN();
  double explained_variance = std::numeric_limits<double>::quiet_NaN();
  double ratio_mean = std::numeric_limits<double>::quiet_NaN();
};

inline const char* kLogHeader =
    "episode,env_steps,return,discounted_return,best_buffer_return,policy_loss,value_loss,"
    "clip_fraction,explained_variance,ratio_mean";

inline void write_log_row(std::ostream& os, const EpisodeLog& r) {
  using detail::format_double;
  os << r.episode << ',' << r.env_steps << ',' << format_double(r.episode_return) << ','
     << format_double(r.discounted_return) << ',' << format_double(r.best_buffer_return) << ','
     << format_double(r.policy_loss) << ',' << format_double(r.value_loss) << ','
     << format_double(r.clip_fraction) << ',' << format_double(r.explained_variance) << ','
     << format_double(r.ratio_mean) << '\n';
}

struct TrainResult {
  PolicyNet policy;
  ValueNet critic;
  AdamState actor_adam;
  AdamState critic_adam;
  std::vector<EpisodeLog> log;
  RunStats stats;
};

struct TrainHooks {
  std::function<void(const EpisodeLog&, const Trajectory&)> on_episode;
  std::function<void(const Checkpoint&)> on_checkpoint;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(long episode, const std::string& what)
      : std::runtime_error("episode " + std::to_string(episode) + ": " + what), episode_(episode) {}
  long episode() const { return episode_; }

 private:
  long episode_;
};

// Random streams of one run, all derived from the run seed.
struct RunStreams {
  Rng init;
  Rng actions;
  Rng sampling;
  std::uint64_t seed;

  explicit RunStreams(std::uint64_t s)
      : init(mix_seed(s, 0)), actions(mix_seed(s, 1)), sampling(mix_seed(s, 2)), seed(s) {}

  std::uint64_t reset_seed(long episode) const {
    return mix_seed(seed, 1000 + static_cast<std::uint64_t>(episode));
  }
};

// rollout -> FIFO push -> batch (best + random) -> returns-to-go -> advantages -> E epochs of
// minibatch Adam on the clipped surrogate and the value MSE. PPO uses only the fresh episode.
inline TrainResult train(const TrainConfig& cfg, Environment& env, const TrainHooks& hooks = {}) {
  cfg.validate();
  RunStreams rs(cfg.seed);
  TrainResult out;
  out.policy = PolicyNet::for_env(env.spec(), cfg.hidden, rs.init);
  out.critic = ValueNet::for_env(env.spec(), cfg.hidden, rs.init);
  out.actor_adam = AdamState::for_size(out.policy.num_params(), cfg.actor_lr);
  out.critic_adam = AdamState::for_size(out.critic.num_params(), cfg.critic_lr);
  out.stats.seed = static_cast<long>(cfg.seed);

  const bool on_policy = cfg.algo == Algo::kPpo;
  TrajectoryBuffer buffer(on_policy ? 1 : static_cast<std::size_t>(cfg.buffer_capacity));
  const std::size_t batch_trajectories = on_policy ? 1 : static_cast<std::size_t>(cfg.batch_trajectories);

  long env_steps = 0;
  for (long k = 0;; ++k) {
    if (cfg.episodes > 0 && k >= cfg.episodes) break;
    if (cfg.steps > 0 && env_steps >= cfg.steps) break;
    try {
      Trajectory tau = rollout(env, out.policy, rs.reset_seed(k), rs.actions, cfg.gamma, k);
      env_steps += static_cast<long>(tau.length());

      EpisodeLog row;
      row.episode = k;
      row.env_steps = env_steps;
      row.episode_return = tau.undiscounted_return();
      row.discounted_return = tau.discounted_return;
      Trajectory for_hook = hooks.on_episode ? tau : Trajectory{};
      buffer.push(std::move(tau));
      row.best_buffer_return = buffer.best_trajectory().discounted_return;

      UpdateBatch batch = assemble_batch(buffer, batch_trajectories, cfg.gamma, rs.sampling);
      AdvantageBatch adv =
          cfg.algo == Algo::kHp3oPlus
              ? advantage_hp3o_plus(batch, buffer, out.critic, cfg.baseline_mode,
                                    cfg.advantage_normalization)
              : advantage_hp3o(batch.transitions, out.critic, cfg.advantage_normalization);

      std::vector<double> targets(adv.returns.data(), adv.returns.data() + adv.size());
      std::vector<double> predictions(adv.critic_values.data(), adv.critic_values.data() + adv.size());
      if (adv.size() >= 2)
        if (auto ev = explained_variance(targets, predictions)) row.explained_variance = *ev;

      if (cfg.steps > 0) {
        const double frac = std::max(0.0, 1.0 - static_cast<double>(env_steps) / static_cast<double>(cfg.steps));
        if (cfg.actor_lr_anneal) out.actor_adam.learning_rate = cfg.actor_lr * frac;
        if (cfg.critic_lr_anneal) out.critic_adam.learning_rate = cfg.critic_lr * frac;
      }

      double pl = 0.0, vl = 0.0, cf = 0.0, rm = 0.0;
      long updates = 0;
      for (int e = 0; e < cfg.epochs; ++e) {
        for (const auto& idx : shuffled_minibatches(static_cast<std::size_t>(adv.size()),
                                                    static_cast<std::size_t>(cfg.minibatch_size),
                                                    rs.sampling)) {
          const AdvantageBatch mb = adv.subset(idx);
          SurrogateResult sr = ppo_clip_loss(out.policy, mb, cfg.clip_eps, cfg.entropy_coef);
          clip_grad_norm(sr.grad, cfg.max_grad_norm);
          adam_step(out.policy, sr.grad, out.actor_adam);
          ValueLossResult vr = value_loss(out.critic, mb);
          clip_grad_norm(vr.grad, cfg.max_grad_norm);
          adam_step(out.critic, vr.grad, out.critic_adam);
          pl += sr.loss;
          vl += vr.loss;
          cf += sr.clip_fraction;
          rm += sr.ratio_mean;
          ++updates;
        }
      }
      if (updates > 0) {
        const double u = static_cast<double>(updates);
        row.policy_loss = pl / u;
        row.value_loss = vl / u;
        row.clip_fraction = cf / u;
        row.ratio_mean = rm / u;
      }
      if (!out.policy.flat().allFinite() || !out.critic.trunk().params().allFinite())
        throw NonFiniteError("parameters became non-finite");

      out.log.push_back(row);
      out.stats.env_steps.push_back(static_cast<double>(env_steps));
      out.stats.returns.push_back(row.episode_return);
      if (cfg.record_value_pairs)
        out.stats.updates.push_back({static_cast<double>(env_steps), std::move(targets), std::move(predictions)});
      if (hooks.on_episode) hooks.on_episode(row, for_hook);
      if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 && (k + 1) % cfg.checkpoint_interval == 0)
        hooks.on_checkpoint({out.policy, out.critic, out.actor_adam, out.critic_adam, k + 1, env_steps});
    } catch (const NonFiniteError& e) {
      throw TrainingError(k, e.what());
    }
  }
  return out;
}

}  // namespace hp3o
