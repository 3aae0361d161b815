#pragma once

#include "hp3o/env.hpp"
#include "hp3o/nn.hpp"
#include "hp3o/trajectory.hpp"

namespace hp3o {

// Runs one episode with the stochastic policy. The stored log-probability is the sampling
// policy's value for the (unclipped) sampled action.
inline Trajectory rollout(Environment& env, const PolicyNet& policy, std::uint64_t reset_seed,
                          Rng& rng, double gamma, long episode_index = 0) {
  const EnvSpec& spec = env.spec();
  require_shape(policy.trunk().input_dim() == spec.observation_dim,
                "rollout: policy input does not match observation_dim");
  const bool discrete = spec.action_kind == ActionKind::kDiscrete;
  require_shape(discrete == (policy.head() == PolicyHead::kCategorical),
                "rollout: policy head does not match action kind");
  require_shape(discrete ? policy.n_actions() == spec.n_actions
                         : policy.n_actions() == spec.action_dim(),
                "rollout: policy action dim does not match env");

  Trajectory tau;
  tau.episode_index = episode_index;
  tau.observations.reserve(spec.max_episode_steps);
  Observation obs = env.reset(reset_seed);
  for (int t = 0; t < spec.max_episode_steps; ++t) {
    auto [action, logp] = policy.sample(obs, rng);
    Action env_action = action;
    if (!discrete) env_action = action.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
    StepResult step = env.step(env_action);
    tau.observations.push_back(std::move(obs));
    tau.actions.push_back(std::move(action));
    tau.rewards.push_back(step.reward);
    tau.behavior_logprobs.push_back(logp);
    obs = std::move(step.next_observation);
    if (step.done()) {
      tau.terminated = step.terminated;
      break;
    }
  }
  cache_discounted_return(tau, gamma);
  return tau;
}

// Undiscounted return of one episode under the greedy (mode) action.
inline double greedy_return(Environment& env, const PolicyNet& policy, std::uint64_t reset_seed,
                            double gamma, double* discounted = nullptr) {
  const EnvSpec& spec = env.spec();
  Observation obs = env.reset(reset_seed);
  double total = 0.0, disc = 0.0, scale = 1.0;
  for (int t = 0; t < spec.max_episode_steps; ++t) {
    Action a = policy.mode(obs);
    if (spec.action_kind == ActionKind::kContinuous)
      a = a.cwiseMax(spec.action_low).cwiseMin(spec.action_high);
    StepResult step = env.step(a);
    total += step.reward;
    disc += scale * step.reward;
    scale *= gamma;
    obs = std::move(step.next_observation);
    if (step.done()) break;
  }
  if (discounted) *discounted = disc;
  return total;
}

}  // namespace hp3o
