#include <gtest/gtest.h>

#include <cmath>

#include "hp3o/env.hpp"
#include "hp3o/nn.hpp"
#include "hp3o/rollout.hpp"
#include "oracles.hpp"

using namespace hp3o;

namespace {

Action discrete(int a) { return Action::Constant(1, a); }

// Categorical policy over 4 actions that always picks `action` (up to e^-50).
PolicyNet fixed_grid_policy(int obs_dim, int action) {
  Mlp trunk({obs_dim, 4});
  trunk.bias(0).setConstant(-50.0);
  trunk.bias(0)[action] = 50.0;
  return PolicyNet(PolicyHead::kCategorical, trunk);
}

}  // namespace

TEST(GridWorld, ResetIsOneHotAtStart) {
  GridWorld g;
  const Observation o = g.reset(123);
  ASSERT_EQ(o.size(), 25);
  EXPECT_EQ(o[0], 1.0);
  EXPECT_EQ(o.sum(), 1.0);
}

TEST(GridWorld, EnteringGoalTerminatesWithReward) {
  GridWorld g(GridWorld::Layout{1, 3, 0, 0, 0, 2, 10});
  g.reset(0);
  StepResult r = g.step(discrete(3));
  EXPECT_FALSE(r.done());
  EXPECT_EQ(r.reward, 0.0);
  r = g.step(discrete(3));
  EXPECT_TRUE(r.terminated);
  EXPECT_FALSE(r.truncated);
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_EQ(r.next_observation[2], 1.0);
}

TEST(GridWorld, WallsKeepAgentInPlace) {
  GridWorld g;
  g.reset(0);
  EXPECT_EQ(g.next_cell(0, 0), 0);
  EXPECT_EQ(g.next_cell(0, 2), 0);
  EXPECT_EQ(g.next_cell(24, 1), 24);
  EXPECT_EQ(g.next_cell(24, 3), 24);
  EXPECT_EQ(g.next_cell(6, 0), 1);
  EXPECT_EQ(g.next_cell(6, 1), 11);
}

TEST(GridWorld, RejectsBadLayouts) {
  EXPECT_THROW(GridWorld(GridWorld::Layout{1, 1, 0, 0, 0, 0, 10}), std::invalid_argument);
  EXPECT_THROW(GridWorld(GridWorld::Layout{2, 2, 1, 1, 1, 1, 10}), std::invalid_argument);
}

TEST(GridWorld, TruncatesAtHorizon) {
  GridWorld g(GridWorld::Layout{5, 5, 0, 0, 4, 4, 7});
  g.reset(0);
  StepResult r;
  for (int i = 0; i < 7; ++i) r = g.step(discrete(0));
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminated);
}

TEST(CartPole, SameSeedSameObservation) {
  CartPole a, b;
  const Observation x = a.reset(7), y = b.reset(7);
  ASSERT_EQ(x.size(), 4);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(x[i], y[i]);
  EXPECT_NE(a.reset(8)[0], x[0]);
}

TEST(CartPole, InitialStateWithinBounds) {
  CartPole env;
  for (std::uint64_t s = 0; s < 500; ++s) {
    const Observation o = env.reset(s);
    EXPECT_LE(o.cwiseAbs().maxCoeff(), 0.05);
  }
}

TEST(CartPole, PoleBeyondThresholdTerminatesWithUnitReward) {
  CartPole env;
  env.reset(1);
  Vector s(4);
  s << 0.0, 0.0, 0.25, 1.0;  // 0.25 rad > 12 degrees
  env.set_state(s);
  const StepResult r = env.step(discrete(1));
  EXPECT_TRUE(r.terminated);
  EXPECT_EQ(r.reward, 1.0);
}

TEST(CartPole, CartBeyondTrackTerminates) {
  CartPole env;
  env.reset(1);
  Vector s(4);
  s << 2.39, 1.0, 0.0, 0.0;
  env.set_state(s);
  EXPECT_TRUE(env.step(discrete(1)).terminated);
}

TEST(CartPole, TruncatedOnStep500) {
  CartPole env;
  env.reset(3);
  StepResult r;
  for (int t = 1; t <= 500; ++t) {
    env.set_state(Vector::Zero(4));  // keep the pole upright
    r = env.step(discrete(t % 2));
    if (t < 500) {
      ASSERT_FALSE(r.done()) << "step " << t;
    }
  }
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminated);
}

TEST(CartPole, OneStepMatchesHandIntegration) {
  CartPole env;
  env.reset(0);
  Vector s(4);
  s << 0.01, -0.02, 0.03, 0.04;
  env.set_state(s);
  const Observation o = env.step(discrete(1)).next_observation;
  const double temp = (10.0 + 0.05 * 0.04 * 0.04 * std::sin(0.03)) / 1.1;
  const double th_acc = (9.8 * std::sin(0.03) - std::cos(0.03) * temp) /
                        (0.5 * (4.0 / 3.0 - 0.1 * std::cos(0.03) * std::cos(0.03) / 1.1));
  const double x_acc = temp - 0.05 * th_acc * std::cos(0.03) / 1.1;
  EXPECT_NEAR(o[0], 0.01 + 0.02 * -0.02, 1e-15);
  EXPECT_NEAR(o[1], -0.02 + 0.02 * x_acc, 1e-15);
  EXPECT_NEAR(o[2], 0.03 + 0.02 * 0.04, 1e-15);
  EXPECT_NEAR(o[3], 0.04 + 0.02 * th_acc, 1e-15);
}

TEST(Environment, InvalidActionsThrow) {
  CartPole c;
  c.reset(0);
  EXPECT_THROW(c.step(discrete(2)), InvalidActionError);
  EXPECT_THROW(c.step(Action::Constant(1, 0.5)), InvalidActionError);
  EXPECT_THROW(c.step(Action::Constant(1, std::nan(""))), InvalidActionError);
  EXPECT_THROW(c.step(Action::Zero(2)), InvalidActionError);
  GridWorld g;
  g.reset(0);
  EXPECT_THROW(g.step(discrete(-1)), InvalidActionError);
  EXPECT_THROW(g.step(discrete(4)), InvalidActionError);
  Pendulum p;
  p.reset(0);
  EXPECT_THROW(p.step(Action::Constant(1, std::nan(""))), InvalidActionError);
  EXPECT_THROW(p.step(Action::Zero(2)), InvalidActionError);
}

TEST(Environment, StepBeforeResetOrAfterEndThrows) {
  GridWorld g(GridWorld::Layout{1, 2, 0, 0, 0, 1, 10});
  EXPECT_THROW(g.step(discrete(3)), std::logic_error);
  g.reset(0);
  ASSERT_TRUE(g.step(discrete(3)).terminated);
  EXPECT_THROW(g.step(discrete(3)), std::logic_error);
  g.reset(0);
  EXPECT_NO_THROW(g.step(discrete(2)));
}

TEST(Environment, FactoryAndUnknownId) {
  for (const auto& id : env_ids()) EXPECT_EQ(make_env(id)->id(), id);
  EXPECT_THROW(make_env("mountaincar"), std::invalid_argument);
}

TEST(Environment, CloneCopiesState) {
  CartPole a;
  a.reset(5);
  auto b = a.clone();
  const auto ra = a.step(discrete(0));
  const auto rb = b->step(discrete(0));
  EXPECT_EQ((ra.next_observation - rb.next_observation).norm(), 0.0);
}

TEST(Pendulum, ObservationAndReward) {
  Pendulum p;
  const Observation o = p.reset(11);
  ASSERT_EQ(o.size(), 3);
  EXPECT_NEAR(o[0] * o[0] + o[1] * o[1], 1.0, 1e-12);
  const double th = std::atan2(o[1], o[0]);
  const StepResult r = p.step(Action::Constant(1, 5.0));  // clipped to 2
  EXPECT_NEAR(r.reward, -(th * th + 0.1 * o[2] * o[2] + 0.001 * 4.0), 1e-12);
  EXPECT_FALSE(r.terminated);
}

TEST(Pendulum, HorizonIs200) {
  Pendulum p;
  p.reset(0);
  int steps = 0;
  StepResult r;
  do {
    r = p.step(Action::Zero(1));
    ++steps;
  } while (!r.done());
  EXPECT_EQ(steps, 200);
  EXPECT_TRUE(r.truncated);
}

TEST(Pendulum, NormalizeAngle) {
  EXPECT_NEAR(Pendulum::normalize_angle(3 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_NEAR(Pendulum::normalize_angle(-3 * kPi / 2), kPi / 2, 1e-12);
  EXPECT_NEAR(Pendulum::normalize_angle(0.3), 0.3, 1e-15);
}

TEST(Rollout, GoalThreeCellsAwayGivesZeroZeroOne) {
  GridWorld g(GridWorld::Layout{1, 4, 0, 0, 0, 3, 50});
  Rng rng(1);
  const Trajectory t = rollout(g, fixed_grid_policy(4, 3), 0, rng, 0.9);
  ASSERT_EQ(t.length(), 3u);
  EXPECT_EQ(t.rewards, (std::vector<double>{0, 0, 1}));
  EXPECT_TRUE(t.terminated);
  EXPECT_NEAR(t.discounted_return, 0.81, 1e-15);
}

TEST(Rollout, UniformRandomCartPoleLength) {
  CartPole env;
  PolicyNet uniform(PolicyHead::kCategorical, Mlp({4, 2}));  // zero weights: uniform logits
  Rng rng(2024);
  double total = 0.0;
  constexpr int kEpisodes = 1000;
  for (int k = 0; k < kEpisodes; ++k) total += static_cast<double>(rollout(env, uniform, mix_seed(9, k), rng, 0.99).length());
  const double m = total / kEpisodes;
  EXPECT_GE(m, 20.0);
  EXPECT_LE(m, 25.0);
  EXPECT_NEAR(m, oracle::kRandomCartPoleMeanLength, 4.0 * oracle::kRandomCartPoleLengthStd / std::sqrt(kEpisodes));
}

TEST(Rollout, ShapesBookkeepingAndTermination) {
  Rng init(3);
  for (const auto& id : env_ids()) {
    auto env = make_env(id);
    const PolicyNet pi = PolicyNet::for_env(env->spec(), {8}, init);
    Rng rng(4);
    for (int k = 0; k < 5; ++k) {
      const Trajectory t = rollout(*env, pi, static_cast<std::uint64_t>(k), rng, 0.99);
      ASSERT_TRUE(t.consistent()) << id;
      EXPECT_LE(t.length(), static_cast<std::size_t>(env->spec().max_episode_steps));
      EXPECT_EQ(t.behavior_logprobs.size(), t.actions.size());
      EXPECT_NEAR(t.discounted_return, discounted_sum(t.rewards, 0.99), 1e-12);
      if (!t.terminated) {
        EXPECT_EQ(t.length(), static_cast<std::size_t>(env->spec().max_episode_steps));
      }
      for (std::size_t i = 0; i < t.length(); ++i)
        EXPECT_NEAR(t.behavior_logprobs[i], pi.logprob(t.observations[i], t.actions[i]), 1e-12);
    }
  }
}

TEST(Rollout, RewardSumMatchesStepRewards) {
  Pendulum env;
  Rng init(5), rng(6);
  const PolicyNet pi = PolicyNet::for_env(env.spec(), {8}, init);
  const Trajectory t = rollout(env, pi, 17, rng, 0.9);
  // Replay the stored actions (clipped as the rollout does) and sum the step rewards.
  Pendulum replay;
  replay.reset(17);
  double sum = 0.0;
  for (const auto& a : t.actions) sum += replay.step(a.cwiseMax(-2.0).cwiseMin(2.0)).reward;
  EXPECT_EQ(sum, t.undiscounted_return());
}

TEST(Rollout, DeterministicGivenSeeds) {
  CartPole env;
  Rng init(8);
  const PolicyNet pi = PolicyNet::for_env(env.spec(), {16}, init);
  Rng r1(99), r2(99);
  const Trajectory a = rollout(env, pi, 5, r1, 0.99), b = rollout(env, pi, 5, r2, 0.99);
  ASSERT_EQ(a.length(), b.length());
  for (std::size_t i = 0; i < a.length(); ++i) {
    EXPECT_EQ(a.actions[i][0], b.actions[i][0]);
    EXPECT_EQ(a.behavior_logprobs[i], b.behavior_logprobs[i]);
  }
}

TEST(Rollout, ShapeMismatchRejected) {
  CartPole env;
  Rng rng(1);
  EXPECT_THROW(rollout(env, PolicyNet(PolicyHead::kCategorical, Mlp({3, 2})), 0, rng, 0.9), ShapeError);
  EXPECT_THROW(rollout(env, PolicyNet(PolicyHead::kCategorical, Mlp({4, 3})), 0, rng, 0.9), ShapeError);
  EXPECT_THROW(rollout(env, PolicyNet(PolicyHead::kGaussian, Mlp({4, 1})), 0, rng, 0.9), ShapeError);
}
