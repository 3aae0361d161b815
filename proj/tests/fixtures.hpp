#pragma once
// Random networks and loss instances shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <vector>

#include "hp3o/algo.hpp"
#include "hp3o/nn.hpp"

namespace fixtures {

using namespace hp3o;

inline Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

inline Mlp random_mlp(Rng& rng, std::vector<int> sizes, double scale = 0.5) {
  Mlp m(std::move(sizes));
  m.params() = scale * random_matrix(rng, m.num_params(), 1);
  return m;
}

struct GradInstance {
  PolicyNet policy;
  ValueNet critic;
  AdvantageBatch batch;
};

// 2 x 8 tanh nets over a batch of 16 with behavior log-probs offset so ratios land on both
// sides of the clip window. Redraws when any ratio sits within 1e-4 of a breakpoint.
inline GradInstance random_grad_instance(Rng& rng, bool gaussian, double eps) {
  std::normal_distribution<double> n(0.0, 1.0);
  for (;;) {
    GradInstance g;
    const int obs = 3, act = gaussian ? 2 : 3, m = 16;
    g.policy = PolicyNet(gaussian ? PolicyHead::kGaussian : PolicyHead::kCategorical,
                         random_mlp(rng, {obs, 8, 8, act}, 0.6));
    if (gaussian) g.policy.log_std() << 0.3 * n(rng), 0.3 * n(rng);
    g.critic = ValueNet(random_mlp(rng, {obs, 8, 8, 1}, 0.6));
    AdvantageBatch& b = g.batch;
    b.observations = random_matrix(rng, obs, m);
    b.actions.resize(g.policy.action_rows(), m);
    for (int j = 0; j < m; ++j) {
      if (gaussian) b.actions.col(j) = random_matrix(rng, act, 1);
      else b.actions(0, j) = static_cast<double>(rng() % act);
    }
    const Vector lp = g.policy.evaluate(b.observations, b.actions).logprob;
    b.behavior_logprob.resize(m);
    for (int j = 0; j < m; ++j) b.behavior_logprob[j] = lp[j] + 0.25 * n(rng);
    b.returns = random_matrix(rng, m, 1);
    b.baseline = Vector::Zero(m);
    b.advantages = random_matrix(rng, m, 1);
    b.policy_advantages = b.advantages;
    b.critic_values = Vector::Zero(m);
    bool near_kink = false;
    for (int j = 0; j < m; ++j) {
      const double r = std::exp(lp[j] - b.behavior_logprob[j]);
      near_kink = near_kink || std::abs(r - (1 - eps)) < 1e-4 || std::abs(r - (1 + eps)) < 1e-4;
    }
    if (!near_kink) return g;
  }
}

}  // namespace fixtures
