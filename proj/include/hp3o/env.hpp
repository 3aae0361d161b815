#pragma once

#include "hp3o/core.hpp"

#include <algorithm>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hp3o {

enum class ActionKind { kDiscrete, kContinuous };

struct EnvSpec {
  int observation_dim = 1;
  ActionKind action_kind = ActionKind::kDiscrete;
  int n_actions = 2;   // discrete only
  Vector action_low;   // continuous only
  Vector action_high;  // continuous only
  int max_episode_steps = 1;
  std::pair<double, double> reward_range{0.0, 0.0};

  int action_dim() const {
    return action_kind == ActionKind::kDiscrete ? 1 : static_cast<int>(action_low.size());
  }

  void validate() const {
    if (observation_dim < 1) throw std::invalid_argument("EnvSpec: observation_dim must be >= 1");
    if (max_episode_steps < 1) throw std::invalid_argument("EnvSpec: max_episode_steps must be >= 1");
    if (action_kind == ActionKind::kDiscrete) {
      if (n_actions < 2) throw std::invalid_argument("EnvSpec: discrete n_actions must be >= 2");
    } else {
      if (action_low.size() == 0 || action_low.size() != action_high.size())
        throw std::invalid_argument("EnvSpec: continuous bounds malformed");
      if (!(action_low.array() < action_high.array()).all())
        throw std::invalid_argument("EnvSpec: continuous low must be < high");
    }
  }
};

struct StepResult {
  Observation next_observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;

  bool done() const { return terminated || truncated; }
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::string id() const = 0;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Action& action) = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;
};

namespace detail {

inline int checked_discrete_action(const Action& action, int n_actions) {
  if (action.size() != 1 || !std::isfinite(action[0]))
    throw InvalidActionError("discrete action must be a single finite index");
  const double idx = action[0];
  if (idx != std::floor(idx) || idx < 0 || idx >= n_actions)
    throw InvalidActionError("discrete action index out of range: " + std::to_string(idx));
  return static_cast<int>(idx);
}

// Base that tracks the step counter and the ended flag shared by all tasks.
template <typename Derived>
class EpisodicEnv : public Environment {
 public:
  std::unique_ptr<Environment> clone() const override {
    return std::make_unique<Derived>(static_cast<const Derived&>(*this));
  }

 protected:
  void begin_episode() {
    steps_ = 0;
    ended_ = false;
    started_ = true;
  }

  void check_can_step() const {
    if (!started_) throw std::logic_error("step() called before reset()");
    if (ended_) throw std::logic_error("step() called on an ended episode");
  }

  StepResult finish_step(Observation obs, double reward, bool terminated) {
    ++steps_;
    StepResult r;
    r.next_observation = std::move(obs);
    r.reward = reward;
    r.terminated = terminated;
    r.truncated = !terminated && steps_ >= spec().max_episode_steps;
    ended_ = r.done();
    return r;
  }

  int steps_ = 0;
  bool ended_ = false;
  bool started_ = false;
};

}  // namespace detail

// Classic cart-pole balancing with Euler integration, constants as in Gymnasium CartPole-v1.
class CartPole final : public detail::EpisodicEnv<CartPole> {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kMassCart = 1.0;
  static constexpr double kMassPole = 0.1;
  static constexpr double kTotalMass = kMassCart + kMassPole;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kPoleMassLength = kMassPole * kHalfLength;
  static constexpr double kForceMag = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kThetaThreshold = 12.0 * 2.0 * kPi / 360.0;
  static constexpr double kXThreshold = 2.4;
  static constexpr double kInitBound = 0.05;

  explicit CartPole(int max_episode_steps = 500) {
    spec_.observation_dim = 4;
    spec_.action_kind = ActionKind::kDiscrete;
    spec_.n_actions = 2;
    spec_.max_episode_steps = max_episode_steps;
    spec_.reward_range = {1.0, 1.0};
    spec_.validate();
  }

  const EnvSpec& spec() const override { return spec_; }
  std::string id() const override { return "cartpole"; }

  Observation reset(std::uint64_t seed) override {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(-kInitBound, kInitBound);
    state_.resize(4);
    for (int i = 0; i < 4; ++i) state_[i] = u(rng);
    begin_episode();
    return state_;
  }

  StepResult step(const Action& action) override {
    check_can_step();
    const int a = detail::checked_discrete_action(action, 2);
    const double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];
    const double force = a == 1 ? kForceMag : -kForceMag;
    const double cos_t = std::cos(theta);
    const double sin_t = std::sin(theta);
    const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
    const double theta_acc =
        (kGravity * sin_t - cos_t * temp) /
        (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

    state_[0] = x + kTau * x_dot;
    state_[1] = x_dot + kTau * x_acc;
    state_[2] = theta + kTau * theta_dot;
    state_[3] = theta_dot + kTau * theta_acc;

    const bool terminated = state_[0] < -kXThreshold || state_[0] > kXThreshold ||
                            state_[2] < -kThetaThreshold || state_[2] > kThetaThreshold;
    return finish_step(state_, 1.0, terminated);
  }

  // Test hook: place the system in an arbitrary state mid-episode.
  void set_state(const Vector& s) { state_ = s; }

 private:
  EnvSpec spec_;
  Vector state_ = Vector::Zero(4);
};

// Torque-limited pendulum swing-up; observation [cos th, sin th, th_dot].
class Pendulum final : public detail::EpisodicEnv<Pendulum> {
 public:
  static constexpr double kMaxSpeed = 8.0;
  static constexpr double kMaxTorque = 2.0;
  static constexpr double kDt = 0.05;
  static constexpr double kGravity = 10.0;
  static constexpr double kMass = 1.0;
  static constexpr double kLength = 1.0;

  explicit Pendulum(int max_episode_steps = 200) {
    spec_.observation_dim = 3;
    spec_.action_kind = ActionKind::kContinuous;
    spec_.action_low = Vector::Constant(1, -kMaxTorque);
    spec_.action_high = Vector::Constant(1, kMaxTorque);
    spec_.max_episode_steps = max_episode_steps;
    const double worst = kPi * kPi + 0.1 * kMaxSpeed * kMaxSpeed + 0.001 * kMaxTorque * kMaxTorque;
    spec_.reward_range = {-worst, 0.0};
    spec_.validate();
  }

  const EnvSpec& spec() const override { return spec_; }
  std::string id() const override { return "pendulum"; }

  Observation reset(std::uint64_t seed) override {
    Rng rng(seed);
    theta_ = std::uniform_real_distribution<double>(-kPi, kPi)(rng);
    theta_dot_ = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    begin_episode();
    return observe();
  }

  StepResult step(const Action& action) override {
    check_can_step();
    if (action.size() != 1 || !std::isfinite(action[0]))
      throw InvalidActionError("pendulum action must be one finite torque");
    const double u = std::clamp(action[0], -kMaxTorque, kMaxTorque);
    const double th = normalize_angle(theta_);
    const double reward = -(th * th + 0.1 * theta_dot_ * theta_dot_ + 0.001 * u * u);

    double new_dot = theta_dot_ + (3.0 * kGravity / (2.0 * kLength) * std::sin(theta_) +
                                   3.0 / (kMass * kLength * kLength) * u) *
                                      kDt;
    new_dot = std::clamp(new_dot, -kMaxSpeed, kMaxSpeed);
    theta_ = theta_ + new_dot * kDt;
    theta_dot_ = new_dot;
    return finish_step(observe(), reward, false);
  }

  static double normalize_angle(double x) {
    return std::fmod(std::fmod(x + kPi, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi) - kPi;
  }

 private:
  Observation observe() const {
    Observation o(3);
    o << std::cos(theta_), std::sin(theta_), theta_dot_;
    return o;
  }

  EnvSpec spec_;
  double theta_ = 0.0;
  double theta_dot_ = 0.0;
};

// Deterministic grid with one-hot observations. Actions: 0 up, 1 down, 2 left, 3 right.
// Moving into a wall leaves the agent in place. Entering the goal ends the episode with +1.
class GridWorld final : public detail::EpisodicEnv<GridWorld> {
 public:
  struct Layout {
    int rows = 5;
    int cols = 5;
    int start_row = 0;
    int start_col = 0;
    int goal_row = 4;
    int goal_col = 4;
    int max_episode_steps = 100;
  };

  GridWorld() : GridWorld(Layout{}) {}

  explicit GridWorld(Layout layout) : layout_(layout) {
    if (layout_.rows < 1 || layout_.cols < 1 || layout_.rows * layout_.cols < 2)
      throw std::invalid_argument("GridWorld: grid needs at least two cells");
    if (start_cell() == goal_cell()) throw std::invalid_argument("GridWorld: start equals goal");
    spec_.observation_dim = layout_.rows * layout_.cols;
    spec_.action_kind = ActionKind::kDiscrete;
    spec_.n_actions = 4;
    spec_.max_episode_steps = layout_.max_episode_steps;
    spec_.reward_range = {0.0, 1.0};
    spec_.validate();
  }

  const EnvSpec& spec() const override { return spec_; }
  std::string id() const override { return "gridworld"; }
  const Layout& layout() const { return layout_; }

  int n_cells() const { return layout_.rows * layout_.cols; }
  int start_cell() const { return layout_.start_row * layout_.cols + layout_.start_col; }
  int goal_cell() const { return layout_.goal_row * layout_.cols + layout_.goal_col; }

  int next_cell(int cell, int action) const {
    int r = cell / layout_.cols;
    int c = cell % layout_.cols;
    switch (action) {
      case 0: r = std::max(r - 1, 0); break;
      case 1: r = std::min(r + 1, layout_.rows - 1); break;
      case 2: c = std::max(c - 1, 0); break;
      case 3: c = std::min(c + 1, layout_.cols - 1); break;
      default: throw InvalidActionError("gridworld action out of range");
    }
    return r * layout_.cols + c;
  }

  Observation one_hot(int cell) const {
    Observation o = Observation::Zero(n_cells());
    o[cell] = 1.0;
    return o;
  }

  Observation reset(std::uint64_t /*seed*/) override {
    cell_ = start_cell();
    begin_episode();
    return one_hot(cell_);
  }

  StepResult step(const Action& action) override {
    check_can_step();
    const int a = detail::checked_discrete_action(action, 4);
    cell_ = next_cell(cell_, a);
    const bool at_goal = cell_ == goal_cell();
    return finish_step(one_hot(cell_), at_goal ? 1.0 : 0.0, at_goal);
  }

  int cell() const { return cell_; }

 private:
  Layout layout_;
  EnvSpec spec_;
  int cell_ = 0;
};

inline std::vector<std::string> env_ids() { return {"cartpole", "pendulum", "gridworld"}; }

inline std::unique_ptr<Environment> make_env(const std::string& id) {
  if (id == "cartpole") return std::make_unique<CartPole>();
  if (id == "pendulum") return std::make_unique<Pendulum>();
  if (id == "gridworld") return std::make_unique<GridWorld>();
  throw std::invalid_argument("unknown environment id: " + id);
}

}  // namespace hp3o
