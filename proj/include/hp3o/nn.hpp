#pragma once

#include "hp3o/core.hpp"
#include "hp3o/env.hpp"

#include <json.hpp>

#include <algorithm>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace hp3o {

// Fully connected network, tanh on hidden layers and identity output. All weights and
// biases live in one flat vector; layer i stores W_i (out x in, column major) then b_i.
class Mlp {
 public:
  struct Cache {
    std::vector<Matrix> activations;  // activations[0] is the input batch
  };

  Mlp() = default;

  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output size");
    for (int s : sizes_)
      if (s < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
    offsets_.push_back(0);
    for (std::size_t i = 0; i + 1 < sizes_.size(); ++i)
      offsets_.push_back(offsets_.back() + Eigen::Index(sizes_[i + 1]) * (sizes_[i] + 1));
    params_ = Vector::Zero(offsets_.back());
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int n_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  Eigen::Index num_params() const { return params_.size(); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  Eigen::Map<Matrix> weight(int i) {
    return {params_.data() + offsets_[i], sizes_[i + 1], sizes_[i]};
  }
  Eigen::Map<const Matrix> weight(int i) const {
    return {params_.data() + offsets_[i], sizes_[i + 1], sizes_[i]};
  }
  Eigen::Map<Vector> bias(int i) {
    return {params_.data() + offsets_[i] + Eigen::Index(sizes_[i + 1]) * sizes_[i], sizes_[i + 1]};
  }
  Eigen::Map<const Vector> bias(int i) const {
    return {params_.data() + offsets_[i] + Eigen::Index(sizes_[i + 1]) * sizes_[i], sizes_[i + 1]};
  }

  // inputs: input_dim x N, one column per sample.
  Matrix forward(const Matrix& inputs, Cache* cache = nullptr) const {
    require_shape(inputs.rows() == input_dim(),
                  "Mlp::forward: expected input dim " + std::to_string(input_dim()) + ", got " +
                      std::to_string(inputs.rows()));
    if (cache) {
      cache->activations.clear();
      cache->activations.reserve(sizes_.size());
      cache->activations.push_back(inputs);
    }
    Matrix h = inputs;
    for (int i = 0; i < n_layers(); ++i) {
      Matrix z = weight(i) * h;
      z.colwise() += bias(i);
      if (i + 1 < n_layers()) z = z.array().tanh().matrix();
      h = std::move(z);
      if (cache && i + 1 < n_layers()) cache->activations.push_back(h);
    }
    return h;
  }

  // Reverse-mode pass: gradient of a scalar loss with respect to params() given dL/d(output).
  Vector backward(const Cache& cache, const Matrix& d_output) const {
    require_shape(static_cast<int>(cache.activations.size()) == n_layers(),
                  "Mlp::backward: cache does not match network");
    Vector grad = Vector::Zero(num_params());
    Matrix delta = d_output;
    for (int i = n_layers() - 1; i >= 0; --i) {
      const Matrix& a = cache.activations[i];
      Eigen::Map<Matrix> gw(grad.data() + offsets_[i], sizes_[i + 1], sizes_[i]);
      Eigen::Map<Vector> gb(grad.data() + offsets_[i] + Eigen::Index(sizes_[i + 1]) * sizes_[i],
                            sizes_[i + 1]);
      gw.noalias() = delta * a.transpose();
      gb = delta.rowwise().sum();
      if (i > 0) {
        Matrix back = weight(i).transpose() * delta;
        delta = (back.array() * (1.0 - a.array().square())).matrix();
      }
    }
    return grad;
  }

  // Orthogonal initialization with zero biases; output layer scaled by output_gain.
  void init_orthogonal(Rng& rng, double hidden_gain, double output_gain) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < n_layers(); ++i) {
      const int rows = sizes_[i + 1];
      const int cols = sizes_[i];
      const int big = std::max(rows, cols);
      Matrix g(big, std::min(rows, cols));
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
      Eigen::HouseholderQR<Matrix> qr(g);
      Matrix q = qr.householderQ() * Matrix::Identity(big, g.cols());
      const Matrix rdiag = qr.matrixQR().diagonal();
      for (Eigen::Index c = 0; c < q.cols(); ++c)
        if (rdiag(c) < 0) q.col(c) *= -1.0;
      const double gain = (i + 1 == n_layers()) ? output_gain : hidden_gain;
      weight(i) = gain * (rows >= cols ? q : Matrix(q.transpose()));
      bias(i).setZero();
    }
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::Index> offsets_;
  Vector params_;
};

enum class PolicyHead { kCategorical, kGaussian };

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)

// Stochastic actor. Categorical: the trunk emits logits. Gaussian: the trunk emits the
// mean and a state-independent log_std vector sets the scale.
class PolicyNet {
 public:
  struct BatchEval {
    Vector logprob;
    Vector entropy;
    Matrix output;  // logits or means
    Mlp::Cache cache;
  };

  PolicyNet() = default;

  PolicyNet(PolicyHead head, Mlp trunk) : head_(head), trunk_(std::move(trunk)) {
    if (head_ == PolicyHead::kCategorical && trunk_.output_dim() < 2)
      throw std::invalid_argument("PolicyNet: categorical head needs >= 2 logits");
    if (head_ == PolicyHead::kGaussian) log_std_ = Vector::Zero(trunk_.output_dim());
  }

  static PolicyNet for_env(const EnvSpec& spec, const std::vector<int>& hidden, Rng& rng,
                           double output_gain = 0.01) {
    std::vector<int> sizes{spec.observation_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    const bool discrete = spec.action_kind == ActionKind::kDiscrete;
    sizes.push_back(discrete ? spec.n_actions : spec.action_dim());
    Mlp trunk(sizes);
    trunk.init_orthogonal(rng, std::sqrt(2.0), output_gain);
    return PolicyNet(discrete ? PolicyHead::kCategorical : PolicyHead::kGaussian, std::move(trunk));
  }

  PolicyHead head() const { return head_; }
  const Mlp& trunk() const { return trunk_; }
  Mlp& trunk() { return trunk_; }
  const Vector& log_std() const { return log_std_; }
  Vector& log_std() { return log_std_; }

  int action_rows() const { return head_ == PolicyHead::kCategorical ? 1 : trunk_.output_dim(); }
  int n_actions() const { return trunk_.output_dim(); }

  Eigen::Index num_params() const { return trunk_.num_params() + log_std_.size(); }

  Vector flat() const {
    Vector v(num_params());
    v << trunk_.params(), log_std_;
    return v;
  }

  void set_flat(const Vector& v) {
    require_shape(v.size() == num_params(), "PolicyNet::set_flat: size mismatch");
    trunk_.params() = v.head(trunk_.num_params());
    log_std_ = v.tail(log_std_.size());
  }

  void clamp_log_std() { log_std_ = log_std_.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax); }

  BatchEval evaluate(const Matrix& observations, const Matrix& actions) const {
    require_shape(actions.cols() == observations.cols(), "PolicyNet::evaluate: batch size mismatch");
    require_shape(actions.rows() == action_rows(), "PolicyNet::evaluate: action dim mismatch");
    BatchEval ev;
    ev.output = trunk_.forward(observations, &ev.cache);
    const Eigen::Index n = observations.cols();
    ev.logprob.resize(n);
    ev.entropy.resize(n);
    if (head_ == PolicyHead::kCategorical) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const int a = checked_index(actions(0, j));
        const Vector logp = log_softmax(ev.output.col(j));
        ev.logprob[j] = logp[a];
        ev.entropy[j] = -(logp.array().exp() * logp.array()).sum();
      }
    } else {
      const double ent = log_std_.sum() + log_std_.size() * (kHalfLog2Pi + 0.5);
      const Vector inv_std = (-log_std_).array().exp();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!actions.col(j).allFinite()) throw InvalidActionError("gaussian action not finite");
        const Vector z = (actions.col(j) - ev.output.col(j)).cwiseProduct(inv_std);
        ev.logprob[j] = -0.5 * z.squaredNorm() - log_std_.sum() - log_std_.size() * kHalfLog2Pi;
        ev.entropy[j] = ent;
      }
    }
    return ev;
  }

  // Gradient of sum_j (d_logprob_j * logprob_j + d_entropy_j * entropy_j) w.r.t. flat().
  Vector backward(const BatchEval& ev, const Matrix& actions, const Vector& d_logprob,
                  const Vector& d_entropy) const {
    const Eigen::Index n = ev.output.cols();
    require_shape(d_logprob.size() == n && d_entropy.size() == n,
                  "PolicyNet::backward: upstream gradient size mismatch");
    Matrix d_out(ev.output.rows(), n);
    Vector d_log_std = Vector::Zero(log_std_.size());
    if (head_ == PolicyHead::kCategorical) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const Vector logp = log_softmax(ev.output.col(j));
        const Vector p = logp.array().exp();
        const int a = static_cast<int>(actions(0, j));
        // d logp_a / dz = onehot(a) - p ; dH/dz_i = -p_i (log p_i + H)
        Vector g = -d_logprob[j] * p;
        g[a] += d_logprob[j];
        g.array() -= d_entropy[j] * p.array() * (logp.array() + ev.entropy[j]);
        d_out.col(j) = g;
      }
    } else {
      const Vector inv_var = (-2.0 * log_std_).array().exp();
      for (Eigen::Index j = 0; j < n; ++j) {
        const Vector diff = actions.col(j) - ev.output.col(j);
        d_out.col(j) = d_logprob[j] * diff.cwiseProduct(inv_var);
        d_log_std.array() += d_logprob[j] * (diff.array().square() * inv_var.array() - 1.0) +
                             d_entropy[j];
      }
    }
    Vector grad(num_params());
    grad << trunk_.backward(ev.cache, d_out), d_log_std;
    return grad;
  }

  double logprob(const Observation& s, const Action& a) const {
    return evaluate(as_column(s), as_column(a)).logprob[0];
  }

  double entropy(const Observation& s) const {
    Matrix a = Matrix::Zero(action_rows(), 1);
    return evaluate(as_column(s), a).entropy[0];
  }

  // Categorical probabilities at s (categorical head only).
  Vector probabilities(const Observation& s) const {
    if (head_ != PolicyHead::kCategorical) throw std::logic_error("probabilities: not categorical");
    return log_softmax(trunk_.forward(as_column(s)).col(0)).array().exp();
  }

  // Most likely action (argmax logit, or the Gaussian mean).
  Action mode(const Observation& s) const {
    const Vector out = trunk_.forward(as_column(s)).col(0);
    if (head_ == PolicyHead::kCategorical) {
      Eigen::Index best = 0;
      out.maxCoeff(&best);
      return Action::Constant(1, static_cast<double>(best));
    }
    return out;
  }

  std::pair<Action, double> sample(const Observation& s, Rng& rng) const {
    const Vector out = trunk_.forward(as_column(s)).col(0);
    if (head_ == PolicyHead::kCategorical) {
      const Vector logp = log_softmax(out);
      const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      double cdf = 0.0;
      Eigen::Index pick = logp.size() - 1;
      for (Eigen::Index i = 0; i < logp.size(); ++i) {
        cdf += std::exp(logp[i]);
        if (u < cdf) {
          pick = i;
          break;
        }
      }
      return {Action::Constant(1, static_cast<double>(pick)), logp[pick]};
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Action a(out.size());
    double lp = -log_std_.sum() - log_std_.size() * kHalfLog2Pi;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const double z = normal(rng);
      a[i] = out[i] + std::exp(log_std_[i]) * z;
      lp -= 0.5 * z * z;
    }
    return {a, lp};
  }

  static Vector log_softmax(const Vector& z) {
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    return z.array() - lse;
  }

 private:
  int checked_index(double a) const {
    if (!std::isfinite(a) || a != std::floor(a) || a < 0 || a >= n_actions())
      throw InvalidActionError("categorical action index out of range");
    return static_cast<int>(a);
  }

  static Matrix as_column(const Vector& v) { return Matrix(v); }

  PolicyHead head_ = PolicyHead::kCategorical;
  Mlp trunk_;
  Vector log_std_;
};

// Critic V_phi: MLP with a single linear output.
class ValueNet {
 public:
  ValueNet() = default;

  explicit ValueNet(Mlp trunk) : trunk_(std::move(trunk)) {
    if (trunk_.output_dim() != 1) throw std::invalid_argument("ValueNet: output dim must be 1");
  }

  static ValueNet for_env(const EnvSpec& spec, const std::vector<int>& hidden, Rng& rng) {
    std::vector<int> sizes{spec.observation_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    Mlp trunk(sizes);
    trunk.init_orthogonal(rng, std::sqrt(2.0), 1.0);
    return ValueNet(std::move(trunk));
  }

  const Mlp& trunk() const { return trunk_; }
  Mlp& trunk() { return trunk_; }
  Eigen::Index num_params() const { return trunk_.num_params(); }

  double value(const Observation& s) const {
    const double v = trunk_.forward(Matrix(s))(0, 0);
    if (!std::isfinite(v)) throw NonFiniteError("critic produced a non-finite value");
    return v;
  }

  Vector values(const Matrix& observations, Mlp::Cache* cache = nullptr) const {
    return trunk_.forward(observations, cache).row(0).transpose();
  }

  Vector backward(const Mlp::Cache& cache, const Vector& d_values) const {
    return trunk_.backward(cache, d_values.transpose());
  }

 private:
  Mlp trunk_;
};

inline double forward_value(const ValueNet& critic, const Observation& s) { return critic.value(s); }

struct AdamState {
  long step_count = 0;
  Vector first_moment;
  Vector second_moment;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double learning_rate = 3e-4;
  double epsilon = 1e-8;

  static AdamState for_size(Eigen::Index n, double lr) {
    AdamState s;
    s.first_moment = Vector::Zero(n);
    s.second_moment = Vector::Zero(n);
    s.learning_rate = lr;
    return s;
  }
};

// Bias-corrected Adam update in place.
inline void adam_step(Vector& params, const Vector& grads, AdamState& state) {
  require_shape(params.size() == grads.size(), "adam_step: gradient size mismatch");
  require_shape(state.first_moment.size() == params.size() &&
                    state.second_moment.size() == params.size(),
                "adam_step: moment size mismatch");
  ++state.step_count;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * grads;
  state.second_moment =
      state.beta2 * state.second_moment + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  params.array() -= state.learning_rate * (state.first_moment.array() / bc1) /
                    ((state.second_moment.array() / bc2).sqrt() + state.epsilon);
}

inline void adam_step(PolicyNet& policy, const Vector& grads, AdamState& state) {
  Vector p = policy.flat();
  adam_step(p, grads, state);
  policy.set_flat(p);
  policy.clamp_log_std();
}

inline void adam_step(ValueNet& critic, const Vector& grads, AdamState& state) {
  adam_step(critic.trunk().params(), grads, state);
}

// ---- checkpoint serialization ----------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json to_json_array(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

inline Vector from_json_array(const nlohmann::json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

}  // namespace detail

inline nlohmann::json to_json(const Mlp& m) {
  return {{"sizes", m.sizes()}, {"params", detail::to_json_array(m.params())}};
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
  Mlp m(j.at("sizes").get<std::vector<int>>());
  Vector p = detail::from_json_array(j.at("params"));
  require_shape(p.size() == m.num_params(), "checkpoint: parameter count mismatch");
  m.params() = p;
  return m;
}

inline nlohmann::json to_json(const AdamState& s) {
  return {{"step_count", s.step_count},
          {"beta1", s.beta1},
          {"beta2", s.beta2},
          {"learning_rate", s.learning_rate},
          {"epsilon", s.epsilon},
          {"first_moment", detail::to_json_array(s.first_moment)},
          {"second_moment", detail::to_json_array(s.second_moment)}};
}

inline AdamState adam_from_json(const nlohmann::json& j) {
  AdamState s;
  s.step_count = j.at("step_count").get<long>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.learning_rate = j.at("learning_rate").get<double>();
  s.epsilon = j.at("epsilon").get<double>();
  s.first_moment = detail::from_json_array(j.at("first_moment"));
  s.second_moment = detail::from_json_array(j.at("second_moment"));
  return s;
}

struct Checkpoint {
  PolicyNet policy;
  ValueNet critic;
  AdamState actor_adam;
  AdamState critic_adam;
  long episode = 0;
  long env_steps = 0;
};

inline nlohmann::json to_json(const Checkpoint& c) {
  return {{"format", "hp3o-checkpoint"},
          {"version", kCheckpointVersion},
          {"episode", c.episode},
          {"env_steps", c.env_steps},
          {"policy",
           {{"head", c.policy.head() == PolicyHead::kCategorical ? "categorical" : "gaussian"},
            {"trunk", to_json(c.policy.trunk())},
            {"log_std", detail::to_json_array(c.policy.log_std())}}},
          {"critic", to_json(c.critic.trunk())},
          {"actor_adam", to_json(c.actor_adam)},
          {"critic_adam", to_json(c.critic_adam)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.at("format") != "hp3o-checkpoint") throw std::runtime_error("not an hp3o checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version");
  Checkpoint c;
  c.episode = j.at("episode").get<long>();
  c.env_steps = j.at("env_steps").get<long>();
  const auto& p = j.at("policy");
  const PolicyHead head =
      p.at("head") == "categorical" ? PolicyHead::kCategorical : PolicyHead::kGaussian;
  c.policy = PolicyNet(head, mlp_from_json(p.at("trunk")));
  if (head == PolicyHead::kGaussian) c.policy.log_std() = detail::from_json_array(p.at("log_std"));
  c.critic = ValueNet(mlp_from_json(j.at("critic")));
  c.actor_adam = adam_from_json(j.at("actor_adam"));
  c.critic_adam = adam_from_json(j.at("critic_adam"));
  return c;
}

}  // namespace hp3o
