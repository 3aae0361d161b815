#pragma once

#include "hp3o/core.hpp"
#include "hp3o/env.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace hp3o::theory {

// Finite MDP. Transition rows are indexed by s * n_actions + a.
struct TabularMDP {
  int n_states = 0;
  int n_actions = 0;
  Matrix transition;  // (S*A) x S
  Matrix reward;      // S x A
  Vector initial;     // rho_0
  double gamma = 0.9;

  Eigen::Index row(int s, int a) const { return Eigen::Index(s) * n_actions + a; }

  void validate(double tol = 1e-12) const {
    if (n_states < 1 || n_actions < 1) throw std::invalid_argument("TabularMDP: empty state/action set");
    if (transition.rows() != Eigen::Index(n_states) * n_actions || transition.cols() != n_states)
      throw ShapeError("TabularMDP: transition shape");
    if (reward.rows() != n_states || reward.cols() != n_actions) throw ShapeError("TabularMDP: reward shape");
    if (initial.size() != n_states) throw ShapeError("TabularMDP: initial distribution shape");
    if ((transition.array() < 0).any() || (initial.array() < 0).any())
      throw std::invalid_argument("TabularMDP: negative probability");
    if (((transition.rowwise().sum().array() - 1.0).abs() > tol).any())
      throw std::invalid_argument("TabularMDP: transition rows must sum to 1");
    if (std::abs(initial.sum() - 1.0) > tol) throw std::invalid_argument("TabularMDP: rho_0 must sum to 1");
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMDP: gamma must be in (0,1)");
  }
};

// pi(a|s) as an S x A row-stochastic matrix.
struct TabularPolicy {
  Matrix probs;

  int n_states() const { return static_cast<int>(probs.rows()); }
  int n_actions() const { return static_cast<int>(probs.cols()); }

  void validate(bool require_full_support = true, double tol = 1e-12) const {
    if ((probs.array() < 0).any()) throw std::invalid_argument("TabularPolicy: negative probability");
    if (((probs.rowwise().sum().array() - 1.0).abs() > tol).any())
      throw std::invalid_argument("TabularPolicy: rows must sum to 1");
    if (require_full_support && !(probs.array() > 0).all())
      throw std::invalid_argument("TabularPolicy: full support required");
  }
};

struct ExactQuantities {
  Vector value;        // V(s)
  Matrix q;            // Q(s, a)
  Matrix advantage;    // Q - V
  double objective;    // J = sum_s rho_0(s) V(s)
  Vector visitation;   // d(s) = (1-gamma) sum_t gamma^t P(s_t = s)
};

inline Matrix state_transition(const TabularMDP& mdp, const TabularPolicy& pi) {
  Matrix p(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    p.row(s).setZero();
    for (int a = 0; a < mdp.n_actions; ++a) p.row(s) += pi.probs(s, a) * mdp.transition.row(mdp.row(s, a));
  }
  return p;
}

inline Matrix q_from_values(const TabularMDP& mdp, const Vector& v) {
  Matrix q(mdp.n_states, mdp.n_actions);
  for (int s = 0; s < mdp.n_states; ++s)
    for (int a = 0; a < mdp.n_actions; ++a)
      q(s, a) = mdp.reward(s, a) + mdp.gamma * mdp.transition.row(mdp.row(s, a)).dot(v);
  return q;
}

// Direct solves of (I - gamma P_pi) V = r_pi and d = (1-gamma) rho_0 + gamma P_pi^T d.
inline ExactQuantities exact_eval(const TabularMDP& mdp, const TabularPolicy& pi) {
  require_shape(pi.n_states() == mdp.n_states && pi.n_actions() == mdp.n_actions,
                "exact_eval: policy shape does not match MDP");
  const Matrix p = state_transition(mdp, pi);
  const Vector r_pi = (pi.probs.array() * mdp.reward.array()).rowwise().sum();
  const Matrix eye = Matrix::Identity(mdp.n_states, mdp.n_states);
  ExactQuantities out;
  out.value = (eye - mdp.gamma * p).partialPivLu().solve(r_pi);
  out.q = q_from_values(mdp, out.value);
  out.advantage = out.q.colwise() - out.value;
  out.objective = mdp.initial.dot(out.value);
  out.visitation = (eye - mdp.gamma * p.transpose()).partialPivLu().solve((1.0 - mdp.gamma) * mdp.initial);
  return out;
}

inline double tv_distance(const TabularPolicy& a, const TabularPolicy& b, int s) {
  return 0.5 * (a.probs.row(s) - b.probs.row(s)).cwiseAbs().sum();
}

inline Vector tv_distances(const TabularPolicy& a, const TabularPolicy& b) {
  return 0.5 * (a.probs - b.probs).cwiseAbs().rowwise().sum();
}

inline double expected_tv(const Vector& d, const TabularPolicy& a, const TabularPolicy& b) {
  return d.dot(tv_distances(a, b));
}

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  bool premise_holds = true;

  double slack() const { return lhs - rhs; }
};

inline constexpr double kBoundTolerance = 1e-9;

namespace detail {

// (1/(1-gamma)) E_{s~d_ref, a~pi_ref}[ (pi/pi_ref) adv(s,a) ]
inline double ratio_surrogate(const TabularMDP& mdp, const Vector& d_ref, const TabularPolicy& pi_ref,
                              const TabularPolicy& pi, const Matrix& adv) {
  double acc = 0.0;
  for (int s = 0; s < mdp.n_states; ++s) {
    double inner = 0.0;
    for (int a = 0; a < mdp.n_actions; ++a)
      inner += pi_ref.probs(s, a) * (pi.probs(s, a) / pi_ref.probs(s, a)) * adv(s, a);
    acc += d_ref[s] * inner;
  }
  return acc / (1.0 - mdp.gamma);
}

// max_s | E_{a~pi}[adv(s,a)] |
inline double max_expected_advantage(const TabularPolicy& pi, const Matrix& adv) {
  return (pi.probs.array() * adv.array()).rowwise().sum().abs().maxCoeff();
}

inline BoundCheck finish(double lhs, double rhs, bool premise = true) {
  return {lhs, rhs, lhs >= rhs - kBoundTolerance, premise};
}

}  // namespace detail

// J(pi) - J(pi_k) >= surrogate under d^{pi_k} - 2 gamma C / (1-gamma)^2 E[delta(pi, pi_k)].
inline BoundCheck check_lemma1(const TabularMDP& mdp, const TabularPolicy& pi_k, const TabularPolicy& pi) {
  const auto ek = exact_eval(mdp, pi_k);
  const auto e = exact_eval(mdp, pi);
  const double g = mdp.gamma;
  const double c = detail::max_expected_advantage(pi, ek.advantage);
  const double surrogate = detail::ratio_surrogate(mdp, ek.visitation, pi_k, pi, ek.advantage);
  const double penalty = 2.0 * g * c / ((1.0 - g) * (1.0 - g)) * expected_tv(ek.visitation, pi, pi_k);
  return detail::finish(e.objective - ek.objective, surrogate - penalty);
}

// Reference-policy form: expectations under d^{pi_r} with ratio pi / pi_r.
inline BoundCheck check_lemma2(const TabularMDP& mdp, const TabularPolicy& pi_k, const TabularPolicy& pi_r,
                               const TabularPolicy& pi) {
  const auto ek = exact_eval(mdp, pi_k);
  const auto er = exact_eval(mdp, pi_r);
  const auto e = exact_eval(mdp, pi);
  const double g = mdp.gamma;
  const double c = detail::max_expected_advantage(pi, ek.advantage);
  const double surrogate = detail::ratio_surrogate(mdp, er.visitation, pi_r, pi, ek.advantage);
  const double penalty = 2.0 * g * c / ((1.0 - g) * (1.0 - g)) * expected_tv(er.visitation, pi, pi_r);
  return detail::finish(e.objective - ek.objective, surrogate - penalty);
}

// Largest E_{s~d^{pi_i}}[delta(pi, pi_i)] over the mixture components.
inline double max_reference_tv(const TabularMDP& mdp, const std::vector<TabularPolicy>& refs,
                               const TabularPolicy& pi) {
  double worst = 0.0;
  for (const auto& r : refs) worst = std::max(worst, expected_tv(exact_eval(mdp, r).visitation, pi, r));
  return worst;
}

inline void check_mixture(const std::vector<TabularPolicy>& refs, const Vector& weights) {
  if (refs.empty() || Eigen::Index(refs.size()) != weights.size())
    throw std::invalid_argument("mixture: one weight per reference policy required");
  if ((weights.array() < 0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("mixture: weights must form a distribution");
}

// Mixture over prior policies with the clipping premise E_{d^{pi_i}}[delta(pi,pi_i)] <= eps/2.
inline BoundCheck check_theorem1(const TabularMDP& mdp, const std::vector<TabularPolicy>& refs,
                                 const Vector& weights, const TabularPolicy& pi_k,
                                 const TabularPolicy& pi, double eps) {
  check_mixture(refs, weights);
  const auto ek = exact_eval(mdp, pi_k);
  const auto e = exact_eval(mdp, pi);
  const double g = mdp.gamma;
  double surrogate = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto er = exact_eval(mdp, refs[i]);
    surrogate += weights[Eigen::Index(i)] * detail::ratio_surrogate(mdp, er.visitation, refs[i], pi, ek.advantage);
  }
  const double c = detail::max_expected_advantage(pi, ek.advantage);
  const double penalty = g * c * eps / ((1.0 - g) * (1.0 - g));
  const bool premise = max_reference_tv(mdp, refs, pi) <= eps / 2.0;
  return detail::finish(e.objective - ek.objective, surrogate - penalty, premise);
}

// Best-value baseline terms: A_hat = Q^{pi_k} - V^{pi*}, value gap G = V^{pi*} - V^{pi_k}.
struct BaselineTerms {
  Matrix advantage_hat;
  Vector value_gap;
  double c_hat = 0.0;  // max_s |E_{a~pi} A_hat|
  double c_gap = 0.0;  // max_s |G|
  double c = 0.0;      // max_s |E_{a~pi} A^{pi_k}|
};

inline BaselineTerms baseline_terms(const TabularMDP& mdp, const TabularPolicy& pi_star,
                                    const TabularPolicy& pi_k, const TabularPolicy& pi) {
  const auto ek = exact_eval(mdp, pi_k);
  const auto es = exact_eval(mdp, pi_star);
  BaselineTerms t;
  t.advantage_hat = ek.q.colwise() - es.value;
  t.value_gap = es.value - ek.value;
  t.c_hat = detail::max_expected_advantage(pi, t.advantage_hat);
  t.c_gap = t.value_gap.cwiseAbs().maxCoeff();
  t.c = detail::max_expected_advantage(pi, ek.advantage);
  return t;
}

// Stated for a best policy that dominates the current one (V^{pi*} >= V^{pi_k}); that
// dominance is reported as the premise.
inline BoundCheck check_lemma3(const TabularMDP& mdp, const TabularPolicy& pi_star,
                               const TabularPolicy& pi_k, const TabularPolicy& pi_r,
                               const TabularPolicy& pi) {
  const auto bt = baseline_terms(mdp, pi_star, pi_k, pi);
  const auto ek = exact_eval(mdp, pi_k);
  const auto er = exact_eval(mdp, pi_r);
  const auto e = exact_eval(mdp, pi);
  const double g = mdp.gamma;
  const double k = 2.0 * g / ((1.0 - g) * (1.0 - g));
  const double tv = expected_tv(er.visitation, pi, pi_r);
  const double surrogate = detail::ratio_surrogate(mdp, er.visitation, pi_r, pi, bt.advantage_hat);
  const bool premise = (bt.value_gap.array() >= -1e-12).all();
  return detail::finish(e.objective - ek.objective, surrogate - k * bt.c_hat * tv - k * bt.c_gap * tv,
                        premise);
}

inline BoundCheck check_theorem2(const TabularMDP& mdp, const TabularPolicy& pi_star,
                                 const TabularPolicy& pi_k, const std::vector<TabularPolicy>& refs,
                                 const Vector& weights, const TabularPolicy& pi, double eps) {
  check_mixture(refs, weights);
  const auto bt = baseline_terms(mdp, pi_star, pi_k, pi);
  const auto ek = exact_eval(mdp, pi_k);
  const auto e = exact_eval(mdp, pi);
  const double g = mdp.gamma;
  double surrogate = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto er = exact_eval(mdp, refs[i]);
    surrogate += weights[Eigen::Index(i)] *
                 detail::ratio_surrogate(mdp, er.visitation, refs[i], pi, bt.advantage_hat);
  }
  const double k = g * eps / ((1.0 - g) * (1.0 - g));
  const bool premise = max_reference_tv(mdp, refs, pi) <= eps / 2.0 &&
                       (bt.value_gap.array() >= -1e-12).all();
  return detail::finish(e.objective - ek.objective, surrogate - k * bt.c_hat - k * bt.c_gap, premise);
}

struct TvdComparison {
  double d_h = 0.0;
  double d_h_plus = 0.0;
  bool holds = false;
};

// D_H = gamma C eps/(1-gamma)^2 vs D_H+ = gamma (C_hat + C_gap) eps/(1-gamma)^2.
inline TvdComparison tvd_update_comparison(const TabularMDP& mdp, const TabularPolicy& pi_star,
                                           const TabularPolicy& pi_k, const TabularPolicy& pi,
                                           double eps) {
  const auto bt = baseline_terms(mdp, pi_star, pi_k, pi);
  const double g = mdp.gamma;
  const double k = g * eps / ((1.0 - g) * (1.0 - g));
  TvdComparison out;
  out.d_h = k * bt.c;
  out.d_h_plus = k * (bt.c_hat + bt.c_gap);
  out.holds = out.d_h <= out.d_h_plus + 1e-12;
  return out;
}

// eps_H = eps_P / E_{i~v}[i + 1]
inline double clip_parameter_relation(double eps_p, const Vector& weights) {
  if (weights.size() == 0 || (weights.array() < 0).any() || std::abs(weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("clip_parameter_relation: weights must form a distribution");
  const Vector idx = Vector::LinSpaced(weights.size(), 1.0, static_cast<double>(weights.size()));
  return eps_p / weights.dot(idx);
}

struct OptimalSolution {
  Vector value;
  TabularPolicy greedy;
  int iterations = 0;
};

inline TabularPolicy greedy_policy(const Matrix& q) {
  TabularPolicy pi{Matrix::Zero(q.rows(), q.cols())};
  for (Eigen::Index s = 0; s < q.rows(); ++s) {
    Eigen::Index a = 0;
    q.row(s).maxCoeff(&a);
    pi.probs(s, a) = 1.0;
  }
  return pi;
}

inline OptimalSolution value_iteration(const TabularMDP& mdp, double tol = 1e-13, int max_iter = 100000) {
  OptimalSolution out;
  Vector v = Vector::Zero(mdp.n_states);
  for (int it = 0; it < max_iter; ++it) {
    const Vector next = q_from_values(mdp, v).rowwise().maxCoeff();
    const double delta = (next - v).cwiseAbs().maxCoeff();
    v = next;
    out.iterations = it + 1;
    if (delta < tol) break;
  }
  out.value = v;
  out.greedy = greedy_policy(q_from_values(mdp, v));
  return out;
}

// The grid as an exact MDP: the goal is absorbing with zero reward, entering it pays +1.
inline TabularMDP gridworld_mdp(const GridWorld& grid, double gamma) {
  TabularMDP m;
  m.n_states = grid.n_cells();
  m.n_actions = 4;
  m.gamma = gamma;
  m.transition = Matrix::Zero(Eigen::Index(m.n_states) * 4, m.n_states);
  m.reward = Matrix::Zero(m.n_states, 4);
  m.initial = Vector::Zero(m.n_states);
  m.initial[grid.start_cell()] = 1.0;
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < 4; ++a) {
      if (s == grid.goal_cell()) {
        m.transition(m.row(s, a), s) = 1.0;
        continue;
      }
      const int nxt = grid.next_cell(s, a);
      m.transition(m.row(s, a), nxt) = 1.0;
      if (nxt == grid.goal_cell()) m.reward(s, a) = 1.0;
    }
  return m;
}

// ---- random instances --------------------------------------------------------------------

struct InstanceRanges {
  int min_states = 2, max_states = 6;
  int min_actions = 2, max_actions = 4;
  double min_gamma = 0.5, max_gamma = 0.95;
  double min_eps = 0.05, max_eps = 0.4;
  int min_refs = 1, max_refs = 4;
};

inline constexpr double kSupportFloor = 1e-6;

inline Vector dirichlet_ones(Rng& rng, int n) {
  std::exponential_distribution<double> ex(1.0);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = ex(rng);
  return v / v.sum();
}

inline TabularPolicy floor_support(TabularPolicy pi) {
  pi.probs = pi.probs.cwiseMax(kSupportFloor);
  for (Eigen::Index s = 0; s < pi.probs.rows(); ++s) pi.probs.row(s) /= pi.probs.row(s).sum();
  return pi;
}

inline TabularMDP random_mdp(Rng& rng, const InstanceRanges& r) {
  TabularMDP m;
  m.n_states = std::uniform_int_distribution<int>(r.min_states, r.max_states)(rng);
  m.n_actions = std::uniform_int_distribution<int>(r.min_actions, r.max_actions)(rng);
  m.gamma = std::uniform_real_distribution<double>(r.min_gamma, r.max_gamma)(rng);
  m.transition.resize(Eigen::Index(m.n_states) * m.n_actions, m.n_states);
  for (Eigen::Index i = 0; i < m.transition.rows(); ++i) m.transition.row(i) = dirichlet_ones(rng, m.n_states);
  std::uniform_real_distribution<double> ur(-1.0, 1.0);
  m.reward.resize(m.n_states, m.n_actions);
  for (int s = 0; s < m.n_states; ++s)
    for (int a = 0; a < m.n_actions; ++a) m.reward(s, a) = ur(rng);
  m.initial = dirichlet_ones(rng, m.n_states);
  return m;
}

inline TabularPolicy random_policy(Rng& rng, int n_states, int n_actions) {
  TabularPolicy pi{Matrix(n_states, n_actions)};
  for (int s = 0; s < n_states; ++s) pi.probs.row(s) = dirichlet_ones(rng, n_actions).transpose();
  return floor_support(pi);
}

// (1 - rate) base + rate noise; the per-state TV to base is at most rate.
inline TabularPolicy nearby_policy(Rng& rng, const TabularPolicy& base, double rate) {
  const TabularPolicy noise = random_policy(rng, base.n_states(), base.n_actions());
  return floor_support({(1.0 - rate) * base.probs + rate * noise.probs});
}

// A policy that dominates pi_k: a mixture of pi_k with its greedy improvement.
inline TabularPolicy improved_policy(Rng& rng, const TabularMDP& mdp, const TabularPolicy& pi_k) {
  const double alpha = std::uniform_real_distribution<double>(0.0, 0.99)(rng);
  const TabularPolicy greedy = greedy_policy(exact_eval(mdp, pi_k).q);
  return {(1.0 - alpha) * pi_k.probs + alpha * greedy.probs};
}

// Everything one sweep instance needs for the five checks.
struct BoundInstance {
  TabularMDP mdp;
  TabularPolicy current;              // pi_k
  TabularPolicy future;               // pi
  TabularPolicy best;                 // pi*
  std::vector<TabularPolicy> priors;  // pi_i
  Vector weights;                     // v
  double eps = 0.2;
  int premise_resamples = 0;
};

inline BoundInstance random_instance(Rng& rng, const InstanceRanges& r) {
  BoundInstance in;
  in.mdp = random_mdp(rng, r);
  const int S = in.mdp.n_states, A = in.mdp.n_actions;
  in.eps = std::uniform_real_distribution<double>(r.min_eps, r.max_eps)(rng);
  in.future = random_policy(rng, S, A);
  std::uniform_real_distribution<double> rate(0.0, in.eps);
  in.current = nearby_policy(rng, in.future, rate(rng));
  const int n_refs = std::uniform_int_distribution<int>(r.min_refs, r.max_refs)(rng);
  for (int i = 0; i < n_refs; ++i) {
    for (;;) {
      TabularPolicy p = nearby_policy(rng, in.future, rate(rng));
      if (expected_tv(exact_eval(in.mdp, p).visitation, in.future, p) <= in.eps / 2.0) {
        in.priors.push_back(std::move(p));
        break;
      }
      ++in.premise_resamples;
    }
  }
  in.weights = dirichlet_ones(rng, n_refs);
  in.best = improved_policy(rng, in.mdp, in.current);
  return in;
}

// ---- JSON --------------------------------------------------------------------------------

inline nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(Eigen::Index(i), Eigen::Index(k)) = rows[i][k];
  return m;
}

inline nlohmann::json to_json(const BoundInstance& in) {
  nlohmann::json priors = nlohmann::json::array();
  for (const auto& p : in.priors) priors.push_back(matrix_json(p.probs));
  return {{"n_states", in.mdp.n_states},
          {"n_actions", in.mdp.n_actions},
          {"gamma", in.mdp.gamma},
          {"transition", matrix_json(in.mdp.transition)},
          {"reward", matrix_json(in.mdp.reward)},
          {"initial", std::vector<double>(in.mdp.initial.data(), in.mdp.initial.data() + in.mdp.initial.size())},
          {"current", matrix_json(in.current.probs)},
          {"future", matrix_json(in.future.probs)},
          {"best", matrix_json(in.best.probs)},
          {"priors", priors},
          {"weights", std::vector<double>(in.weights.data(), in.weights.data() + in.weights.size())},
          {"eps", in.eps}};
}

inline BoundInstance instance_from_json(const nlohmann::json& j) {
  BoundInstance in;
  in.mdp.n_states = j.at("n_states").get<int>();
  in.mdp.n_actions = j.at("n_actions").get<int>();
  in.mdp.gamma = j.at("gamma").get<double>();
  in.mdp.transition = matrix_from_json(j.at("transition"));
  in.mdp.reward = matrix_from_json(j.at("reward"));
  const auto init = j.at("initial").get<std::vector<double>>();
  in.mdp.initial = Eigen::Map<const Vector>(init.data(), Eigen::Index(init.size()));
  in.current.probs = matrix_from_json(j.at("current"));
  in.future.probs = matrix_from_json(j.at("future"));
  in.best.probs = matrix_from_json(j.at("best"));
  for (const auto& p : j.at("priors")) in.priors.push_back({matrix_from_json(p)});
  const auto w = j.at("weights").get<std::vector<double>>();
  in.weights = Eigen::Map<const Vector>(w.data(), Eigen::Index(w.size()));
  in.eps = j.at("eps").get<double>();
  return in;
}

// ---- sweep -------------------------------------------------------------------------------

inline const std::vector<std::string>& all_checks() {
  static const std::vector<std::string> names{"lemma1", "lemma2", "theorem1", "lemma3_theorem2",
                                              "tvd_update_comparison"};
  return names;
}

// Runs one named check on an instance; returns slack (lhs - rhs, or D_H+ - D_H) and verdict.
inline std::pair<double, bool> run_check(const std::string& name, const BoundInstance& in) {
  if (name == "lemma1") {
    const auto r = check_lemma1(in.mdp, in.current, in.future);
    return {r.slack(), r.holds};
  }
  if (name == "lemma2") {
    const auto r = check_lemma2(in.mdp, in.current, in.priors.front(), in.future);
    return {r.slack(), r.holds};
  }
  if (name == "theorem1") {
    const auto r = check_theorem1(in.mdp, in.priors, in.weights, in.current, in.future, in.eps);
    return {r.slack(), r.holds && r.premise_holds};
  }
  if (name == "lemma3_theorem2") {
    const auto l3 = check_lemma3(in.mdp, in.best, in.current, in.priors.front(), in.future);
    const auto t2 = check_theorem2(in.mdp, in.best, in.current, in.priors, in.weights, in.future, in.eps);
    return {std::min(l3.slack(), t2.slack()),
            l3.holds && t2.holds && l3.premise_holds && t2.premise_holds};
  }
  if (name == "tvd_update_comparison") {
    const auto r = tvd_update_comparison(in.mdp, in.best, in.current, in.future, in.eps);
    return {r.d_h_plus - r.d_h, r.holds};
  }
  throw std::invalid_argument("unknown check: " + name);
}

struct CheckSummary {
  long passed = 0;
  long total = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  BoundInstance worst;
};

struct SweepReport {
  std::uint64_t seed = 0;
  long instances = 0;
  long premise_resamples = 0;
  std::map<std::string, CheckSummary> checks;

  bool all_passed() const {
    for (const auto& [_, c] : checks)
      if (c.passed != c.total) return false;
    return true;
  }
};

inline SweepReport run_bound_sweep(long instances, std::uint64_t seed, const std::vector<std::string>& checks,
                                   const InstanceRanges& ranges = {}) {
  for (const auto& c : checks)
    if (std::find(all_checks().begin(), all_checks().end(), c) == all_checks().end())
      throw std::invalid_argument("unknown check: " + c);
  SweepReport rep;
  rep.seed = seed;
  rep.instances = instances;
  for (const auto& c : checks) rep.checks[c];
  for (long i = 0; i < instances; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    BoundInstance in = random_instance(rng, ranges);
    rep.premise_resamples += in.premise_resamples;
    for (const auto& c : checks) {
      auto [slack, ok] = run_check(c, in);
      CheckSummary& s = rep.checks[c];
      ++s.total;
      if (ok) ++s.passed;
      if (slack < s.min_slack) {
        s.min_slack = slack;
        s.worst = in;
      }
    }
  }
  return rep;
}

inline nlohmann::json to_json(const SweepReport& rep) {
  nlohmann::json checks = nlohmann::json::object();
  for (const auto& [name, s] : rep.checks)
    checks[name] = {{"passed", s.passed},
                    {"total", s.total},
                    {"min_slack", s.total ? s.min_slack : 0.0},
                    {"worst_instance", s.total ? to_json(s.worst) : nlohmann::json()}};
  return {{"seed", rep.seed},
          {"instances", rep.instances},
          {"premise_resamples", rep.premise_resamples},
          {"tolerance", kBoundTolerance},
          {"all_passed", rep.all_passed()},
          {"checks", checks}};
}

}  // namespace hp3o::theory
