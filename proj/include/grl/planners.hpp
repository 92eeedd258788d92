#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "finite_mdp.hpp"
#include "policy.hpp"

namespace grl {

struct QTable {
  std::size_t n_states = 0, n_actions = 0;
  std::vector<double> values;
  std::vector<std::uint64_t> visits;

  QTable() = default;
  QTable(std::size_t ns, std::size_t na, double init = 0.0)
      : n_states(ns), n_actions(na), values(ns * na, init), visits(ns * na, 0) {}

  double& operator()(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
  double operator()(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }

  double max(std::size_t s) const {
    double m = values[s * n_actions];
    for (std::size_t a = 1; a < n_actions; ++a) m = std::max(m, values[s * n_actions + a]);
    return m;
  }

  // smallest maximizing action
  std::size_t greedy(std::size_t s) const {
    std::size_t best = 0;
    for (std::size_t a = 1; a < n_actions; ++a)
      if (values[s * n_actions + a] > values[s * n_actions + best]) best = a;
    return best;
  }

  std::vector<std::size_t> greedy_policy() const {
    std::vector<std::size_t> g(n_states);
    for (std::size_t s = 0; s < n_states; ++s) g[s] = greedy(s);
    return g;
  }

  // {a : max_s - q(s,a) <= tol}
  std::vector<std::size_t> near_greedy(std::size_t s, double tol) const {
    std::vector<std::size_t> out;
    const double m = max(s);
    for (std::size_t a = 0; a < n_actions; ++a)
      if (m - (*this)(s, a) <= tol) out.push_back(a);
    return out;
  }
};

struct ValueTable {
  std::vector<double> values;
  double operator[](std::size_t s) const { return values[s]; }
  std::size_t size() const { return values.size(); }
};

struct PlannerOptions {
  double theta = 1e-9;
  std::size_t max_iterations = 1000000;
};

inline constexpr double kOracleTheta = 1e-9;
inline constexpr double kExperimentTheta = 1e-6;

namespace detail {

inline void check_theta(double theta) {
  if (!(theta > 0)) throw PreconditionViolated("theta must be positive");
}

// r(s,a) + gamma * sum_t P(t|s,a) v(t)
inline double backup(const FiniteMDP& m, std::size_t s, std::size_t a, const std::vector<double>& v) {
  const double* row = m.row(s, a);
  double acc = 0;
  for (std::size_t t = 0; t < m.n_states(); ++t) acc += row[t] * v[t];
  return m.r(s, a) + m.gamma() * acc;
}

inline QTable q_from_v(const FiniteMDP& m, const std::vector<double>& v) {
  QTable q(m.n_states(), m.n_actions());
  for (std::size_t s = 0; s < m.n_states(); ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a) q(s, a) = backup(m, s, a, v);
  return q;
}

}  // namespace detail

inline QTable avi(const FiniteMDP& m, const PlannerOptions& opt = {}) {
  detail::check_theta(opt.theta);
  const std::size_t ns = m.n_states(), na = m.n_actions();
  QTable q(ns, na);
  std::vector<double> v(ns, 0.0);
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    double diff = 0;
    for (std::size_t s = 0; s < ns; ++s)
      for (std::size_t a = 0; a < na; ++a) {
        double nq = detail::backup(m, s, a, v);
        diff = std::max(diff, std::abs(nq - q(s, a)));
        q(s, a) = nq;
      }
    for (std::size_t s = 0; s < ns; ++s) v[s] = q.max(s);
    if (diff <= opt.theta) return q;
  }
  throw NoConvergence("avi", opt.max_iterations);
}

inline QTable avi(const FiniteMDP& m, double theta) { return avi(m, PlannerOptions{theta}); }

// Optional observer sees every iterate.
template <class Observer>
ValueTable vi(const FiniteMDP& m, const PlannerOptions& opt, Observer&& observe) {
  detail::check_theta(opt.theta);
  const std::size_t ns = m.n_states(), na = m.n_actions();
  std::vector<double> v(ns, 0.0), nv(ns);
  observe(v);
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    double diff = 0;
    for (std::size_t s = 0; s < ns; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < na; ++a) best = std::max(best, detail::backup(m, s, a, v));
      nv[s] = best;
      diff = std::max(diff, std::abs(best - v[s]));
    }
    v.swap(nv);
    observe(v);
    if (diff <= opt.theta) return {v};
  }
  throw NoConvergence("vi", opt.max_iterations);
}

inline ValueTable vi(const FiniteMDP& m, const PlannerOptions& opt = {}) {
  return vi(m, opt, [](const std::vector<double>&) {});
}

inline ValueTable vi(const FiniteMDP& m, double theta) { return vi(m, PlannerOptions{theta}); }

inline void check_policy_shape(const FiniteMDP& m, const Policy& p) {
  if (!p.is_tabular() || p.n_states() != m.n_states() || p.n_actions() != m.n_actions())
    throw ShapeMismatch("policy must be tabular over the MDP's states and actions");
}

// Row-stochastic matrix of the chain induced by a tabular policy.
inline Matrix policy_matrix(const FiniteMDP& m, const Policy& p) {
  check_policy_shape(m, p);
  const std::size_t ns = m.n_states();
  Matrix P(ns, std::vector<double>(ns, 0.0));
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a) {
      const double w = p.at_state(s)[a];
      if (w == 0) continue;
      const double* row = m.row(s, a);
      for (std::size_t t = 0; t < ns; ++t) P[s][t] += w * row[t];
    }
  return P;
}

inline Matrix action_matrix(const FiniteMDP& m, std::size_t a) {
  Matrix P(m.n_states());
  for (std::size_t s = 0; s < m.n_states(); ++s) P[s].assign(m.row(s, a), m.row(s, a) + m.n_states());
  return P;
}

inline std::vector<double> policy_reward(const FiniteMDP& m, const Policy& p) {
  std::vector<double> r(m.n_states(), 0.0);
  for (std::size_t s = 0; s < m.n_states(); ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a) r[s] += p.at_state(s)[a] * m.r(s, a);
  return r;
}

inline ValueTable pe(const FiniteMDP& m, const Policy& p, const PlannerOptions& opt = {}) {
  detail::check_theta(opt.theta);
  const Matrix P = policy_matrix(m, p);
  const std::vector<double> r = policy_reward(m, p);
  const std::size_t ns = m.n_states();
  std::vector<double> v(ns, 0.0), nv(ns);
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    double diff = 0;
    for (std::size_t s = 0; s < ns; ++s) {
      double acc = 0;
      for (std::size_t t = 0; t < ns; ++t) acc += P[s][t] * v[t];
      nv[s] = r[s] + m.gamma() * acc;
      diff = std::max(diff, std::abs(nv[s] - v[s]));
    }
    v.swap(nv);
    if (diff <= opt.theta) return {v};
  }
  throw NoConvergence("pe", opt.max_iterations);
}

inline ValueTable pe(const FiniteMDP& m, const Policy& p, double theta) { return pe(m, p, PlannerOptions{theta}); }

// Exact v^pi from (I - gamma P_pi) v = r_pi by LU with partial pivoting.
inline ValueTable pe_exact(const FiniteMDP& m, const Policy& p) {
  const Matrix P = policy_matrix(m, p);
  const std::vector<double> r = policy_reward(m, p);
  const auto n = static_cast<Eigen::Index>(m.n_states());
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(i) = r[i];
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) -= m.gamma() * P[i][j];
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  Eigen::VectorXd x = lu.solve(b);
  if (!x.allFinite() || (A * x - b).lpNorm<Eigen::Infinity>() > 1e-8 * (1.0 + b.lpNorm<Eigen::Infinity>()))
    throw SingularEvaluation("policy evaluation system could not be solved");
  return {std::vector<double>(x.data(), x.data() + n)};
}

struct PiResult {
  Policy policy;
  QTable q;
  std::size_t iterations = 0;
};

inline PiResult pi(const FiniteMDP& m, const PlannerOptions& opt = {}, std::size_t max_improvements = 10000) {
  detail::check_theta(opt.theta);
  const std::size_t ns = m.n_states(), na = m.n_actions();
  Policy policy = Policy::uniform(ns, na);
  std::vector<std::vector<std::size_t>> support(ns);
  for (std::size_t it = 1; it <= max_improvements; ++it) {
    const ValueTable v = pe_exact(m, policy);
    QTable q = detail::q_from_v(m, v.values);
    std::vector<std::vector<std::size_t>> next(ns);
    Matrix probs(ns, std::vector<double>(na, 0.0));
    for (std::size_t s = 0; s < ns; ++s) {
      next[s] = q.near_greedy(s, opt.theta);
      for (auto a : next[s]) probs[s][a] = 1.0 / static_cast<double>(next[s].size());
    }
    if (next == support) return {policy, q, it};
    support = std::move(next);
    policy = Policy::tabular(std::move(probs));
  }
  throw NoConvergence("pi", max_improvements);
}

inline PiResult pi(const FiniteMDP& m, double theta) { return pi(m, PlannerOptions{theta}); }

inline double bellman_residual(const FiniteMDP& m, const QTable& q) {
  if (q.n_states != m.n_states() || q.n_actions != m.n_actions()) throw ShapeMismatch("q table shape");
  std::vector<double> v(m.n_states());
  for (std::size_t s = 0; s < m.n_states(); ++s) v[s] = q.max(s);
  double res = 0;
  for (std::size_t s = 0; s < m.n_states(); ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a)
      res = std::max(res, std::abs(q(s, a) - detail::backup(m, s, a, v)));
  return res;
}

// Left fixed point rho P = rho by power iteration on the lazy chain (I+P)/2,
// which has the same stationary law and is aperiodic.
inline std::vector<double> stationary_distribution(const Matrix& P, double tol = 1e-12,
                                                   std::size_t max_iterations = 1000000) {
  const std::size_t n = P.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (P[i].size() != n) throw ShapeMismatch("transition matrix must be square");
    double t = 0;
    for (double v : P[i]) t += v;
    if (std::abs(t - 1.0) > kRowTolerance) throw NonStochasticRow(i, 0, t);
  }
  std::vector<double> rho(n, 1.0 / static_cast<double>(n)), next(n);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (rho[i] == 0) continue;
      for (std::size_t j = 0; j < n; ++j) next[j] += rho[i] * P[i][j];
    }
    double diff = 0, total = 0;
    for (std::size_t j = 0; j < n; ++j) {
      next[j] = 0.5 * (next[j] + rho[j]);
      total += next[j];
    }
    for (std::size_t j = 0; j < n; ++j) {
      next[j] /= total;
      diff += std::abs(next[j] - rho[j]);
    }
    rho.swap(next);
    // the lazy step halves the move, so compare against tol/2
    if (diff <= 0.5 * tol) return rho;
  }
  throw NoConvergence("stationary_distribution", max_iterations);
}

// Same fixed point from one linear solve: rho (I - P) = 0 with the last
// equation replaced by sum(rho) = 1. Needs a single recurrent class.
inline std::vector<double> stationary_distribution_exact(const Matrix& P) {
  const auto n = static_cast<Eigen::Index>(P.size());
  Eigen::MatrixXd A(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (P[i].size() != P.size()) throw ShapeMismatch("transition matrix must be square");
    for (Eigen::Index j = 0; j < n; ++j) A(j, i) = (i == j ? 1.0 : 0.0) - P[i][j];
  }
  A.row(n - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  b(n - 1) = 1.0;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw SingularEvaluation("chain has more than one recurrent class");
  Eigen::VectorXd x = lu.solve(b);
  std::vector<double> rho(P.size());
  double total = 0;
  for (Eigen::Index i = 0; i < n; ++i) total += rho[i] = std::max(0.0, x(i));
  for (auto& v : rho) v /= total;
  return rho;
}

}  // namespace grl
