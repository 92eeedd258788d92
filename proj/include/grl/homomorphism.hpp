#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "abstraction.hpp"
#include "errors.hpp"
#include "finite_mdp.hpp"
#include "planners.hpp"
#include "random_mdp.hpp"

namespace grl {

// psi(x a) = (f(x), g(x, a)).
struct Homomorphism {
  std::size_t n_states = 0, n_abstract_actions = 0;
  std::vector<std::size_t> state_map;                // x -> s
  std::vector<std::vector<std::size_t>> action_map;  // [x][a] -> b

  std::size_t n_underlying() const { return state_map.size(); }
  std::size_t n_underlying_actions() const { return action_map.empty() ? 0 : action_map[0].size(); }
  std::size_t pair(std::size_t x, std::size_t a) const { return state_map[x] * n_abstract_actions + action_map[x][a]; }

  static Homomorphism identity(std::size_t X, std::size_t A) {
    Homomorphism h{X, A, std::vector<std::size_t>(X), std::vector<std::vector<std::size_t>>(X, std::vector<std::size_t>(A))};
    for (std::size_t x = 0; x < X; ++x) {
      h.state_map[x] = x;
      for (std::size_t a = 0; a < A; ++a) h.action_map[x][a] = a;
    }
    return h;
  }

  static Homomorphism constant(std::size_t X, std::size_t A) {
    return {1, 1, std::vector<std::size_t>(X, 0), std::vector<std::vector<std::size_t>>(X, std::vector<std::size_t>(A, 0))};
  }

  void validate(const FiniteMDP& m) const {
    if (state_map.size() != m.n_states() || action_map.size() != m.n_states())
      throw PreconditionViolated("homomorphism must cover every underlying state");
    for (std::size_t x = 0; x < state_map.size(); ++x) {
      if (state_map[x] >= n_states) throw UnknownState(state_map[x]);
      if (action_map[x].size() != m.n_actions()) throw PreconditionViolated("action map must cover every action");
      for (auto b : action_map[x])
        if (b >= n_abstract_actions) throw PreconditionViolated("abstract action out of range");
    }
  }
};

// B(x a | s b) stored per abstract pair as a distribution over (x, a).
class HomoDispersion {
 public:
  HomoDispersion() = default;
  explicit HomoDispersion(std::vector<std::vector<double>> w) : w_(std::move(w)) {}

  // weight(x, a) >= 0 normalized inside each pre-image
  template <class Weight>
  static HomoDispersion from_weights(const Homomorphism& h, Weight&& weight) {
    const std::size_t X = h.n_underlying(), A = h.n_underlying_actions();
    std::vector<std::vector<double>> w(h.n_states * h.n_abstract_actions, std::vector<double>(X * A, 0.0));
    std::vector<double> mass(w.size(), 0.0);
    for (std::size_t x = 0; x < X; ++x)
      for (std::size_t a = 0; a < A; ++a) {
        const double v = weight(x, a);
        if (!(v >= 0)) throw InvalidDispersion("negative dispersion weight");
        w[h.pair(x, a)][x * A + a] = v;
        mass[h.pair(x, a)] += v;
      }
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (mass[k] <= 0)
        throw InvalidDispersion("abstract pair (" + std::to_string(k / h.n_abstract_actions) + "," +
                                std::to_string(k % h.n_abstract_actions) + ") has no pre-image weight");
      for (auto& v : w[k]) v /= mass[k];
    }
    return HomoDispersion(std::move(w));
  }

  static HomoDispersion uniform(const Homomorphism& h) {
    return from_weights(h, [](std::size_t, std::size_t) { return 1.0; });
  }

  const std::vector<double>& row(std::size_t k) const { return w_[k]; }
  std::size_t size() const { return w_.size(); }

  void validate(const Homomorphism& h) const {
    const std::size_t X = h.n_underlying(), A = h.n_underlying_actions();
    if (w_.size() != h.n_states * h.n_abstract_actions) throw InvalidDispersion("dispersion covers wrong pair count");
    for (std::size_t k = 0; k < w_.size(); ++k) {
      if (w_[k].size() != X * A) throw InvalidDispersion("dispersion row has wrong support size");
      double t = 0;
      for (std::size_t x = 0; x < X; ++x)
        for (std::size_t a = 0; a < A; ++a) {
          const double v = w_[k][x * A + a];
          if (!(v >= 0)) throw InvalidDispersion("negative dispersion weight");
          if (v > 0 && h.pair(x, a) != k) throw InvalidDispersion("dispersion mass outside the pre-image");
          t += v;
        }
      if (std::abs(t - 1.0) > kRowTolerance) throw InvalidDispersion("dispersion row does not sum to 1");
    }
  }

 private:
  std::vector<std::vector<double>> w_;
};

inline UniformityReport check_q_homo(const FiniteMDP& m, const Homomorphism& h, double eps, const QTable& qstar) {
  h.validate(m);
  const std::size_t X = m.n_states(), A = m.n_actions();
  UniformityReport rep;
  for (std::size_t i = 0; i < X * A; ++i)
    for (std::size_t j = i + 1; j < X * A; ++j) {
      const std::size_t x = i / A, a = i % A, y = j / A, b = j % A;
      if (h.pair(x, a) != h.pair(y, b)) continue;
      const double g = std::abs(qstar(x, a) - qstar(y, b));
      if (g > rep.worst_gap) {
        rep.worst_gap = g;
        if (g > eps) rep.witness = Witness{x, y, a};
      }
    }
  rep.holds = rep.worst_gap <= eps;
  return rep;
}

inline UniformityReport check_q_homo(const FiniteMDP& m, const Homomorphism& h, double eps) {
  return check_q_homo(m, h, eps, avi(m, kOracleTheta));
}

inline SurrogateMDP surrogate_from_homo(const FiniteMDP& m, const Homomorphism& h, const HomoDispersion& B) {
  h.validate(m);
  B.validate(h);
  const std::size_t S = h.n_states, Bn = h.n_abstract_actions, X = m.n_states(), A = m.n_actions();
  std::vector<double> p(S * Bn * S, 0.0), r(S * Bn, 0.0);
  for (std::size_t k = 0; k < S * Bn; ++k) {
    double* prow = p.data() + k * S;
    for (std::size_t x = 0; x < X; ++x)
      for (std::size_t a = 0; a < A; ++a) {
        const double w = B.row(k)[x * A + a];
        if (w == 0) continue;
        r[k] += w * m.r(x, a);
        const double* row = m.row(x, a);
        for (std::size_t y = 0; y < X; ++y) prow[h.state_map[y]] += w * row[y];
      }
  }
  return {FiniteMDP(S, Bn, std::move(p), std::move(r), m.gamma()), {"homomorphism", DispersionSource::explicit_weights}};
}

// Deterministic uplift through psi^-1: at x take the best abstract action
// available at x under the surrogate values, then the smallest underlying
// action mapped to it.
inline std::vector<std::size_t> uplift_homo(const Homomorphism& h, const QTable& q_abstract) {
  const std::size_t X = h.n_underlying(), A = h.n_underlying_actions();
  std::vector<std::size_t> out(X);
  for (std::size_t x = 0; x < X; ++x) {
    const std::size_t s = h.state_map[x];
    std::size_t best = 0;
    bool found = false;
    for (std::size_t a = 0; a < A; ++a) {
      const double v = q_abstract(s, h.action_map[x][a]);
      if (!found || v > q_abstract(s, h.action_map[x][best])) {
        best = a;
        found = true;
      }
    }
    out[x] = best;
  }
  return out;
}

struct ValueLossReport {
  double bound = 0;
  double observed = 0;
  bool holds = true;
};

inline ValueLossReport verify_value_loss(const FiniteMDP& m, const Homomorphism& h, const HomoDispersion& B, double eps,
                                         double tol = 1e-7) {
  const QTable qstar = avi(m, kOracleTheta);
  const auto gap = check_q_homo(m, h, eps, qstar);
  if (!gap.holds)
    throw PreconditionViolated("Q-uniformity gap " + std::to_string(gap.worst_gap) + " exceeds eps " + std::to_string(eps));
  const auto sur = surrogate_from_homo(m, h, B);
  const auto actions = uplift_homo(h, avi(sur.mdp, kOracleTheta));
  const auto v = pe_exact(m, Policy::deterministic(actions, m.n_actions()));
  ValueLossReport rep;
  rep.bound = 4 * eps / ((1 - m.gamma()) * (1 - m.gamma()));
  double lowest = 0;
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    const double loss = qstar.max(x) - v[x];
    rep.observed = std::max(rep.observed, loss);
    lowest = std::min(lowest, loss);
  }
  rep.holds = rep.observed <= rep.bound + tol && lowest >= -tol;
  return rep;
}

enum class RegionCase { nonmdp, approx_q, approx_policy };

struct RegionExample {
  FiniteMDP mrp;  // one action; states are regions
  Homomorphism homo;
  std::vector<double> q;  // closed-form action values per region
  std::vector<std::string> regions;
};

// Joint observation-action chains with region-uniform dynamics. Rewards are
// r = (I - gamma M) Q so that the closed-form Q is the exact fixed point.
inline RegionExample make_region_example(RegionCase which, double gamma, double eps = 0.0, double eps_prime = 0.0) {
  if (!(gamma > 0 && gamma < 1)) throw BadGamma(gamma);
  if (eps < 0 || eps_prime < 0 || eps_prime > 0.5) throw PreconditionViolated("need eps >= 0 and eps' in [0, 1/2]");
  const double g = gamma;
  Matrix M;
  std::vector<double> q;
  std::vector<std::size_t> pairs;
  std::vector<std::string> names;
  switch (which) {
    case RegionCase::nonmdp: {
      M = {{0, 1, 0, 0, 0}, {0, 0, 1, 0, 0}, {0, 0, 0, 0.5, 0.5}, {1, 0, 0, 0, 0}, {0.5, 0, 0, 0.25, 0.25}};
      const double c = 2 / (1 - g * g * g);
      q = {c - 2, g * g * c, g * c, c, c};
      pairs = {0, 1, 2, 3, 3};
      names = {"R1", "R2", "R3", "R4a", "R4b"};
      break;
    }
    case RegionCase::approx_q: {
      M = {{0, 1, 0, 0, 0, 0},   {0, 0, 0.5, 0.5, 0, 0}, {0, 0, 0, 0, 0.5, 0.5},
           {0, 0, 0, 0, 0.5, 0.5}, {1, 0, 0, 0, 0, 0},     {0.5, 0, 0, 0, 0.25, 0.25}};
      const double c = (g * g * eps + 4) / (2 * (1 - g * g * g));
      q = {c - 2, g * eps / 2 + g * g * c, g * c, g * c + eps, c, c};
      pairs = {0, 1, 2, 2, 3, 3};
      names = {"R1", "R2", "R3a", "R3b", "R4a", "R4b"};
      break;
    }
    case RegionCase::approx_policy: {
      const double e = eps_prime;
      M = {{e, 0.5, 0.5 - e, 0, 0, 0, 0},   {0, 0, 0, 0.5, 0.5, 0, 0}, {0, 0, 0, 0.5, 0.5, 0, 0},
           {0, 0, 0, 0, 0, 0.5, 0.5},       {0, 0, 0, 0, 0, 0.5, 0.5}, {1, 0, 0, 0, 0, 0, 0},
           {0.5, 0, 0, 0, 0, 0.25, 0.25}};
      const double gg = (1 - e) / (1 - g * e);
      const double c = (4 + g * g * eps * gg) / (2 * (1 - g * g * g * gg));
      const double q2 = g * eps / 2 + g * g * c;
      q = {g * g * gg * (eps / 2 + g * c), q2, q2, g * c, g * c + eps, c, c};
      pairs = {0, 1, 1, 2, 2, 3, 3};
      names = {"R1", "R2a", "R2b", "R3a", "R3b", "R4a", "R4b"};
      break;
    }
  }
  const std::size_t n = M.size();
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0;
    for (std::size_t j = 0; j < n; ++j) acc += M[i][j] * q[j];
    r[i] = q[i] - g * acc;
  }
  RegionExample ex{make_mrp(M, r, g), {}, q, names};
  ex.homo.n_states = 4;
  ex.homo.n_abstract_actions = 1;
  ex.homo.state_map = pairs;
  ex.homo.action_map.assign(n, std::vector<std::size_t>(1, 0));
  return ex;
}

struct QUniformInstance {
  FiniteMDP mdp;
  Homomorphism homo;
  double eps;  // measured Q-uniformity gap
};

// Random abstract MDP lifted onto X micro states with A actions each, every
// micro action mapped onto an abstract one (all abstract actions covered),
// then perturbed; eps is the resulting gap.
inline QUniformInstance random_q_uniform_instance(std::size_t S, std::size_t Bn, std::size_t X, std::size_t A, double gamma,
                                                  double noise, Rng& rng) {
  if (X < S || A < Bn) throw PreconditionViolated("need X >= S and A >= B");
  auto abs = random_mdp(S, Bn, gamma, rng);
  Homomorphism h;
  h.n_states = S;
  h.n_abstract_actions = Bn;
  h.state_map.resize(X);
  h.action_map.assign(X, std::vector<std::size_t>(A));
  for (std::size_t x = 0; x < X; ++x) {
    h.state_map[x] = x < S ? x : rng.below(S);
    std::vector<std::size_t> perm(A);
    for (std::size_t a = 0; a < A; ++a) perm[a] = a < Bn ? a : rng.below(Bn);
    for (std::size_t a = A; a-- > 1;) std::swap(perm[a], perm[rng.below(a + 1)]);
    h.action_map[x] = perm;
  }
  std::vector<std::vector<std::size_t>> members(S);
  for (std::size_t x = 0; x < X; ++x) members[h.state_map[x]].push_back(x);
  std::vector<double> p(X * A * X, 0.0), r(X * A);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t a = 0; a < A; ++a) {
      const std::size_t s = h.state_map[x], b = h.action_map[x][a];
      r[x * A + a] = abs.r(s, b);
      double* row = p.data() + (x * A + a) * X;
      for (std::size_t t = 0; t < S; ++t) {
        auto split = random_distribution(members[t].size(), rng);
        for (std::size_t i = 0; i < members[t].size(); ++i) row[members[t][i]] += abs.p(s, b, t) * split[i];
      }
    }
  FiniteMDP m(X, A, std::move(p), std::move(r), gamma);
  if (noise > 0) m = perturb_mdp(m, noise, noise, rng);
  const double eps = check_q_homo(m, h, 0.0).worst_gap;
  return {std::move(m), std::move(h), eps};
}

}  // namespace grl
