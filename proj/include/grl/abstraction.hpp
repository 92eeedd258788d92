#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "env.hpp"
#include "errors.hpp"
#include "finite_mdp.hpp"
#include "planners.hpp"
#include "policy.hpp"

namespace grl {

// B(x | s a) over underlying states x of a tabular abstraction.
class Dispersion {
 public:
  Dispersion() = default;

  // weights[s][a] is a distribution over underlying states
  Dispersion(std::vector<std::vector<std::vector<double>>> weights) : w_(std::move(weights)) {}

  // B(x|s a) proportional to weight[a][x] inside the pre-image of s.
  static Dispersion from_action_weights(const Abstraction& psi, const Matrix& weight) {
    const std::size_t S = psi.n_states(), A = weight.size(), X = psi.labels().size();
    std::vector<std::vector<std::vector<double>>> w(S, std::vector<std::vector<double>>(A, std::vector<double>(X, 0.0)));
    for (std::size_t a = 0; a < A; ++a) {
      if (weight[a].size() != X) throw InvalidDispersion("weight vector has wrong length");
      std::vector<double> mass(S, 0.0);
      for (std::size_t x = 0; x < X; ++x) {
        if (!(weight[a][x] >= 0)) throw InvalidDispersion("negative dispersion weight");
        mass[psi.label(x)] += weight[a][x];
      }
      for (std::size_t x = 0; x < X; ++x) {
        const std::size_t s = psi.label(x);
        if (mass[s] <= 0) throw InvalidDispersion("abstract state " + std::to_string(s) + " has no weight under action " + std::to_string(a));
        w[s][a][x] = weight[a][x] / mass[s];
      }
    }
    return Dispersion(std::move(w));
  }

  static Dispersion from_state_weights(const Abstraction& psi, const std::vector<double>& weight, std::size_t n_actions) {
    return from_action_weights(psi, Matrix(n_actions, weight));
  }

  static Dispersion uniform(const Abstraction& psi, std::size_t n_actions) {
    return from_state_weights(psi, std::vector<double>(psi.labels().size(), 1.0), n_actions);
  }

  std::size_t n_states() const { return w_.size(); }
  std::size_t n_actions() const { return w_.empty() ? 0 : w_[0].size(); }
  double operator()(std::size_t s, std::size_t a, std::size_t x) const { return w_[s][a][x]; }
  const std::vector<double>& row(std::size_t s, std::size_t a) const { return w_[s][a]; }

  void validate(const Abstraction& psi, std::size_t n_actions) const {
    if (!psi.is_tabular()) throw InvalidDispersion("dispersion needs a tabular abstraction");
    const std::size_t X = psi.labels().size();
    if (w_.size() != psi.n_states()) throw InvalidDispersion("dispersion covers wrong number of states");
    for (std::size_t s = 0; s < w_.size(); ++s) {
      if (w_[s].size() != n_actions) throw InvalidDispersion("dispersion covers wrong number of actions");
      for (std::size_t a = 0; a < n_actions; ++a) {
        if (w_[s][a].size() != X) throw InvalidDispersion("dispersion row has wrong support size");
        double t = 0;
        for (std::size_t x = 0; x < X; ++x) {
          const double v = w_[s][a][x];
          if (!(v >= 0)) throw InvalidDispersion("negative dispersion weight");
          if (v > 0 && psi.label(x) != s)
            throw InvalidDispersion("B puts mass on state " + std::to_string(x) + " outside the pre-image of " + std::to_string(s));
          t += v;
        }
        if (std::abs(t - 1.0) > kRowTolerance)
          throw InvalidDispersion("B(.|" + std::to_string(s) + "," + std::to_string(a) + ") sums to " + std::to_string(t));
      }
    }
  }

 private:
  std::vector<std::vector<std::vector<double>>> w_;
};

enum class DispersionSource { explicit_weights, stationary_of_policy, empirical_frequency };

inline const char* to_string(DispersionSource d) {
  switch (d) {
    case DispersionSource::explicit_weights: return "explicit";
    case DispersionSource::stationary_of_policy: return "stationary-of-policy";
    case DispersionSource::empirical_frequency: return "empirical-frequency";
  }
  return "?";
}

struct Provenance {
  std::string abstraction_id;
  DispersionSource source = DispersionSource::explicit_weights;
};

struct SurrogateMDP {
  FiniteMDP mdp;
  Provenance provenance;
};

// Canonical id of a tabular map: labels renumbered by first appearance.
inline std::string abstraction_id(const Abstraction& psi) {
  if (!psi.is_tabular()) return "history-map/" + std::to_string(psi.n_states());
  std::map<std::size_t, std::size_t> seen;
  std::string id;
  for (auto l : psi.labels()) {
    auto it = seen.emplace(l, seen.size()).first;
    if (!id.empty()) id += '.';
    id += std::to_string(it->second);
  }
  return id;
}

struct StateReward {
  std::size_t state;
  double reward;
  double prob;
};

// mu_h(s' r' | s a): the percept law at (h, a) pushed through psi.
inline std::vector<StateReward> state_process_kernel(const HistoryEnv& env, const Abstraction& psi, const History& h,
                                                     std::size_t a) {
  std::vector<StateReward> out;
  for (const auto& o : env.distribution(h, a)) {
    const std::size_t s = psi(h.extend(a, o.percept));
    auto it = std::find_if(out.begin(), out.end(), [&](const StateReward& x) {
      return x.state == s && x.reward == o.percept.reward;
    });
    if (it == out.end())
      out.push_back({s, o.percept.reward, o.prob});
    else
      it->prob += o.prob;
  }
  return out;
}

inline SurrogateMDP build_surrogate(const FiniteMDP& m, const Abstraction& psi, const Dispersion& B,
                                    DispersionSource source = DispersionSource::explicit_weights) {
  if (!psi.is_tabular() || psi.labels().size() != m.n_states())
    throw InvalidDispersion("abstraction must label every underlying state");
  B.validate(psi, m.n_actions());
  const std::size_t S = psi.n_states(), A = m.n_actions(), X = m.n_states();
  std::vector<double> p(S * A * S, 0.0), r(S * A, 0.0);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) {
      double* prow = p.data() + (s * A + a) * S;
      for (std::size_t x = 0; x < X; ++x) {
        const double w = B(s, a, x);
        if (w == 0) continue;
        r[s * A + a] += w * m.r(x, a);
        const double* row = m.row(x, a);
        for (std::size_t y = 0; y < X; ++y) prow[psi.label(y)] += w * row[y];
      }
    }
  return {FiniteMDP(S, A, std::move(p), std::move(r), m.gamma()), {abstraction_id(psi), source}};
}

struct Witness {
  std::size_t x = 0, y = 0, action = 0;
};

struct UniformityReport {
  bool holds = true;
  double worst_gap = 0;            // Q* gap, value gap or kernel gap depending on the check
  double worst_secondary = 0;      // reward gap (eps-MDP); unused otherwise
  std::optional<Witness> witness;  // first pair attaining the worst violation
};

namespace detail {

template <class F>
void for_each_aggregated_pair(const Abstraction& psi, F&& f) {
  const auto& l = psi.labels();
  for (std::size_t x = 0; x < l.size(); ++x)
    for (std::size_t y = x + 1; y < l.size(); ++y)
      if (l[x] == l[y]) f(x, y);
}

inline void check_tabular(const FiniteMDP& m, const Abstraction& psi) {
  if (!psi.is_tabular() || psi.labels().size() != m.n_states())
    throw PreconditionViolated("abstraction must be tabular over the MDP's states");
}

}  // namespace detail

inline UniformityReport check_qdp(const FiniteMDP& m, const Abstraction& psi, double eps, const QTable& qstar) {
  detail::check_tabular(m, psi);
  UniformityReport rep;
  detail::for_each_aggregated_pair(psi, [&](std::size_t x, std::size_t y) {
    for (std::size_t a = 0; a < m.n_actions(); ++a) {
      const double g = std::abs(qstar(x, a) - qstar(y, a));
      if (g > rep.worst_gap) {
        rep.worst_gap = g;
        if (g > eps) rep.witness = Witness{x, y, a};
      }
    }
  });
  rep.holds = rep.worst_gap <= eps;
  return rep;
}

inline UniformityReport check_qdp(const FiniteMDP& m, const Abstraction& psi, double eps) {
  return check_qdp(m, psi, eps, avi(m, kOracleTheta));
}

// eps-optimal action set {a : V* - Q*(a) <= eps}
inline std::vector<std::size_t> eps_optimal_actions(const QTable& q, std::size_t s, double eps) {
  return q.near_greedy(s, eps + 1e-9);
}

inline UniformityReport check_vpdp(const FiniteMDP& m, const Abstraction& psi, double eps1, double eps2,
                                   const QTable& qstar) {
  detail::check_tabular(m, psi);
  UniformityReport rep;
  bool sets_equal = true;
  detail::for_each_aggregated_pair(psi, [&](std::size_t x, std::size_t y) {
    const double g = std::abs(qstar.max(x) - qstar.max(y));
    const bool same = eps_optimal_actions(qstar, x, eps2) == eps_optimal_actions(qstar, y, eps2);
    if (g > rep.worst_gap) rep.worst_gap = g;
    if ((g > eps1 || !same) && !rep.witness) rep.witness = Witness{x, y, 0};
    sets_equal = sets_equal && same;
  });
  rep.holds = sets_equal && rep.worst_gap <= eps1;
  return rep;
}

inline UniformityReport check_vpdp(const FiniteMDP& m, const Abstraction& psi, double eps1, double eps2) {
  return check_vpdp(m, psi, eps1, eps2, avi(m, kOracleTheta));
}

// Pairwise: sum_s' |mu_psi(s'|x a) - mu_psi(s'|y a)| <= eps1 and
// |r(x a) - r(y a)| <= eps2. worst_gap reports the kernel L1 gap.
inline UniformityReport check_eps_mdp(const FiniteMDP& m, const Abstraction& psi, double eps1, double eps2) {
  detail::check_tabular(m, psi);
  const std::size_t S = psi.n_states();
  auto pushed = [&](std::size_t x, std::size_t a) {
    std::vector<double> d(S, 0.0);
    const double* row = m.row(x, a);
    for (std::size_t y = 0; y < m.n_states(); ++y) d[psi.label(y)] += row[y];
    return d;
  };
  UniformityReport rep;
  detail::for_each_aggregated_pair(psi, [&](std::size_t x, std::size_t y) {
    for (std::size_t a = 0; a < m.n_actions(); ++a) {
      const auto dx = pushed(x, a), dy = pushed(y, a);
      double l1 = 0;
      for (std::size_t s = 0; s < S; ++s) l1 += std::abs(dx[s] - dy[s]);
      const double rg = std::abs(m.r(x, a) - m.r(y, a));
      rep.worst_gap = std::max(rep.worst_gap, l1);
      rep.worst_secondary = std::max(rep.worst_secondary, rg);
      if ((l1 > eps1 || rg > eps2) && !rep.witness) rep.witness = Witness{x, y, a};
    }
  });
  rep.holds = rep.worst_gap <= eps1 && rep.worst_secondary <= eps2;
  return rep;
}

// ceil(q/eps) with edge values pushed into the lower bin
inline long long qdp_bin(double q, double eps) { return static_cast<long long>(std::ceil(q / eps - 1e-12)); }

// States labeled by the per-action bin vector of Q*, numbered by first appearance.
inline Abstraction extreme_qdp_map(const FiniteMDP& m, double eps, const QTable& qstar) {
  if (!(eps > 0)) throw PreconditionViolated("eps must be positive");
  std::map<std::vector<long long>, std::size_t> ids;
  std::vector<std::size_t> labels(m.n_states());
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    std::vector<long long> key(m.n_actions());
    for (std::size_t a = 0; a < m.n_actions(); ++a) key[a] = qdp_bin(qstar(x, a), eps);
    labels[x] = ids.emplace(std::move(key), ids.size()).first->second;
  }
  return Abstraction::tabular(std::move(labels), ids.size());
}

inline Abstraction extreme_qdp_map(const FiniteMDP& m, double eps) { return extreme_qdp_map(m, eps, avi(m, kOracleTheta)); }

// (3 / (eps (1-gamma)^3))^A
inline double extreme_qdp_bound(double eps, double gamma, std::size_t n_actions) {
  return std::pow(3.0 / (eps * std::pow(1.0 - gamma, 3)), static_cast<double>(n_actions));
}

enum class WeightsMode {
  frequency,       // every visit counts
  second_half      // only visits in the second half of the run
};

struct EmpiricalSurrogate {
  SurrogateMDP surrogate;
  std::vector<std::pair<std::size_t, std::size_t>> unvisited;  // rows filled with a self-loop
  std::vector<std::uint64_t> visits;                            // per (s,a)
  bool complete() const { return unvisited.empty(); }
};

inline std::optional<std::size_t> joint_memory(std::optional<std::size_t> a, std::optional<std::size_t> b) {
  if (!a || !b) return std::nullopt;
  return std::max(*a, *b);
}

// Frequency estimate of the state process along one simulated history.
inline EmpiricalSurrogate empirical_surrogate(const HistoryEnv& env, const Abstraction& psi, const Policy& behavior,
                                              std::size_t steps, std::uint64_t seed,
                                              WeightsMode mode = WeightsMode::frequency) {
  if (steps < 1) throw PreconditionViolated("steps must be >= 1");
  const std::size_t S = psi.n_states(), A = env.n_actions();
  std::vector<double> counts(S * A * S, 0.0), rsum(S * A, 0.0);
  std::vector<std::uint64_t> visits(S * A, 0);
  auto memory = joint_memory(env.memory(), psi.memory());
  if (!behavior.is_tabular()) memory.reset();
  Rng rng(seed);
  History h = env.initial_history();
  std::size_t s = psi(h);
  std::vector<Outcome> scratch;
  const std::size_t first = mode == WeightsMode::second_half ? steps / 2 : 0;
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t a = rng.categorical(behavior(h));
    const Percept e = env.sample(h, a, rng, scratch);
    h = h.extend(a, e);
    const std::size_t s2 = psi(h);
    if (n >= first) {
      counts[(s * A + a) * S + s2] += 1;
      rsum[s * A + a] += e.reward;
      ++visits[s * A + a];
    }
    s = s2;
    if (memory && h.retained() > 2 * *memory + 64) h = h.trimmed(*memory);
  }
  EmpiricalSurrogate out;
  std::vector<double> p(S * A * S, 0.0), r(S * A, 0.0);
  for (std::size_t i = 0; i < S; ++i)
    for (std::size_t a = 0; a < A; ++a) {
      const auto k = i * A + a;
      if (visits[k] == 0) {
        p[k * S + i] = 1.0;
        out.unvisited.emplace_back(i, a);
        continue;
      }
      for (std::size_t j = 0; j < S; ++j) p[k * S + j] = counts[k * S + j] / static_cast<double>(visits[k]);
      r[k] = rsum[k] / static_cast<double>(visits[k]);
    }
  FiniteMDP mdp(S, A, std::move(p), std::move(r), env.gamma());
  out.surrogate = {std::move(mdp), {abstraction_id(psi), DispersionSource::empirical_frequency}};
  out.visits = std::move(visits);
  return out;
}

}  // namespace grl
