#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "abstraction.hpp"
#include "planners.hpp"
#include "random_mdp.hpp"

namespace grl {

// Tabular map relabelled by first appearance, so every state is used.
inline Abstraction canonical(const Abstraction& psi) {
  if (!psi.is_tabular()) throw PreconditionViolated("map algebra needs tabular maps");
  std::map<std::size_t, std::size_t> seen;
  std::vector<std::size_t> out;
  out.reserve(psi.labels().size());
  for (auto l : psi.labels()) out.push_back(seen.emplace(l, seen.size()).first->second);
  return Abstraction::tabular(std::move(out), seen.size());
}

struct ProductMap {
  Abstraction map;
  std::vector<std::size_t> chi, chi2;  // projections onto the factors
};

// x -> (psi(x), psi2(x)), pair states numbered by first appearance.
inline ProductMap product_map(const Abstraction& psi, const Abstraction& psi2) {
  if (!psi.is_tabular() || !psi2.is_tabular()) throw PreconditionViolated("map algebra needs tabular maps");
  if (psi.labels().size() != psi2.labels().size()) throw ShapeMismatch("maps have different domains");
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  ProductMap pm;
  std::vector<std::size_t> labels;
  for (std::size_t x = 0; x < psi.labels().size(); ++x) {
    const std::pair key{psi.label(x), psi2.label(x)};
    auto [it, fresh] = seen.emplace(key, seen.size());
    if (fresh) {
      pm.chi.push_back(key.first);
      pm.chi2.push_back(key.second);
    }
    labels.push_back(it->second);
  }
  pm.map = Abstraction::tabular(std::move(labels), seen.size());
  return pm;
}

// Coarsening chi with coarse = chi(fine) when fine refines coarse.
inline std::optional<std::vector<std::size_t>> is_refinement(const Abstraction& fine, const Abstraction& coarse) {
  if (!fine.is_tabular() || !coarse.is_tabular()) throw PreconditionViolated("map algebra needs tabular maps");
  if (fine.labels().size() != coarse.labels().size()) throw ShapeMismatch("maps have different domains");
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  std::vector<std::size_t> chi(fine.n_states(), unset);
  for (std::size_t x = 0; x < fine.labels().size(); ++x) {
    auto& c = chi[fine.label(x)];
    if (c == unset) c = coarse.label(x);
    else if (c != coarse.label(x)) return std::nullopt;
  }
  for (auto& c : chi)
    if (c == unset) c = 0;
  return chi;
}

// max_x,a |q(psi(x),a) - q2(psi2(x),a)|, the product-space gap.
inline double q_gap(const Abstraction& psi, const QTable& q, const Abstraction& psi2, const QTable& q2) {
  if (q.n_actions != q2.n_actions) throw ShapeMismatch("q tables disagree on actions");
  double g = 0;
  for (std::size_t x = 0; x < psi.labels().size(); ++x)
    for (std::size_t a = 0; a < q.n_actions; ++a) g = std::max(g, std::abs(q(psi.label(x), a) - q2(psi2.label(x), a)));
  return g;
}

// Sequential eps-cover of maps. Labels are stable: a map keeps the label it
// got first, whatever is stored later.
class PartitionLabels {
 public:
  explicit PartitionLabels(double eps = 0.0) : eps_(eps) {}

  double eps() const { return eps_; }
  std::size_t n_labels() const { return parts_.size(); }
  std::size_t ambiguous() const { return ambiguous_; }

  std::optional<std::size_t> find(const Abstraction& psi) const {
    auto it = known_.find(abstraction_id(psi));
    if (it == known_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t label(const Abstraction& psi, const QTable& q_hat) {
    const auto id = abstraction_id(psi);
    if (auto it = known_.find(id); it != known_.end()) return it->second;
    std::optional<std::size_t> chosen;
    std::size_t matches = 0;
    for (std::size_t l = 0; l < parts_.size(); ++l) {
      bool all = true;
      for (const auto& m : parts_[l]) all = all && q_gap(psi, q_hat, m.psi, m.q) <= eps_;
      if (all) {
        ++matches;
        if (!chosen) chosen = l;
      }
    }
    // a map eps-similar to several partitions is where similarity fails to be transitive
    if (matches > 1) ++ambiguous_;
    if (!chosen) {
      chosen = parts_.size();
      parts_.emplace_back();
    }
    parts_[*chosen].push_back({psi, q_hat});
    known_.emplace(id, *chosen);
    return *chosen;
  }

 private:
  struct Member {
    Abstraction psi;
    QTable q;
  };
  double eps_;
  std::map<std::string, std::size_t> known_;
  std::vector<std::vector<Member>> parts_;
  std::size_t ambiguous_ = 0;
};

// Dispersion convention for every map: stationary law of the uniform policy.
inline QTable exact_map_q(const FiniteMDP& m, const Abstraction& psi) {
  const auto rho = stationary_distribution_exact(policy_matrix(m, Policy::uniform(m.n_states(), m.n_actions())));
  const auto B = Dispersion::from_state_weights(psi, rho, m.n_actions());
  return avi(build_surrogate(m, psi, B, DispersionSource::stationary_of_policy).mdp, 1e-12);
}

// Indexed class of maps over one finite MDP with cached Q tables and a
// persistent label store.
class MapClass {
 public:
  using Estimator = std::function<QTable(const FiniteMDP&, const Abstraction&)>;

  MapClass(FiniteMDP m, std::vector<Abstraction> maps, double eps, Estimator estimate = exact_map_q)
      : mdp_(std::move(m)), store_(eps), estimate_(std::move(estimate)) {
    if (maps.empty()) throw PreconditionViolated("empty map class");
    for (auto& psi : maps) {
      if (!psi.is_tabular() || psi.labels().size() != mdp_.n_states())
        throw ShapeMismatch("class maps must label every underlying state");
      maps_.push_back(canonical(psi));
    }
  }

  const FiniteMDP& mdp() const { return mdp_; }
  std::size_t size() const { return maps_.size(); }
  const Abstraction& operator[](std::size_t i) const { return maps_.at(i); }
  double eps() const { return store_.eps(); }
  PartitionLabels& store() { return store_; }
  std::size_t q_evaluations() const { return cache_.size(); }

  const QTable& q(const Abstraction& psi) {
    const auto id = abstraction_id(psi);
    auto it = cache_.find(id);
    if (it == cache_.end()) it = cache_.emplace(id, estimate_(mdp_, canonical(psi))).first;
    return it->second;
  }

  std::size_t label(const Abstraction& psi) { return store_.label(canonical(psi), q(psi)); }

 private:
  FiniteMDP mdp_;
  std::vector<Abstraction> maps_;
  PartitionLabels store_;
  Estimator estimate_;
  std::map<std::string, QTable> cache_;
};

inline std::size_t partition_label(MapClass& cls, const Abstraction& psi, const QTable& q_hat, double eps) {
  if (eps != cls.eps()) throw PreconditionViolated("label store was built for a different eps");
  return cls.store().label(canonical(psi), q_hat);
}

struct OrderDecision {
  bool preferred = false;
  int case_fired = 0;  // 0 when no case applies
};

// psi <=_eps psi2, labels assigned in the order psi, psi2, psi x psi2.
inline OrderDecision compare_eps(const Abstraction& psi, const Abstraction& psi2, MapClass& cls) {
  const auto phi = product_map(psi, psi2).map;
  const auto l1 = cls.label(psi), l2 = cls.label(psi2), lp = cls.label(phi);
  const auto s1 = canonical(psi).n_states(), s2 = canonical(psi2).n_states();
  if (l1 == l2) return {s1 <= s2, s1 <= s2 ? 1 : 0};
  if (l1 == lp) return {true, 2};
  if (lp != l2 && s1 <= s2) return {true, 3};
  return {};
}

inline bool order_eps(const Abstraction& psi, const Abstraction& psi2, MapClass& cls, double eps) {
  if (eps != cls.eps()) throw PreconditionViolated("label store was built for a different eps");
  return compare_eps(psi, psi2, cls).preferred;
}

// (d_psi(psi2), d_psi2(psi)): distance of each factor's Q from the product's Q.
inline std::pair<double, double> cart_distance(const Abstraction& psi, const Abstraction& psi2, MapClass& cls) {
  const auto pm = product_map(psi, psi2);
  const QTable& qp = cls.q(pm.map);
  const QTable& q1 = cls.q(psi);
  const QTable& q2 = cls.q(psi2);
  const auto c1 = canonical(psi), c2 = canonical(psi2);
  double d1 = 0, d2 = 0;
  // product states are numbered by first appearance, so each one has a witness x
  std::vector<bool> done(pm.map.n_states(), false);
  for (std::size_t x = 0; x < c1.labels().size(); ++x) {
    const std::size_t s = pm.map.label(x);
    if (done[s]) continue;
    done[s] = true;
    for (std::size_t a = 0; a < qp.n_actions; ++a) {
      d1 = std::max(d1, std::abs(q1(c1.label(x), a) - qp(s, a)));
      d2 = std::max(d2, std::abs(q2(c2.label(x), a) - qp(s, a)));
    }
  }
  return {d1, d2};
}

inline OrderDecision compare_cpd(const Abstraction& psi, const Abstraction& psi2, MapClass& cls) {
  const auto l1 = cls.label(psi), l2 = cls.label(psi2);
  const auto s1 = canonical(psi).n_states(), s2 = canonical(psi2).n_states();
  if (l1 == l2) return {s1 <= s2, s1 <= s2 ? 1 : 0};
  const auto [d1, d2] = cart_distance(psi, psi2, cls);
  if (d1 <= d2) return {true, 2};
  return {};
}

inline bool order_cpd(const Abstraction& psi, const Abstraction& psi2, MapClass& cls, double eps) {
  if (eps != cls.eps()) throw PreconditionViolated("label store was built for a different eps");
  return compare_cpd(psi, psi2, cls).preferred;
}

enum class OrderKind { eps, cpd };

struct AleoStep {
  std::size_t iteration = 0, candidate = 0, competitor = 0;
  bool replaced = false;
  int case_fired = 0;
};

struct AleoResult {
  std::size_t chosen = 0;
  Abstraction map;
  std::vector<AleoStep> trace;
  std::size_t resets = 0;
  bool stable = false;  // candidate beat every other map since it last changed
};

// Candidate/competitor loop with a rejected set. Competitors are taken
// round-robin by class index; stops when the candidate has beaten all other
// maps since it was last replaced, or after `budget` comparisons.
inline AleoResult aleo(MapClass& cls, OrderKind order, double eps, std::size_t budget, std::size_t start = 0) {
  if (eps != cls.eps()) throw PreconditionViolated("label store was built for a different eps");
  const std::size_t n = cls.size();
  if (start >= n) throw PreconditionViolated("start index out of range");
  AleoResult res;
  std::size_t cand = start, cursor = start;
  std::vector<bool> rejected(n, false), beaten(n, false);
  std::size_t n_beaten = 0;
  auto stable = [&] { return n_beaten + 1 >= n; };
  while (!stable() && res.trace.size() < budget) {
    std::size_t comp = n;
    for (std::size_t k = 1; k <= n; ++k) {
      const std::size_t i = (cursor + k) % n;
      if (i != cand && !rejected[i]) {
        comp = i;
        break;
      }
    }
    if (comp == n) {
      std::fill(rejected.begin(), rejected.end(), false);
      ++res.resets;
      continue;
    }
    cursor = comp;
    const auto d = order == OrderKind::eps ? compare_eps(cls[comp], cls[cand], cls) : compare_cpd(cls[comp], cls[cand], cls);
    res.trace.push_back({res.trace.size() + 1, cand, comp, d.preferred, d.case_fired});
    if (d.preferred) {
      rejected[cand] = true;
      cand = comp;
      std::fill(beaten.begin(), beaten.end(), false);
      n_beaten = 0;
    } else {
      rejected[comp] = true;
      if (!beaten[comp]) {
        beaten[comp] = true;
        ++n_beaten;
      }
    }
    bool others_left = false;
    for (std::size_t i = 0; i < n; ++i) others_left = others_left || (i != cand && !rejected[i]);
    if (!others_left && !stable()) {
      std::fill(rejected.begin(), rejected.end(), false);
      ++res.resets;
    }
  }
  res.chosen = cand;
  res.map = cls[cand];
  res.stable = stable();
  return res;
}

// T(eps) = ceil(log(eps (1-gamma)) / log gamma), at least 1.
inline std::size_t eps_horizon(double gamma, double eps) {
  if (!(gamma > 0 && gamma < 1)) throw BadGamma(gamma);
  if (!(eps > 0)) throw PreconditionViolated("eps must be positive");
  const double t = std::ceil(std::log(eps * (1 - gamma)) / std::log(gamma));
  return t < 1 ? 1 : static_cast<std::size_t>(t);
}

// (1/n) sum_m (q_hat(psi(h_1:m), a_m) - G_m)^2 over m = 1..n, n = |h| - T(eps),
// where G_m discounts the rewards that follow a_m.
inline double mse_score(const QTable& q_hat, const Abstraction& psi, const History& h, double gamma, double eps) {
  const std::size_t T = eps_horizon(gamma, eps);
  const std::size_t len = h.size();
  if (len <= T) throw HistoryTooShort(len, T + 1);
  if (!h.complete()) throw PreconditionViolated("score needs the full history");
  const auto percepts = h.percepts();
  const auto actions = h.actions();
  const std::size_t n = len - T;
  // returns from the back: G[m] = r[m+1] + gamma G[m+1] (0-based percept indices)
  std::vector<double> G(len, 0.0);
  for (std::size_t m = len - 1; m-- > 0;) G[m] = percepts[m + 1].reward + gamma * G[m + 1];
  double total = 0;
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t s = psi.is_tabular() ? psi.label(percepts[m].observation) : psi(h.prefix(m + 1));
    const double e = q_hat(s, actions[m]) - G[m];
    total += e * e;
  }
  return total / static_cast<double>(n);
}

struct MapFixture {
  FiniteMDP mdp;
  std::vector<Abstraction> maps;
  std::vector<std::string> names;
};

// Lift of a random 3-state abstract MDP onto 9 states. The class holds the
// exact aggregation, three refinements of it and two lossy maps.
inline MapFixture qdp_fixture(std::uint64_t seed) {
  const std::vector<std::size_t> star = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  Rng rng(seed);
  const auto abs = random_mdp(3, 2, 0.9, rng);
  MapFixture f;
  f.mdp = lift_mdp(abs, star, rng);
  f.maps = {Abstraction::tabular(star),
            Abstraction::identity(9),
            Abstraction::tabular({0, 1, 1, 2, 2, 2, 3, 3, 3}),
            Abstraction::tabular({0, 0, 0, 1, 1, 2, 3, 3, 3}),
            Abstraction::tabular({0, 0, 0, 0, 0, 0, 1, 1, 1}),
            Abstraction::tabular({0, 1, 0, 1, 0, 1, 0, 1, 0})};
  f.names = {"star", "refine1", "refine2", "refine3", "lossy1", "lossy2"};
  return f;
}

}  // namespace grl
