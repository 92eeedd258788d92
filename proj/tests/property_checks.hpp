#pragma once

// Randomized property suites, shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "grl/abstraction.hpp"
#include "grl/ordering.hpp"
#include "grl/planners.hpp"
#include "grl/random_mdp.hpp"
#include "grl/sequentialize.hpp"

namespace props {

using namespace grl;

struct Outcome {
  std::string name;
  std::size_t cases = 0, failures = 0;
  std::string first_failure;

  explicit Outcome(std::string n) : name(std::move(n)) {}

  void fail(std::size_t i, const std::string& what) {
    if (failures++ == 0) first_failure = "case " + std::to_string(i) + ": " + what;
  }
  bool ok() const { return failures == 0; }
};

inline double sup_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// random labels onto [0, S) using every label at least once
inline std::vector<std::size_t> random_labels(std::size_t X, std::size_t S, Rng& rng) {
  std::vector<std::size_t> l(X);
  for (std::size_t x = 0; x < X; ++x) l[x] = x < S ? x : rng.below(S);
  for (std::size_t x = X; x-- > 1;) std::swap(l[x], l[rng.below(x + 1)]);
  return l;
}

inline Outcome surrogate_rows_stochastic(std::size_t n) {
  Outcome o{"surrogate row-stochasticity"};
  Rng root(101);
  for (std::size_t i = 0; i < n; ++i, ++o.cases) {
    Rng rng = root.split(i);
    const std::size_t X = 2 + rng.below(7), A = 1 + rng.below(3), S = 1 + rng.below(X);
    const auto m = random_mdp(X, A, rng.uniform(0.0, 0.99), rng, rng.below(X + 1), -2, 3);
    const auto psi = Abstraction::tabular(random_labels(X, S, rng), S);
    Matrix w(A, std::vector<double>(X));
    for (auto& row : w)
      for (auto& v : row) v = rng.uniform() < 0.3 ? 0.0 : rng.uniform();
    // a pre-image with no weight at all gets uniform weight
    for (std::size_t a = 0; a < A; ++a) {
      std::vector<double> mass(S, 0.0);
      for (std::size_t x = 0; x < X; ++x) mass[psi.label(x)] += w[a][x];
      for (std::size_t x = 0; x < X; ++x)
        if (mass[psi.label(x)] == 0) w[a][x] = mass[psi.label(x)] = 1.0;
    }
    const auto sur = build_surrogate(m, psi, Dispersion::from_action_weights(psi, w));
    const auto [lo, hi] = std::minmax_element(m.reward_data().begin(), m.reward_data().end());
    if (sur.mdp.n_states() != S) o.fail(i, "wrong state count");
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        double t = 0;
        bool negative = false;
        for (std::size_t u = 0; u < S; ++u) {
          negative = negative || sur.mdp.p(s, a, u) < 0;
          t += sur.mdp.p(s, a, u);
        }
        if (negative || std::abs(t - 1.0) > 1e-12) o.fail(i, "row sums to " + std::to_string(t));
        if (sur.mdp.r(s, a) < *lo - 1e-12 || sur.mdp.r(s, a) > *hi + 1e-12) o.fail(i, "reward outside the underlying range");
      }
  }
  return o;
}

inline Outcome codec_round_trips(std::size_t n) {
  Outcome o{"codec round-trips"};
  Rng rng(202);
  for (std::size_t i = 0; i < n; ++i, ++o.cases) {
    const std::size_t na = 1 + rng.below(300), base = 2 + rng.below(6);
    const ActionCodec c(na, base);
    std::size_t cap = 1;
    for (std::size_t k = 0; k < c.depth(); ++k) cap *= base;
    if (c.n_codes() != cap || c.n_codes() < na) o.fail(i, "code count");
    if (c.depth() > 1 && c.n_codes() / base >= na) o.fail(i, "depth not minimal");
    for (std::size_t a = 0; a < na; ++a) {
      const auto w = c.encode(a);
      if (w.size() != c.depth() || c.decode(w) != a || c.index(w) != a) o.fail(i, "action " + std::to_string(a));
    }
    for (std::size_t k = na; k < c.n_codes(); ++k)
      if (c.decode(c.code(k)) >= na) o.fail(i, "padded code decodes out of range");
  }
  return o;
}

inline Outcome vi_contracts(std::size_t n) {
  Outcome o{"value iteration contraction"};
  Rng root(303);
  for (std::size_t i = 0; i < n; ++i, ++o.cases) {
    Rng rng = root.split(i);
    const std::size_t X = 1 + rng.below(10), A = 1 + rng.below(4);
    const double g = rng.uniform(0.0, 0.95);
    const auto m = random_mdp(X, A, g, rng, rng.below(X + 1), -1, 1);
    const auto vstar = pe_exact(m, Policy::deterministic(pi(m, 1e-12).q.greedy_policy(), A)).values;
    std::vector<std::vector<double>> it;
    vi(m, PlannerOptions{1e-10}, [&](const std::vector<double>& v) { it.push_back(v); });
    if (it.size() < 2) o.fail(i, "no iterates");
    for (std::size_t k = 1; k < it.size(); ++k) {
      if (sup_dist(it[k], vstar) > g * sup_dist(it[k - 1], vstar) + 1e-12) o.fail(i, "distance to V* at iterate " + std::to_string(k));
      if (k >= 2 && sup_dist(it[k], it[k - 1]) > g * sup_dist(it[k - 1], it[k - 2]) + 1e-12)
        o.fail(i, "step size at iterate " + std::to_string(k));
    }
  }
  return o;
}

inline Outcome stationary_fixed_point(std::size_t n) {
  Outcome o{"stationary fixed point"};
  Rng root(404);
  for (std::size_t i = 0; i < n; ++i, ++o.cases) {
    Rng rng = root.split(i);
    const std::size_t ns = 1 + rng.below(12);
    Matrix P(ns);
    for (auto& row : P) row = random_distribution(ns, rng, 1 + rng.below(ns));
    // a shared target state keeps a single recurrent class
    const std::size_t hub = rng.below(ns);
    for (auto& row : P) {
      for (auto& v : row) v *= 0.9;
      row[hub] += 0.1;
    }
    const auto rho = stationary_distribution(P);
    if (std::abs(std::accumulate(rho.begin(), rho.end(), 0.0) - 1.0) > 1e-12) o.fail(i, "mass");
    std::vector<double> next(ns, 0.0);
    for (std::size_t s = 0; s < ns; ++s) {
      if (rho[s] < 0) o.fail(i, "negative mass");
      for (std::size_t t = 0; t < ns; ++t) next[t] += rho[s] * P[s][t];
    }
    if (sup_dist(next, rho) > 1e-9) o.fail(i, "rho P != rho");
    if (sup_dist(stationary_distribution_exact(P), rho) > 1e-9) o.fail(i, "power iteration and linear solve disagree");
  }
  return o;
}

inline Outcome labels_idempotent(std::size_t n) {
  Outcome o{"partition-label idempotence"};
  Rng root(505);
  for (std::size_t i = 0; i < n; ++i, ++o.cases) {
    Rng rng = root.split(i);
    PartitionLabels store(rng.uniform(0.0, 0.5));
    const std::size_t X = 2 + rng.below(5), A = 1 + rng.below(2), n_maps = 1 + rng.below(6);
    std::vector<Abstraction> maps;
    std::vector<QTable> qs;
    std::vector<std::size_t> first;
    for (std::size_t k = 0; k < n_maps; ++k) {
      const std::size_t S = 1 + rng.below(X);
      maps.push_back(Abstraction::tabular(random_labels(X, S, rng), S));
      QTable q(S, A);
      for (auto& v : q.values) v = rng.uniform(0.0, 1.0);
      qs.push_back(q);
      first.push_back(store.label(maps[k], qs[k]));
      if (first[k] >= store.n_labels()) o.fail(i, "label out of range");
    }
    const std::size_t labels = store.n_labels();
    // relabelling in any order, even with a different estimate, returns the first label
    for (std::size_t k = n_maps; k-- > 0;) {
      QTable other = qs[k];
      for (auto& v : other.values) v += 10.0;
      if (store.label(maps[k], qs[k]) != first[k] || store.label(maps[k], other) != first[k] ||
          store.label(canonical(maps[k]), qs[k]) != first[k] || store.find(maps[k]) != first[k])
        o.fail(i, "map " + std::to_string(k) + " changed label");
    }
    if (store.n_labels() != labels) o.fail(i, "relabelling created labels");
  }
  return o;
}

inline std::vector<Outcome> all(std::size_t n) {
  return {surrogate_rows_stochastic(n), codec_round_trips(n), vi_contracts(n), stationary_fixed_point(n), labels_idempotent(n)};
}

}  // namespace props
