#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <vector>

#include "finite_mdp.hpp"
#include "rng.hpp"

namespace grl {

// Random distribution over n outcomes supported on `branch` of them
// (branch = 0 or >= n gives full support).
inline std::vector<double> random_distribution(std::size_t n, Rng& rng, std::size_t branch = 0) {
  std::vector<double> d(n, 0.0);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t k = (branch == 0 || branch > n) ? n : branch;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  double total = 0;
  for (std::size_t i = 0; i < k; ++i) {
    d[idx[i]] = rng.uniform() + 1e-3;
    total += d[idx[i]];
  }
  for (auto& v : d) v /= total;
  return d;
}

inline FiniteMDP random_mdp(std::size_t ns, std::size_t na, double gamma, Rng& rng, std::size_t branch = 0,
                            double r_lo = 0.0, double r_hi = 1.0) {
  std::vector<double> p, r;
  p.reserve(ns * na * ns);
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a) {
      auto d = random_distribution(ns, rng, branch);
      p.insert(p.end(), d.begin(), d.end());
      r.push_back(rng.uniform(r_lo, r_hi));
    }
  return FiniteMDP(ns, na, std::move(p), std::move(r), gamma);
}

}  // namespace grl

namespace grl {

// Lift an abstract MDP onto micro states labeled by `labels`: every micro
// state copies its block's rewards and splits each abstract successor's
// mass over that block's members at random. The result aggregates exactly
// (Q* is constant on blocks).
inline FiniteMDP lift_mdp(const FiniteMDP& abs, const std::vector<std::size_t>& labels, Rng& rng) {
  const std::size_t X = labels.size(), A = abs.n_actions(), S = abs.n_states();
  std::vector<std::vector<std::size_t>> members(S);
  for (std::size_t x = 0; x < X; ++x) members.at(labels[x]).push_back(x);
  std::vector<double> p(X * A * X, 0.0), r(X * A);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t a = 0; a < A; ++a) {
      r[x * A + a] = abs.r(labels[x], a);
      double* row = p.data() + (x * A + a) * X;
      for (std::size_t t = 0; t < S; ++t) {
        const double mass = abs.p(labels[x], a, t);
        if (mass == 0) continue;
        auto split = random_distribution(members[t].size(), rng);
        for (std::size_t i = 0; i < members[t].size(); ++i) row[members[t][i]] += mass * split[i];
      }
    }
  return FiniteMDP(X, A, std::move(p), std::move(r), abs.gamma());
}

// Mix every transition row with a random distribution (weight eta) and
// jitter rewards by up to +-reward_noise.
inline FiniteMDP perturb_mdp(const FiniteMDP& m, double eta, double reward_noise, Rng& rng) {
  const std::size_t X = m.n_states(), A = m.n_actions();
  std::vector<double> p = m.transition_data(), r = m.reward_data();
  for (std::size_t k = 0; k < X * A; ++k) {
    auto d = random_distribution(X, rng);
    for (std::size_t y = 0; y < X; ++y) p[k * X + y] = (1 - eta) * p[k * X + y] + eta * d[y];
    r[k] += rng.uniform(-reward_noise, reward_noise);
  }
  return FiniteMDP(X, A, std::move(p), std::move(r), m.gamma());
}

}  // namespace grl
