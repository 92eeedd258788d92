#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace grl {

using Matrix = std::vector<std::vector<double>>;
using Tensor3 = std::vector<Matrix>;

inline constexpr double kRowTolerance = 1e-9;

// Dense finite MDP: transition(s,a,s'), reward(s,a), discount.
class FiniteMDP {
 public:
  FiniteMDP() = default;

  FiniteMDP(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
            std::vector<double> reward, double gamma)
      : ns_(n_states), na_(n_actions), p_(std::move(transition)), r_(std::move(reward)), gamma_(gamma) {
    if (ns_ == 0 || na_ == 0) throw ShapeMismatch("an MDP needs at least one state and one action");
    if (p_.size() != ns_ * na_ * ns_) throw ShapeMismatch("transition table has wrong size");
    if (r_.size() != ns_ * na_) throw ShapeMismatch("reward table has wrong size");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw BadGamma(gamma_);
    for (std::size_t s = 0; s < ns_; ++s)
      for (std::size_t a = 0; a < na_; ++a) {
        double total = 0;
        for (std::size_t t = 0; t < ns_; ++t) {
          double v = p(s, a, t);
          if (!(v >= 0.0 && v <= 1.0 + kRowTolerance)) throw NonStochasticRow(s, a, v);
          total += v;
        }
        if (std::abs(total - 1.0) > kRowTolerance) throw NonStochasticRow(s, a, total);
        if (!std::isfinite(r(s, a))) throw ShapeMismatch("non-finite reward");
      }
    auto [lo, hi] = std::minmax_element(r_.begin(), r_.end());
    r_min_ = std::min(0.0, *lo);
    r_max_ = std::max(1.0, *hi);
  }

  std::size_t n_states() const { return ns_; }
  std::size_t n_actions() const { return na_; }
  double gamma() const { return gamma_; }
  double r_min() const { return r_min_; }
  double r_max() const { return r_max_; }

  double p(std::size_t s, std::size_t a, std::size_t t) const { return p_[(s * na_ + a) * ns_ + t]; }
  double r(std::size_t s, std::size_t a) const { return r_[s * na_ + a]; }
  const double* row(std::size_t s, std::size_t a) const { return p_.data() + (s * na_ + a) * ns_; }

  const std::vector<double>& transition_data() const { return p_; }
  const std::vector<double>& reward_data() const { return r_; }

  void set_reward_bounds(double lo, double hi) {
    auto [mn, mx] = std::minmax_element(r_.begin(), r_.end());
    if (lo > hi || *mn < lo || *mx > hi) throw ShapeMismatch("reward table outside declared bounds");
    r_min_ = lo;
    r_max_ = hi;
  }

  FiniteMDP with_gamma(double g) const { return FiniteMDP(ns_, na_, p_, r_, g); }

 private:
  std::size_t ns_ = 0, na_ = 0;
  std::vector<double> p_, r_;
  double gamma_ = 0;
  double r_min_ = 0, r_max_ = 1;
};

inline FiniteMDP make_finite_mdp(const Tensor3& transition, const Matrix& reward, double gamma) {
  const std::size_t ns = transition.size();
  if (ns == 0) throw ShapeMismatch("empty transition tensor");
  const std::size_t na = transition[0].size();
  if (reward.size() != ns) throw ShapeMismatch("reward rows != states");
  std::vector<double> p, r;
  p.reserve(ns * na * ns);
  r.reserve(ns * na);
  for (std::size_t s = 0; s < ns; ++s) {
    if (transition[s].size() != na || reward[s].size() != na)
      throw ShapeMismatch("ragged action dimension at state " + std::to_string(s));
    for (std::size_t a = 0; a < na; ++a) {
      if (transition[s][a].size() != ns) throw ShapeMismatch("ragged next-state dimension");
      p.insert(p.end(), transition[s][a].begin(), transition[s][a].end());
      r.push_back(reward[s][a]);
    }
  }
  return FiniteMDP(ns, na, std::move(p), std::move(r), gamma);
}

// Markov reward process as a one-action MDP.
inline FiniteMDP make_mrp(const Matrix& t, const std::vector<double>& reward, double gamma) {
  Tensor3 p(t.size());
  Matrix r(t.size());
  for (std::size_t s = 0; s < t.size(); ++s) {
    p[s] = {t[s]};
    r[s] = {reward.at(s)};
  }
  return make_finite_mdp(p, r, gamma);
}

// sum_m gamma^(m-1) r_m over the given finite sequence
inline double discounted_return(const std::vector<double>& rewards, double gamma) {
  double g = 0, w = 1;
  for (double r : rewards) {
    g += w * r;
    w *= gamma;
  }
  return g;
}

}  // namespace grl
