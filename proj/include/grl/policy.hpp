#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "env.hpp"
#include "errors.hpp"
#include "history.hpp"
#include "rng.hpp"

namespace grl {

// Total map from histories to [0, n_states). The tabular form labels the
// last observation.
class Abstraction {
 public:
  using Fn = std::function<std::size_t(const History&)>;

  Abstraction() = default;

  static Abstraction tabular(std::vector<std::size_t> labels, std::size_t n_states = 0) {
    Abstraction a;
    std::size_t top = 0;
    for (auto l : labels) top = std::max(top, l + 1);
    a.n_ = n_states ? n_states : top;
    if (top > a.n_) throw PreconditionViolated("label exceeds declared state count");
    a.labels_ = std::move(labels);
    a.memory_ = 1;
    return a;
  }

  static Abstraction identity(std::size_t n) {
    std::vector<std::size_t> l(n);
    for (std::size_t i = 0; i < n; ++i) l[i] = i;
    return tabular(std::move(l), n);
  }

  static Abstraction constant(std::size_t n_underlying) {
    return tabular(std::vector<std::size_t>(n_underlying, 0), 1);
  }

  static Abstraction from_function(std::size_t n_states, Fn fn, std::optional<std::size_t> memory = std::nullopt) {
    Abstraction a;
    a.n_ = n_states;
    a.fn_ = std::move(fn);
    a.memory_ = memory;
    return a;
  }

  std::size_t n_states() const { return n_; }
  bool is_tabular() const { return !fn_; }
  const std::vector<std::size_t>& labels() const { return labels_; }
  std::size_t label(std::size_t underlying) const { return labels_.at(underlying); }
  std::optional<std::size_t> memory() const { return memory_; }

  std::size_t operator()(const History& h) const {
    std::size_t s = fn_ ? fn_(h) : labels_.at(h.back().observation);
    if (s >= n_) throw UnknownState(s);
    return s;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> labels_;
  Fn fn_;
  std::optional<std::size_t> memory_;
};

class Policy {
 public:
  using Fn = std::function<std::vector<double>(const History&)>;

  Policy() = default;

  static Policy tabular(Matrix probs) {
    for (std::size_t s = 0; s < probs.size(); ++s) check_dist(probs[s], s);
    Policy p;
    p.na_ = probs.empty() ? 0 : probs[0].size();
    p.table_ = std::move(probs);
    return p;
  }

  static Policy deterministic(const std::vector<std::size_t>& actions, std::size_t n_actions) {
    Matrix m(actions.size(), std::vector<double>(n_actions, 0.0));
    for (std::size_t s = 0; s < actions.size(); ++s) m[s].at(actions[s]) = 1.0;
    return tabular(std::move(m));
  }

  static Policy uniform(std::size_t n_states, std::size_t n_actions) {
    return tabular(Matrix(n_states, std::vector<double>(n_actions, 1.0 / n_actions)));
  }

  static Policy history(std::size_t n_actions, Fn fn) {
    Policy p;
    p.na_ = n_actions;
    p.fn_ = std::move(fn);
    return p;
  }

  bool is_tabular() const { return !fn_; }
  std::size_t n_actions() const { return na_; }
  std::size_t n_states() const { return table_.size(); }
  const Matrix& table() const { return table_; }

  const std::vector<double>& at_state(std::size_t s) const {
    if (s >= table_.size()) throw UnknownState(s);
    return table_[s];
  }

  // Tabular policies act on the last observation.
  std::vector<double> operator()(const History& h) const {
    if (fn_) return fn_(h);
    return at_state(h.back().observation);
  }

  // Most probable action per state, smallest index on ties.
  std::vector<std::size_t> greedy_actions() const {
    std::vector<std::size_t> out(table_.size());
    for (std::size_t s = 0; s < table_.size(); ++s)
      out[s] = static_cast<std::size_t>(std::max_element(table_[s].begin(), table_[s].end()) - table_[s].begin());
    return out;
  }

 private:
  static void check_dist(const std::vector<double>& d, std::size_t s) {
    double t = 0;
    for (double v : d) {
      if (!(v >= 0)) throw PreconditionViolated("negative action probability at state " + std::to_string(s));
      t += v;
    }
    if (std::abs(t - 1.0) > 1e-9) throw PreconditionViolated("action distribution at state " + std::to_string(s) + " does not sum to 1");
  }

  std::size_t na_ = 0;
  Matrix table_;
  Fn fn_;
};

// pi(a | h) := state_policy(a | psi(h))
inline Policy uplift_policy(const Policy& state_policy, const Abstraction& psi) {
  if (!state_policy.is_tabular()) throw PreconditionViolated("uplift needs a tabular state policy");
  return Policy::history(state_policy.n_actions(), [state_policy, psi](const History& h) {
    return state_policy.at_state(psi(h));
  });
}

// Same uplift materialized over the underlying states of a tabular map.
inline Policy uplift_tabular(const Policy& state_policy, const Abstraction& psi) {
  if (!psi.is_tabular()) throw PreconditionViolated("uplift_tabular needs a tabular abstraction");
  Matrix m;
  for (auto s : psi.labels()) m.push_back(state_policy.at_state(s));
  return Policy::tabular(std::move(m));
}

inline History simulate(const HistoryEnv& env, const Policy& policy, std::size_t steps, std::uint64_t seed) {
  Rng rng(seed);
  History h = env.initial_history();
  std::vector<Outcome> scratch;
  for (std::size_t n = 0; n < steps; ++n) {
    std::size_t a = rng.categorical(policy(h));
    Percept e = env.sample(h, a, rng, scratch);
    h = h.extend(a, e);
  }
  return h;
}

}  // namespace grl
