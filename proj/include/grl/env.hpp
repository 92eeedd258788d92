#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "finite_mdp.hpp"
#include "history.hpp"
#include "rng.hpp"

namespace grl {

struct Outcome {
  Percept percept;
  double prob;
};

// History-conditional percept kernel mu(e' | h a).
class HistoryEnv {
 public:
  virtual ~HistoryEnv() = default;

  virtual std::size_t n_actions() const = 0;
  virtual std::size_t n_observations() const = 0;
  virtual double gamma() const = 0;
  virtual double r_min() const { return 0.0; }
  virtual double r_max() const { return 1.0; }

  virtual Percept initial_percept() const = 0;
  virtual void next(const History& h, std::size_t action, std::vector<Outcome>& out) const = 0;

  // Trailing percepts the kernel reads besides length and observation
  // counts; nullopt means the full history.
  virtual std::optional<std::size_t> memory() const { return std::nullopt; }

  History initial_history() const { return History::start(initial_percept(), n_observations()); }

  std::vector<Outcome> distribution(const History& h, std::size_t action) const {
    std::vector<Outcome> out;
    next(h, action, out);
    return out;
  }

  Percept sample(const History& h, std::size_t action, Rng& rng, std::vector<Outcome>& scratch) const {
    scratch.clear();
    next(h, action, scratch);
    double u = rng.uniform();
    for (const auto& o : scratch) {
      if (u < o.prob) return o.percept;
      u -= o.prob;
    }
    for (auto it = scratch.rbegin(); it != scratch.rend(); ++it)
      if (it->prob > 0) return it->percept;
    throw Error("environment returned an empty distribution");
  }
};

// A finite MDP seen as a history-based environment: the observation is the
// current state and the percept reward is r(s,a) of the step just taken.
class MdpEnv : public HistoryEnv {
 public:
  explicit MdpEnv(FiniteMDP mdp, std::size_t start_state = 0) : mdp_(std::move(mdp)), start_(start_state) {
    if (start_ >= mdp_.n_states()) throw PreconditionViolated("start state out of range");
  }

  std::size_t n_actions() const override { return mdp_.n_actions(); }
  std::size_t n_observations() const override { return mdp_.n_states(); }
  double gamma() const override { return mdp_.gamma(); }
  double r_min() const override { return mdp_.r_min(); }
  double r_max() const override { return mdp_.r_max(); }
  Percept initial_percept() const override { return {start_, 0.0}; }
  std::optional<std::size_t> memory() const override { return 1; }

  void next(const History& h, std::size_t a, std::vector<Outcome>& out) const override {
    const std::size_t s = h.back().observation;
    const double* row = mdp_.row(s, a);
    const double r = mdp_.r(s, a);
    for (std::size_t t = 0; t < mdp_.n_states(); ++t)
      if (row[t] > 0) out.push_back({{t, r}, row[t]});
  }

  const FiniteMDP& mdp() const { return mdp_; }

 private:
  FiniteMDP mdp_;
  std::size_t start_;
};

}  // namespace grl
