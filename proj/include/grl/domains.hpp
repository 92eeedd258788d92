#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "env.hpp"
#include "finite_mdp.hpp"
#include "planners.hpp"
#include "policy.hpp"

namespace grl {

struct ExampleDomain {
  std::shared_ptr<const HistoryEnv> env;
  Abstraction psi;
  QTable q_star;  // analytic state-action values of the abstraction
};

// Four observations 00, 01, 10, 11 (indices 0..3) driven by a fixed chain T;
// the reward for leaving o is R(o). The map keeps only the second bit.
inline FiniteMDP example1_mrp(double gamma) {
  const Matrix T = {{0, 0.5, 0.5, 0}, {0.5, 0, 0, 0.5}, {0, 1, 0, 0}, {1, 0, 0, 0}};
  const std::vector<double> R = {gamma / 2 / (1 + gamma), (1 + gamma / 2) / (1 + gamma), 0.0, 1.0};
  return make_mrp(T, R, gamma);
}

inline ExampleDomain make_example1(double gamma = 0.9) {
  ExampleDomain d;
  d.env = std::make_shared<MdpEnv>(example1_mrp(gamma), 0);
  d.psi = Abstraction::tabular({0, 1, 0, 1}, 2);
  d.q_star = QTable(2, 1);
  d.q_star(0, 0) = gamma / (1 - gamma * gamma);
  d.q_star(1, 0) = 1 / (1 - gamma * gamma);
  return d;
}

// Key domain: the agent presses key x or y; the right key for state s is
// k_s = (x, x, y). A right key is accepted (observation v) with probability
// p_v(h) = max(p_min, fraction of accepted presses so far); anything else
// is rejected (observation i). State 0 follows an acceptance or the start,
// state 1 a single rejection, state 2 two or more rejections in a row.
class KeyEnv : public HistoryEnv {
 public:
  static constexpr std::size_t x = 0, y = 1;
  static constexpr std::size_t accepted = 0, rejected = 1, start = 2;

  KeyEnv(double p_min, double gamma) : p_min_(p_min), gamma_(gamma) {
    if (!(p_min > 0 && p_min <= 1)) throw PreconditionViolated("p_min must lie in (0,1]");
    if (!(gamma >= 0 && gamma < 1)) throw BadGamma(gamma);
  }

  std::size_t n_actions() const override { return 2; }
  std::size_t n_observations() const override { return 3; }
  double gamma() const override { return gamma_; }
  double r_min() const override { return -3.0; }
  double r_max() const override { return 3.0; }
  Percept initial_percept() const override { return {start, 0.0}; }
  std::optional<std::size_t> memory() const override { return 2; }

  static std::size_t state(const History& h) {
    const std::size_t last = h.back().observation;
    if (last != rejected) return 0;
    const std::size_t before = h.percept_from_end(1).observation;
    return before == rejected ? 2 : 1;
  }

  static std::size_t key(std::size_t s) { return s == 2 ? y : x; }

  double p_accept(const History& h) const {
    const std::size_t presses = h.size() - 1;
    const double frac = presses ? static_cast<double>(h.count(accepted)) / static_cast<double>(presses) : 0.0;
    return std::max(p_min_, frac);
  }

  double right_key_reward(std::size_t s, double p) const {
    switch (s) {
      case 0: return 3 - gamma_ - 2 * gamma_ * p;
      case 1: return 1 - 3 * gamma_ * p;
      default: return -3 * gamma_ * p;
    }
  }

  void next(const History& h, std::size_t a, std::vector<Outcome>& out) const override {
    const std::size_t s = state(h);
    if (a != key(s)) {
      out.push_back({{rejected, -3.0}, 1.0});
      return;
    }
    const double p = p_accept(h);
    const double r = right_key_reward(s, p);
    out.push_back({{accepted, r}, p});
    if (p < 1) out.push_back({{rejected, r}, 1 - p});
  }

 private:
  double p_min_, gamma_;
};

// State process of the key domain with the acceptance probability frozen at p.
inline FiniteMDP example2_model(double gamma, double p) {
  const Tensor3 P = {{{p, 1 - p, 0}, {0, 1, 0}}, {{p, 0, 1 - p}, {0, 0, 1}}, {{0, 0, 1}, {p, 0, 1 - p}}};
  const Matrix R = {{3 - gamma - 2 * gamma * p, -3}, {1 - 3 * gamma * p, -3}, {-3, -3 * gamma * p}};
  auto m = make_finite_mdp(P, R, gamma);
  m.set_reward_bounds(-3, 3);
  return m;
}

inline ExampleDomain make_example2(double p_min = 0.01, double gamma = 0.9) {
  ExampleDomain d;
  d.env = std::make_shared<KeyEnv>(p_min, gamma);
  d.psi = Abstraction::from_function(3, &KeyEnv::state, 2);
  d.q_star = QTable(3, 2);
  d.q_star(0, 0) = 3;
  d.q_star(0, 1) = -3 + gamma;
  d.q_star(1, 0) = 1;
  d.q_star(1, 1) = -3;
  d.q_star(2, 0) = -3;
  d.q_star(2, 1) = 0;
  return d;
}

// Values as printed for the key domain, (s, a) row-major.
inline std::vector<double> example2_reference_table() { return {3, -2, 1, -3, -3, 0}; }

}  // namespace grl
