#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "abstraction.hpp"
#include "domains.hpp"
#include "env.hpp"
#include "planners.hpp"
#include "policy.hpp"
#include "rng.hpp"

namespace grl {

// alpha_n(sa) = 1 / visits(sa)^omega; harmonic is omega = 1.
struct LearningRateSchedule {
  enum class Kind { harmonic, polynomial } kind = Kind::polynomial;
  double omega = 0.75;

  static LearningRateSchedule harmonic() { return {Kind::harmonic, 1.0}; }
  static LearningRateSchedule polynomial(double w) {
    if (!(w > 0.5 && w <= 1.0)) throw PreconditionViolated("omega must lie in (0.5, 1]");
    return {Kind::polynomial, w};
  }

  double exponent() const { return kind == Kind::harmonic ? 1.0 : omega; }
  double operator()(std::uint64_t visits) const {
    if (visits == 0) return 0.0;
    return kind == Kind::harmonic ? 1.0 / static_cast<double>(visits)
                                  : std::pow(static_cast<double>(visits), -omega);
  }
};

struct RunConfig {
  std::optional<double> gamma;   // defaults to the environment's discount
  std::size_t steps = 100000;
  std::size_t n_runs = 1;
  std::uint64_t seed = 0;
  std::vector<double> q_init = {0.0};  // one value for all entries or one per (s,a)
  std::optional<Policy> behavior;      // default: uniform over actions at every history
  LearningRateSchedule schedule;
  std::size_t record_every = 1000;

  void validate() const {
    if (steps < 1) throw PreconditionViolated("steps must be >= 1");
    if (n_runs < 1) throw PreconditionViolated("n_runs must be >= 1");
    if (record_every < 1) throw PreconditionViolated("record_every must be >= 1");
    if (q_init.empty()) throw PreconditionViolated("q_init is empty");
    if (gamma && !(*gamma >= 0 && *gamma < 1)) throw BadGamma(*gamma);
  }
};

struct Snapshot {
  std::size_t step;
  std::vector<double> values;
};

struct QLearningResult {
  QTable q;
  std::vector<Snapshot> trace;
};

inline QTable initial_table(std::size_t S, std::size_t A, const std::vector<double>& q_init) {
  QTable q(S, A);
  if (q_init.size() == 1) {
    for (auto& v : q.values) v = q_init[0];
  } else if (q_init.size() == S * A) {
    q.values = q_init;
  } else if (A == 1 && q_init.size() == S) {
    q.values = q_init;
  } else {
    throw PreconditionViolated("q_init needs 1 or |S|*|A| entries, got " + std::to_string(q_init.size()));
  }
  return q;
}

// q(s,a) += alpha (r' + gamma max q(s',.) - q(s,a)) along one simulated history.
inline QLearningResult q_learning(const HistoryEnv& env, const Abstraction& psi, const RunConfig& cfg, Rng rng) {
  cfg.validate();
  const std::size_t S = psi.n_states(), A = env.n_actions();
  const double g = cfg.gamma.value_or(env.gamma());
  QLearningResult out{initial_table(S, A, cfg.q_init), {}};
  QTable& q = out.q;
  auto memory = joint_memory(env.memory(), psi.memory());
  if (cfg.behavior && !cfg.behavior->is_tabular()) memory.reset();
  History h = env.initial_history();
  std::size_t s = psi(h);
  std::vector<Outcome> scratch;
  for (std::size_t n = 1; n <= cfg.steps; ++n) {
    const std::size_t a = cfg.behavior ? rng.categorical((*cfg.behavior)(h)) : rng.below(A);
    const Percept e = env.sample(h, a, rng, scratch);
    h = h.extend(a, e);
    const std::size_t s2 = psi(h);
    const std::size_t k = s * A + a;
    const double alpha = cfg.schedule(++q.visits[k]);
    q.values[k] += alpha * (e.reward + g * q.max(s2) - q.values[k]);
    s = s2;
    if (n % cfg.record_every == 0 || n == cfg.steps) out.trace.push_back({n, q.values});
    if (memory && h.retained() > 2 * *memory + 64) h = h.trimmed(*memory);
  }
  return out;
}

inline QLearningResult q_learning(const HistoryEnv& env, const Abstraction& psi, const RunConfig& cfg) {
  return q_learning(env, psi, cfg, Rng(cfg.seed));
}

struct ExperimentRecord {
  std::size_t step;
  std::size_t run_stat;  // number of runs aggregated
  std::size_t state, action;
  double mean, std;
};

struct ConvergenceResult {
  std::vector<ExperimentRecord> rows;
  std::vector<QTable> finals;  // per run, in run order

  // means at the last recorded step, (s,a) row-major
  std::vector<double> terminal_means() const {
    std::vector<double> m;
    if (rows.empty()) return m;
    const std::size_t last = rows.back().step;
    for (const auto& r : rows)
      if (r.step == last) m.push_back(r.mean);
    return m;
  }
};

// Runs use independent streams split from the seed; statistics are reduced
// in run order, std is the population standard deviation across runs.
inline ConvergenceResult convergence_experiment(const HistoryEnv& env, const Abstraction& psi, const RunConfig& cfg) {
  cfg.validate();
  const Rng root(cfg.seed);
  std::vector<QLearningResult> runs;
  runs.reserve(cfg.n_runs);
  for (std::size_t r = 0; r < cfg.n_runs; ++r) runs.push_back(q_learning(env, psi, cfg, root.split(r)));
  ConvergenceResult out;
  const std::size_t S = psi.n_states(), A = env.n_actions();
  const std::size_t points = runs[0].trace.size();
  const double n = static_cast<double>(cfg.n_runs);
  for (std::size_t i = 0; i < points; ++i)
    for (std::size_t k = 0; k < S * A; ++k) {
      double mean = 0, sq = 0;
      for (const auto& run : runs) mean += run.trace[i].values[k];
      mean /= n;
      for (const auto& run : runs) sq += (run.trace[i].values[k] - mean) * (run.trace[i].values[k] - mean);
      out.rows.push_back({runs[0].trace[i].step, cfg.n_runs, k / A, k % A, mean, std::sqrt(sq / n)});
    }
  for (auto& run : runs) out.finals.push_back(std::move(run.q));
  return out;
}

enum class Domain { ex1, ex2 };

struct DomainParams {
  double gamma = 0.9;
  double p_min = 0.01;
};

inline ExampleDomain make_domain(Domain d, const DomainParams& p = {}) {
  return d == Domain::ex1 ? make_example1(p.gamma) : make_example2(p.p_min, p.gamma);
}

inline ConvergenceResult convergence_experiment(Domain d, const RunConfig& cfg, const DomainParams& p = {}) {
  auto dom = make_domain(d, p);
  return convergence_experiment(*dom.env, dom.psi, cfg);
}

// Settings used for the learning curves of the two example domains.
inline RunConfig preset_example1() {
  RunConfig c;
  c.gamma = 0.9;
  c.n_runs = 40;
  c.steps = 200000;
  c.q_init = {8.0, 3.0};
  c.record_every = 1000;
  c.seed = 1;
  return c;
}

inline RunConfig preset_example2() {
  RunConfig c;
  c.gamma = 0.9;
  c.n_runs = 50;
  c.steps = 1000000;
  c.q_init = {0.0};
  c.record_every = 10000;
  c.seed = 2;
  return c;
}

}  // namespace grl
