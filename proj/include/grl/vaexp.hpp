#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "abstraction.hpp"
#include "planners.hpp"
#include "rng.hpp"

namespace grl {

enum class GenMode {
  va,      // one optimal action per abstract state, arbitrary sub-optimal gaps
  vpdp,    // additionally every sub-optimal gap exceeds eps2
  broken,  // optimal action drawn per micro state (negative control)
};

struct GenSpec {
  std::size_t n_states = 64;
  std::size_t n_abstract = 16;
  std::size_t n_actions = 2;
  std::size_t branching = 4;
  double noise = 1.0;  // max V* gap inside an abstract state
  double delta = 5e-6;
  double gamma = 0.9;
  std::uint64_t seed = 1;
  GenMode mode = GenMode::va;
  double gap_min = 1e-3;  // range of Q*(x,a*) - Q*(x,a) for a != a*
  double gap_max = 1.0;
  double eps2 = 0.0;      // vpdp only
  std::size_t max_retries = 100;

  void validate() const {
    if (n_abstract == 0 || n_states % n_abstract != 0)
      throw PreconditionViolated("n_states must be a multiple of n_abstract");
    if (n_actions < 1) throw PreconditionViolated("need at least one action");
    if (branching < 1 || branching > n_states) throw PreconditionViolated("branching must lie in [1, n_states]");
    if (!(delta > 0)) throw PreconditionViolated("delta must be positive");
    if (!(noise >= 0)) throw PreconditionViolated("noise must be non-negative");
    if (!(gamma > 0 && gamma < 1)) throw BadGamma(gamma);
    if (!(gap_min > 0 && gap_max >= gap_min)) throw PreconditionViolated("need 0 < gap_min <= gap_max");
    if (mode == GenMode::vpdp && !(gap_max > eps2)) throw PreconditionViolated("gap_max must exceed eps2");
  }
};

struct GeneratedMDP {
  FiniteMDP mdp;
  Abstraction psi;
  std::vector<double> v_star;
  std::vector<std::size_t> optimal_action;
};

struct GenCheck {
  bool ok = false;
  double worst_value_gap = 0;  // inside abstract states
  double residual = 0;         // Bellman residual of the constructed V*
};

// Verifies a generated instance from scratch: V* by value iteration, the
// uniformity conditions the mode promises, and the lower bound on probabilities.
inline GenCheck check_generated(const GeneratedMDP& g, const GenSpec& spec) {
  GenCheck c;
  const auto& m = g.mdp;
  const auto q = avi(m, 1e-11);
  c.residual = 0;
  for (std::size_t x = 0; x < m.n_states(); ++x) c.residual = std::max(c.residual, std::abs(q.max(x) - g.v_star[x]));
  const double slack = 1e-6;
  std::vector<std::vector<std::size_t>> best(m.n_states());
  for (std::size_t x = 0; x < m.n_states(); ++x) best[x] = q.near_greedy(x, 1e-9);
  bool ok = c.residual <= 1e-8;
  const double floor = spec.delta / (1.0 + static_cast<double>(m.n_states()) * spec.delta);
  for (double p : m.transition_data()) ok = ok && p >= floor * (1 - 1e-12);
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    ok = ok && best[x] == std::vector<std::size_t>{g.optimal_action[x]};
    for (std::size_t y = x + 1; y < m.n_states(); ++y) {
      if (g.psi.label(x) != g.psi.label(y)) continue;
      c.worst_value_gap = std::max(c.worst_value_gap, std::abs(q.max(x) - q.max(y)));
      if (spec.mode != GenMode::broken) ok = ok && best[x] == best[y];
    }
  }
  ok = ok && c.worst_value_gap <= spec.noise + slack;
  if (spec.mode == GenMode::vpdp) ok = ok && check_vpdp(m, g.psi, spec.noise + slack, spec.eps2, q).holds;
  c.ok = ok;
  return c;
}

namespace detail {

inline GeneratedMDP generate_once(const GenSpec& spec, Rng& rng) {
  const std::size_t X = spec.n_states, S = spec.n_abstract, A = spec.n_actions, k = X / S;
  const double g = spec.gamma;
  std::vector<std::size_t> labels(X);
  for (std::size_t x = 0; x < X; ++x) labels[x] = x / k;

  // kernel with `branching` random successors, then add delta everywhere
  std::vector<double> p(X * A * X, 0.0);
  std::vector<std::size_t> idx(X);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t a = 0; a < A; ++a) {
      double* row = p.data() + (x * A + a) * X;
      for (std::size_t i = 0; i < X; ++i) idx[i] = i;
      double total = 0;
      for (std::size_t j = 0; j < spec.branching; ++j) {
        std::swap(idx[j], idx[j + rng.below(X - j)]);
        const double w = rng.uniform();
        row[idx[j]] = w;
        total += w;
      }
      if (total <= 0) row[idx[0]] = total = 1;
      for (std::size_t t = 0; t < X; ++t) row[t] = (row[t] / total + spec.delta) / (1.0 + static_cast<double>(X) * spec.delta);
    }

  // abstract values and optimal actions, micro values within noise
  std::vector<double> v_abs(S);
  std::vector<std::size_t> a_abs(S);
  for (std::size_t s = 0; s < S; ++s) {
    v_abs[s] = rng.uniform(0.0, 1.0 / (1.0 - g));
    a_abs[s] = rng.below(A);
  }
  GeneratedMDP out;
  out.v_star.resize(X);
  out.optimal_action.resize(X);
  for (std::size_t x = 0; x < X; ++x) {
    out.v_star[x] = v_abs[labels[x]] + spec.noise * (rng.uniform() - 0.5);
    out.optimal_action[x] = spec.mode == GenMode::broken ? rng.below(A) : a_abs[labels[x]];
  }
  const double lo = spec.mode == GenMode::vpdp ? std::max(spec.gap_min, spec.eps2 + 1e-6) : spec.gap_min;

  // Q from V and gaps, rewards backed out of the Bellman equation
  std::vector<double> r(X * A);
  for (std::size_t x = 0; x < X; ++x)
    for (std::size_t a = 0; a < A; ++a) {
      const double qv = a == out.optimal_action[x] ? out.v_star[x] : out.v_star[x] - rng.uniform(lo, spec.gap_max);
      const double* row = p.data() + (x * A + a) * X;
      double ev = 0;
      for (std::size_t t = 0; t < X; ++t) ev += row[t] * out.v_star[t];
      r[x * A + a] = qv - g * ev;
    }
  out.mdp = FiniteMDP(X, A, std::move(p), std::move(r), g);
  out.psi = Abstraction::tabular(labels, S);
  return out;
}

}  // namespace detail

// Random ergodic MDP whose aggregation by `psi` is value-uniform within
// `noise` and shares the optimal action (per mode). Each attempt draws from
// its own stream; the instance is re-verified by check_generated.
inline GeneratedMDP gen_aggregatable_mdp(const GenSpec& spec) {
  spec.validate();
  for (std::size_t attempt = 0; attempt < spec.max_retries; ++attempt) {
    Rng rng = Rng(spec.seed).split(attempt);
    auto g = detail::generate_once(spec, rng);
    if (check_generated(g, spec).ok) return g;
  }
  throw GenerationFailed("no valid instance after " + std::to_string(spec.max_retries) + " attempts");
}

// B(x | s a) = rho^a(x) normalized inside psi^-1(s), rho^a the stationary law
// of always playing a.
inline Dispersion dispersion_from_stationary(const FiniteMDP& m, const Abstraction& psi) {
  Matrix w(m.n_actions());
  for (std::size_t a = 0; a < m.n_actions(); ++a) w[a] = stationary_distribution_exact(action_matrix(m, a));
  return Dispersion::from_action_weights(psi, w);
}

inline double macro_expectation(const std::vector<double>& rho, const std::vector<double>& v_star,
                                const std::vector<double>& v_pi) {
  if (rho.size() != v_star.size() || v_pi.size() != v_star.size()) throw ShapeMismatch("macro expectation inputs");
  double t = 0;
  for (std::size_t e = 0; e < rho.size(); ++e) t += rho[e] * std::abs(v_star[e] - v_pi[e]);
  return t;
}

struct Evaluation {
  std::vector<std::size_t> uplifted;  // pi(x) = surrogate greedy action at psi(x)
  std::vector<double> v_star, v_pi, rho;
  bool optimal = false;  // uplifted action optimal everywhere
  double loss = 0;       // max_x V* - V^pi
  double macro = 0;
};

// Surrogate from stationary dispersion, its exact optimal policy uplifted and
// evaluated against V*.
inline Evaluation evaluate_uplift(const GeneratedMDP& g) {
  const auto& m = g.mdp;
  const auto sur = build_surrogate(m, g.psi, dispersion_from_stationary(m, g.psi), DispersionSource::stationary_of_policy);
  const auto abstract_q = pi(sur.mdp, 1e-12).q;
  Evaluation ev;
  ev.uplifted.resize(m.n_states());
  ev.optimal = true;
  for (std::size_t x = 0; x < m.n_states(); ++x) {
    ev.uplifted[x] = abstract_q.greedy(g.psi.label(x));
    ev.optimal = ev.optimal && ev.uplifted[x] == g.optimal_action[x];
  }
  const auto pol = Policy::deterministic(ev.uplifted, m.n_actions());
  ev.v_star = pe_exact(m, Policy::deterministic(g.optimal_action, m.n_actions())).values;
  ev.v_pi = pe_exact(m, pol).values;
  ev.rho = stationary_distribution_exact(policy_matrix(m, pol));
  for (std::size_t x = 0; x < m.n_states(); ++x) ev.loss = std::max(ev.loss, ev.v_star[x] - ev.v_pi[x]);
  ev.macro = macro_expectation(ev.rho, ev.v_star, ev.v_pi);
  return ev;
}

// Regularized incomplete beta I_x(a, b), continued fraction by modified Lentz.
inline double incomplete_beta(double a, double b, double x) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  const double lbeta = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  const double front = std::exp(lbeta + a * std::log(x) + b * std::log1p(-x));
  auto cf = [](double aa, double bb, double xx) {
    const double tiny = 1e-300;
    double c = 1, d = 1 - (aa + bb) * xx / (aa + 1);
    if (std::abs(d) < tiny) d = tiny;
    d = 1 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
      const double m2 = 2.0 * m;
      double num = m * (bb - m) * xx / ((aa + m2 - 1) * (aa + m2));
      d = 1 + num * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1 + num / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1 / d;
      h *= d * c;
      num = -(aa + m) * (aa + bb + m) * xx / ((aa + m2) * (aa + m2 + 1));
      d = 1 + num * d;
      if (std::abs(d) < tiny) d = tiny;
      c = 1 + num / c;
      if (std::abs(c) < tiny) c = tiny;
      d = 1 / d;
      const double del = d * c;
      h *= del;
      if (std::abs(del - 1) < 1e-15) return h;
    }
    throw NoConvergence("incomplete_beta", 10000);
  };
  if (x < (a + 1) / (a + b + 2)) return front * cf(a, b, x) / a;
  return 1 - front * cf(b, a, 1 - x) / b;
}

// two-sided P(|T| >= |t|) for Student t with nu degrees of freedom
inline double student_t_two_sided(double t, double nu) {
  if (std::isinf(t)) return 0;
  return incomplete_beta(nu / 2, 0.5, nu / (nu + t * t));
}

struct Correlation {
  double r = 0;
  double p = 1;
  std::size_t n = 0;
};

inline Correlation pearson_with_p(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeMismatch("pearson inputs differ in length");
  if (x.size() < 3) throw PreconditionViolated("pearson needs at least three pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0) || !(syy > 0)) throw DegenerateVariance("pearson input has zero variance");
  Correlation c;
  c.n = x.size();
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double nu = n - 2;
  if (std::abs(c.r) >= 1) {
    c.p = 0;
  } else {
    c.p = student_t_two_sided(c.r * std::sqrt(nu / (1 - c.r * c.r)), nu);
  }
  return c;
}

struct VARow {
  std::size_t mdp = 0;  // index among kept instances
  std::size_t state = 0;
  double v_star = 0, v_pi = 0, diff = 0, rho = 0, neg_log2_rho = 0;
};

struct VAResult {
  std::vector<VARow> rows;
  std::vector<double> macro;  // one per kept instance
  std::vector<double> loss;
  std::size_t generated = 0, kept = 0, discarded = 0;
  std::optional<Correlation> pcc;  // empty when a column has no variance
};

struct VAOptions {
  bool discard_optimal = true;
  std::size_t max_attempts = 0;  // 0 means 20 * n_mdps
};

// Keeps n_mdps instances whose uplifted policy is not optimal (unless
// discard_optimal is off), instance i drawn with seed spec.seed split by i.
inline VAResult run_va_experiment(const GenSpec& spec, std::size_t n_mdps, const VAOptions& opt = {}) {
  if (n_mdps < 2) throw PreconditionViolated("need at least two instances");
  spec.validate();
  const std::size_t cap = opt.max_attempts ? opt.max_attempts : 20 * n_mdps;
  VAResult res;
  for (std::size_t i = 0; res.kept < n_mdps && i < cap; ++i) {
    GenSpec one = spec;
    one.seed = Rng(spec.seed).split(i)();
    const auto g = gen_aggregatable_mdp(one);
    ++res.generated;
    const auto ev = evaluate_uplift(g);
    if (opt.discard_optimal && ev.optimal) {
      ++res.discarded;
      continue;
    }
    for (std::size_t x = 0; x < g.mdp.n_states(); ++x) {
      VARow row{res.kept, x, ev.v_star[x], ev.v_pi[x], std::abs(ev.v_star[x] - ev.v_pi[x]), ev.rho[x], -std::log2(ev.rho[x])};
      res.rows.push_back(row);
    }
    res.macro.push_back(ev.macro);
    res.loss.push_back(ev.loss);
    ++res.kept;
  }
  if (res.rows.size() >= 3) {
    std::vector<double> d, l;
    for (const auto& r : res.rows) {
      d.push_back(r.diff);
      l.push_back(r.neg_log2_rho);
    }
    try {
      res.pcc = pearson_with_p(d, l);
    } catch (const DegenerateVariance&) {
    }
  }
  return res;
}

struct VPDPCounterexample {
  std::size_t instance = 0;
  double loss = 0;
};

struct VPDPReport {
  std::vector<VPDPCounterexample> counterexamples;
  std::vector<double> losses;
  double worst_loss = 0;
  double threshold = 0;
};

// Uplifted-policy loss on n_mdps instances; loss > c * noise counts as a
// counterexample. spec.mode picks the constrained or the control generator.
inline VPDPReport vpdp_search(const GenSpec& spec, std::size_t n_mdps, double c) {
  spec.validate();
  VPDPReport rep;
  rep.threshold = c * spec.noise;
  for (std::size_t i = 0; i < n_mdps; ++i) {
    GenSpec one = spec;
    one.seed = Rng(spec.seed).split(i)();
    const auto ev = evaluate_uplift(gen_aggregatable_mdp(one));
    rep.losses.push_back(ev.loss);
    rep.worst_loss = std::max(rep.worst_loss, ev.loss);
    if (ev.loss > rep.threshold + 1e-9) rep.counterexamples.push_back({i, ev.loss});
  }
  return rep;
}

}  // namespace grl
