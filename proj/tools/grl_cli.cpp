#include <CLI11.hpp>
#include <json.hpp>

#include <Eigen/Core>
#include <boost/version.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "grl/csv.hpp"
#include "grl/domains.hpp"
#include "grl/homomorphism.hpp"
#include "grl/mdp_io.hpp"
#include "grl/ordering.hpp"
#include "grl/qlearning.hpp"
#include "grl/random_mdp.hpp"
#include "grl/sequentialize.hpp"
#include "grl/vaexp.hpp"

#ifndef GRL_VERSION
#define GRL_VERSION "0.0.0"
#endif
#ifndef GRL_PRESET_DIR
#define GRL_PRESET_DIR "presets"
#endif

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Kind { real, integer, text, boolean, decimal, int_list, real_list };

struct Field {
  std::string name;
  Kind kind;
  json fallback;  // null: required
  std::string help;
};

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::real: return "number";
    case Kind::integer: return "integer";
    case Kind::text: return "string";
    case Kind::boolean: return "bool";
    case Kind::decimal: return "decimal";
    case Kind::int_list: return "integer list";
    case Kind::real_list: return "number list";
  }
  return "?";
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != '[' && c != ']') {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_real(const std::string& s, const std::string& field) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("field '" + field + "': expected a number, got '" + s + "'");
}

long long to_int(const std::string& s, const std::string& field) {
  try {
    std::size_t used = 0;
    long long v = std::stoll(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError("field '" + field + "': expected an integer, got '" + s + "'");
}

// command-line text to a typed json value
json from_text(const Field& f, const std::string& s) {
  switch (f.kind) {
    case Kind::real: return to_real(s, f.name);
    case Kind::integer: return to_int(s, f.name);
    case Kind::text: return s;
    case Kind::decimal: return s;
    case Kind::boolean:
      if (s == "true" || s == "1" || s == "yes") return true;
      if (s == "false" || s == "0" || s == "no") return false;
      throw ConfigError("field '" + f.name + "': expected true or false, got '" + s + "'");
    case Kind::int_list: {
      json a = json::array();
      for (auto& t : split_list(s)) a.push_back(to_int(t, f.name));
      return a;
    }
    case Kind::real_list: {
      json a = json::array();
      for (auto& t : split_list(s)) a.push_back(to_real(t, f.name));
      return a;
    }
  }
  return {};
}

// checks a json value against the field kind, normalizing decimals to text
json coerce(const Field& f, const json& v) {
  auto bad = [&] { return ConfigError("field '" + f.name + "': expected " + kind_name(f.kind) + ", got " + v.dump()); };
  switch (f.kind) {
    case Kind::real:
      if (!v.is_number()) throw bad();
      return v.get<double>();
    case Kind::integer:
      if (!v.is_number_integer()) throw bad();
      return v;
    case Kind::text:
      if (!v.is_string()) throw bad();
      return v;
    case Kind::boolean:
      if (!v.is_boolean()) throw bad();
      return v;
    case Kind::decimal:
      if (v.is_string()) {
        try {
          grl::parse_decimal(v.get<std::string>());
        } catch (const grl::ParseError&) {
          throw bad();
        }
        return v;
      }
      if (v.is_number()) return grl::format_double(v.get<double>());
      throw bad();
    case Kind::int_list:
      if (!v.is_array()) throw bad();
      for (auto& e : v)
        if (!e.is_number_integer()) throw bad();
      return v;
    case Kind::real_list:
      if (!v.is_array()) throw bad();
      for (auto& e : v)
        if (!e.is_number()) throw bad();
      return v;
  }
  return v;
}

struct Context;
using Runner = std::function<void(Context&)>;

struct Command {
  std::string name, help;
  std::vector<Field> fields;
  Runner run;
};

struct Context {
  std::string command;
  std::uint64_t seed = 1;
  fs::path out_dir;
  json params;
  json summary = json::object();
  std::vector<std::string> outputs;

  std::string stem() const { return command + "_" + std::to_string(seed); }

  fs::path path(const std::string& suffix, const std::string& ext) {
    const std::string name = stem() + (suffix.empty() ? "" : "_" + suffix) + ext;
    outputs.push_back(name);
    return out_dir / name;
  }

  void csv(const std::string& suffix, const std::vector<std::string>& schema, const std::vector<grl::CsvRow>& rows) {
    grl::emit_csv(rows, schema, path(suffix, ".csv").string());
  }

  void mdp(const std::string& suffix, const grl::FiniteMDP& m) { grl::save_mdp(path(suffix, ".mdp").string(), m); }

  double real(const char* k) const { return params.at(k).get<double>(); }
  std::size_t size(const char* k) const {
    const auto v = params.at(k).get<long long>();
    if (v < 0) throw ConfigError(std::string("field '") + k + "' must be non-negative");
    return static_cast<std::size_t>(v);
  }
  std::string text(const char* k) const { return params.at(k).get<std::string>(); }
  bool flag(const char* k) const { return params.at(k).get<bool>(); }
  std::vector<std::size_t> sizes(const char* k) const {
    std::vector<std::size_t> out;
    for (auto& v : params.at(k)) {
      if (v.get<long long>() < 0) throw ConfigError(std::string("field '") + k + "' must be non-negative");
      out.push_back(v.get<std::size_t>());
    }
    return out;
  }
  std::vector<double> reals(const char* k) const { return params.at(k).get<std::vector<double>>(); }
};

grl::Cell cell(double x) { return grl::Cell{x}; }
grl::Cell cell(std::size_t x) { return grl::Cell{static_cast<std::int64_t>(x)}; }
grl::Cell cell(const std::string& x) { return grl::Cell{x}; }
grl::Cell cell(bool x) { return grl::Cell{std::string(x ? "true" : "false")}; }

std::string join(const std::vector<std::size_t>& v, char sep = ' ') {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? std::string(1, sep) : "") + std::to_string(v[i]);
  return s;
}

template <class T>
T pick(const std::string& field, const std::string& value, const std::map<std::string, T>& options) {
  auto it = options.find(value);
  if (it != options.end()) return it->second;
  std::string names;
  for (auto& [k, _] : options) names += (names.empty() ? "" : ", ") + k;
  throw ConfigError("field '" + field + "': unknown value '" + value + "' (expected one of " + names + ")");
}

// MDP from a file when `mdp` is set, else a random one drawn from the seed
grl::FiniteMDP input_mdp(const Context& c) {
  if (!c.text("mdp").empty()) return grl::load_mdp(c.text("mdp"));
  grl::Rng rng(c.seed);
  return grl::random_mdp(c.size("states"), c.size("actions"), c.real("gamma"), rng, c.size("branching"));
}

std::vector<Field> mdp_fields(std::size_t states, std::size_t actions) {
  return {{"mdp", Kind::text, "", "path of an MDP text file; empty draws a random MDP"},
          {"states", Kind::integer, states, "random MDP: states"},
          {"actions", Kind::integer, actions, "random MDP: actions"},
          {"gamma", Kind::real, 0.9, "random MDP: discount"},
          {"branching", Kind::integer, 0, "random MDP: successors per row, 0 for dense"}};
}

std::vector<Field> gen_fields() {
  return {{"states", Kind::integer, 64, "micro states"},
          {"abstract_states", Kind::integer, 32, "abstract states, must divide states"},
          {"actions", Kind::integer, 2, "actions"},
          {"branching", Kind::integer, 4, "successors per transition row"},
          {"noise", Kind::real, 1.0, "max optimal-value gap inside an abstract state"},
          {"delta", Kind::real, 5e-6, "mass added to every transition before renormalizing"},
          {"gamma", Kind::real, 0.9, "discount"},
          {"gap_min", Kind::real, 1e-3, "smallest sub-optimality gap"},
          {"gap_max", Kind::real, 1.0, "largest sub-optimality gap"}};
}

grl::GenSpec gen_spec(const Context& c) {
  grl::GenSpec s;
  s.n_states = c.size("states");
  s.n_abstract = c.size("abstract_states");
  s.n_actions = c.size("actions");
  s.branching = c.size("branching");
  s.noise = c.real("noise");
  s.delta = c.real("delta");
  s.gamma = c.real("gamma");
  s.gap_min = c.real("gap_min");
  s.gap_max = c.real("gap_max");
  s.seed = c.seed;
  return s;
}

void run_qlearn(Context& c) {
  const auto domain = pick<grl::Domain>("domain", c.text("domain"), {{"ex1", grl::Domain::ex1}, {"ex2", grl::Domain::ex2}});
  grl::RunConfig rc;
  rc.gamma = c.real("gamma");
  rc.steps = c.size("steps");
  rc.n_runs = c.size("runs");
  rc.q_init = c.reals("q_init");
  rc.record_every = c.size("record_every");
  rc.seed = c.seed;
  const auto sched = c.text("schedule");
  if (sched == "harmonic")
    rc.schedule = grl::LearningRateSchedule::harmonic();
  else if (sched == "polynomial")
    rc.schedule = grl::LearningRateSchedule::polynomial(c.real("omega"));
  else
    throw ConfigError("field 'schedule': unknown value '" + sched + "' (expected harmonic or polynomial)");
  const grl::DomainParams dp{c.real("gamma"), c.real("p_min")};
  const auto dom = grl::make_domain(domain, dp);
  const auto res = grl::convergence_experiment(*dom.env, dom.psi, rc);

  std::vector<grl::CsvRow> rows;
  for (const auto& r : res.rows) rows.push_back({cell(r.step), cell(r.run_stat), cell(r.state), cell(r.action), cell(r.mean), cell(r.std)});
  c.csv("", {"step", "runs", "state", "action", "mean", "std"}, rows);

  const auto means = res.terminal_means();
  std::vector<double> qstar;
  for (std::size_t s = 0; s < dom.q_star.n_states; ++s)
    for (std::size_t a = 0; a < dom.q_star.n_actions; ++a) qstar.push_back(dom.q_star(s, a));
  double err = 0;
  for (std::size_t k = 0; k < means.size(); ++k) err = std::max(err, std::abs(means[k] - qstar[k]));
  c.summary["terminal_means"] = means;
  c.summary["q_star"] = qstar;
  c.summary["max_abs_error"] = err;
  if (domain == grl::Domain::ex2) {
    const auto ref = grl::example2_reference_table();
    double e2 = 0;
    for (std::size_t k = 0; k < means.size(); ++k) e2 = std::max(e2, std::abs(means[k] - ref[k]));
    c.summary["reference_table"] = ref;
    c.summary["max_abs_error_reference"] = e2;
  }
}

void run_surrogate(Context& c) {
  const auto m = input_mdp(c);
  auto labels = c.sizes("labels");
  if (labels.empty()) {
    const std::size_t k = c.size("blocks");
    if (k == 0 || k > m.n_states()) throw ConfigError("field 'blocks' must lie in [1, states] when 'labels' is empty");
    for (std::size_t x = 0; x < m.n_states(); ++x) labels.push_back(x * k / m.n_states());
  }
  if (labels.size() != m.n_states()) throw ConfigError("field 'labels' must have one entry per state");
  const auto psi = grl::Abstraction::tabular(labels);
  const auto mode = c.text("dispersion");
  grl::SurrogateMDP sur;
  if (mode == "uniform")
    sur = grl::build_surrogate(m, psi, grl::Dispersion::uniform(psi, m.n_actions()));
  else if (mode == "stationary")
    sur = grl::build_surrogate(m, psi, grl::dispersion_from_stationary(m, psi), grl::DispersionSource::stationary_of_policy);
  else
    throw ConfigError("field 'dispersion': unknown value '" + mode + "' (expected uniform or stationary)");

  const auto& s = sur.mdp;
  std::vector<grl::CsvRow> rows;
  for (std::size_t i = 0; i < s.n_states(); ++i)
    for (std::size_t a = 0; a < s.n_actions(); ++a)
      for (std::size_t t = 0; t < s.n_states(); ++t)
        if (s.p(i, a, t) > 0) rows.push_back({cell(i), cell(a), cell(s.r(i, a)), cell(t), cell(s.p(i, a, t))});
  c.csv("", {"state", "action", "reward", "next_state", "probability"}, rows);
  c.mdp("", s);

  const auto qstar = grl::avi(m, grl::kOracleTheta);
  const auto qs = grl::avi(s, grl::kOracleTheta);
  std::vector<std::size_t> act(m.n_states());
  for (std::size_t x = 0; x < m.n_states(); ++x) act[x] = qs.greedy(psi.label(x));
  const auto v = grl::pe_exact(m, grl::Policy::deterministic(act, m.n_actions()));
  double loss = 0;
  for (std::size_t x = 0; x < m.n_states(); ++x) loss = std::max(loss, qstar.max(x) - v[x]);
  std::vector<double> vs;
  for (std::size_t i = 0; i < s.n_states(); ++i) vs.push_back(qs.max(i));
  c.summary["abstraction_id"] = sur.provenance.abstraction_id;
  c.summary["dispersion"] = grl::to_string(sur.provenance.source);
  c.summary["abstract_states"] = s.n_states();
  c.summary["qdp_gap"] = grl::check_qdp(m, psi, 0.0, qstar).worst_gap;
  c.summary["surrogate_values"] = vs;
  c.summary["uplift_actions"] = act;
  c.summary["uplift_loss"] = loss;
}

void run_homo(Context& c) {
  const auto which = c.text("case");
  const double g = c.real("gamma");
  if (which == "random") {
    grl::Rng root(c.seed);
    std::vector<grl::CsvRow> rows;
    std::size_t violations = 0;
    double worst_ratio = 0;
    for (std::size_t i = 0; i < c.size("instances"); ++i) {
      grl::Rng rng = root.split(i);
      const auto inst = grl::random_q_uniform_instance(c.size("abstract_states"), c.size("abstract_actions"), c.size("states"),
                                                       c.size("actions"), g, c.real("noise"), rng);
      const auto rep = grl::verify_value_loss(inst.mdp, inst.homo, grl::HomoDispersion::uniform(inst.homo), inst.eps);
      rows.push_back({cell(i), cell(inst.eps), cell(rep.bound), cell(rep.observed), cell(rep.holds)});
      if (!rep.holds) ++violations;
      if (rep.bound > 0) worst_ratio = std::max(worst_ratio, rep.observed / rep.bound);
    }
    c.csv("", {"instance", "eps", "bound", "observed", "holds"}, rows);
    c.summary["instances"] = rows.size();
    c.summary["violations"] = violations;
    c.summary["worst_observed_over_bound"] = worst_ratio;
    return;
  }
  const auto rc = pick<grl::RegionCase>("case", which,
                                        {{"nonmdp", grl::RegionCase::nonmdp},
                                         {"approx_q", grl::RegionCase::approx_q},
                                         {"approx_policy", grl::RegionCase::approx_policy}});
  const auto ex = grl::make_region_example(rc, g, c.real("eps"), c.real("eps2"));
  const auto q = grl::avi(ex.mrp, grl::kOracleTheta);
  std::vector<grl::CsvRow> rows;
  double err = 0;
  for (std::size_t i = 0; i < ex.q.size(); ++i) {
    const double e = std::abs(q(i, 0) - ex.q[i]);
    err = std::max(err, e);
    rows.push_back({cell(ex.regions[i]), cell(ex.q[i]), cell(q(i, 0)), cell(e)});
  }
  c.csv("", {"region", "q_closed", "q_solved", "abs_error"}, rows);
  c.summary["max_abs_error"] = err;
  c.summary["q_uniformity_gap"] = grl::check_q_homo(ex.mrp, ex.homo, 0.0, q).worst_gap;
}

void run_binarize(Context& c) {
  const auto m = input_mdp(c);
  const grl::ActionCodec codec(m.n_actions(), c.size("base"));
  const auto seq = grl::sequentialize_markov(m, codec);
  c.mdp("sequential", seq);
  const auto q = grl::pi(m, 1e-12).q;
  const auto qs = grl::pi(seq, 1e-12).q;
  const grl::AugmentedIndex idx(codec);
  std::vector<grl::CsvRow> rows;
  double err = 0;
  for (std::size_t o = 0; o < m.n_states(); ++o)
    for (std::size_t a = 0; a < m.n_actions(); ++a) {
      auto w = codec.encode(a);
      const std::size_t last = w.back();
      const auto word = join(w, '.');
      w.pop_back();
      const double v = qs(idx(o, w), last);
      err = std::max(err, std::abs(v - q(o, a)));
      rows.push_back({cell(o), cell(a), cell(word), cell(q(o, a)), cell(v), cell(std::abs(v - q(o, a)))});
    }
  c.csv("", {"state", "action", "code", "q_original", "q_sequential", "abs_error"}, rows);

  const auto rel = grl::check_q_relationship(m, codec, c.real("tol"));
  const auto up = grl::uplift_sequential(qs, codec, m.n_states());
  const auto v = grl::pe_exact(m, grl::Policy::deterministic(up, m.n_actions()));
  double loss = 0;
  for (std::size_t x = 0; x < m.n_states(); ++x) loss = std::max(loss, q.max(x) - v[x]);
  const grl::SubDiscount sd{m.gamma(), codec.depth()};
  c.summary["depth"] = codec.depth();
  c.summary["padded_codes"] = codec.n_padded();
  c.summary["sequential_states"] = seq.n_states();
  c.summary["lambda"] = sd.lambda();
  c.summary["lambda_pow_depth"] = sd.pow(codec.depth());
  c.summary["complete_decision_error"] = err;
  c.summary["relation_holds"] = rel.holds;
  c.summary["relation_max_deviation"] = rel.max_deviation;
  c.summary["uplift_actions"] = up;
  c.summary["uplift_loss"] = loss;
}

void run_bounds(Context& c) {
  const auto eps_s = c.text("eps"), gamma_s = c.text("gamma");
  const auto eps = grl::parse_decimal(eps_s), gamma = grl::parse_decimal(gamma_s);
  const int digits = static_cast<int>(c.size("digits"));
  std::vector<grl::CsvRow> rows;
  json table = json::array();
  for (auto n : c.sizes("actions")) {
    const auto a = grl::esa_bound(eps, gamma, n);
    const auto b = grl::binarized_esa_bound(eps, gamma, n);
    const grl::Rational ratio = a / b;
    rows.push_back({cell(eps_s), cell(gamma_s), cell(n), cell(grl::format_scientific(a, digits)),
                    cell(grl::format_scientific(b, digits)), cell(grl::format_scientific(ratio, digits))});
    table.push_back({{"actions", n}, {"esa", grl::format_scientific(a, digits)}, {"binarized", grl::format_scientific(b, digits)},
                     {"binarized_smaller", b < a}});
  }
  c.csv("", {"eps", "gamma", "actions", "esa", "binarized", "ratio"}, rows);
  c.summary["rows"] = table;
}

void run_vaexp(Context& c) {
  const auto spec = gen_spec(c);
  grl::VAOptions opt;
  opt.discard_optimal = c.flag("discard");
  opt.max_attempts = c.size("max_attempts");
  const auto res = grl::run_va_experiment(spec, c.size("n_mdps"), opt);
  std::vector<grl::CsvRow> rows;
  for (const auto& r : res.rows)
    rows.push_back({cell(r.mdp), cell(r.state), cell(r.v_star), cell(r.v_pi), cell(r.diff), cell(r.rho), cell(r.neg_log2_rho)});
  c.csv("", {"mdp", "state", "v_star", "v_pi", "diff", "rho", "neg_log2_rho"}, rows);
  std::vector<grl::CsvRow> macro;
  for (std::size_t i = 0; i < res.macro.size(); ++i) macro.push_back({cell(i), cell(res.macro[i]), cell(res.loss[i])});
  c.csv("macro", {"mdp", "macro", "loss"}, macro);
  c.summary["generated"] = res.generated;
  c.summary["kept"] = res.kept;
  c.summary["discarded"] = res.discarded;
  if (res.pcc)
    c.summary["pcc"] = {{"r", res.pcc->r}, {"p", res.pcc->p}, {"n", res.pcc->n}};
  else
    c.summary["pcc"] = nullptr;
  double mx = 0;
  for (double v : res.macro) mx = std::max(mx, v);
  c.summary["max_macro"] = mx;
}

void run_vpdp(Context& c) {
  auto spec = gen_spec(c);
  spec.mode = pick<grl::GenMode>("mode", c.text("mode"),
                                 {{"va", grl::GenMode::va}, {"vpdp", grl::GenMode::vpdp}, {"broken", grl::GenMode::broken}});
  spec.eps2 = c.real("eps2");
  const auto rep = grl::vpdp_search(spec, c.size("n_mdps"), c.real("c"));
  std::vector<grl::CsvRow> rows;
  for (std::size_t i = 0; i < rep.losses.size(); ++i)
    rows.push_back({cell(i), cell(rep.losses[i]), cell(rep.losses[i] > rep.threshold + 1e-9)});
  c.csv("", {"instance", "loss", "counterexample"}, rows);
  c.summary["threshold"] = rep.threshold;
  c.summary["worst_loss"] = rep.worst_loss;
  c.summary["counterexamples"] = rep.counterexamples.size();
}

void run_order(Context& c) {
  const auto f = grl::qdp_fixture(c.seed);
  const double eps = c.real("eps");
  grl::MapClass cls(f.mdp, f.maps, eps);
  const auto kind = pick<grl::OrderKind>("order", c.text("order"), {{"eps", grl::OrderKind::eps}, {"cpd", grl::OrderKind::cpd}});
  const std::size_t start = c.size("start");
  if (start >= f.maps.size()) throw ConfigError("field 'start' must index a map of the class (0.." + std::to_string(f.maps.size() - 1) + ")");
  const auto res = grl::aleo(cls, kind, eps, c.size("budget"), start);
  std::vector<grl::CsvRow> rows;
  for (const auto& s : res.trace)
    rows.push_back({cell(s.iteration), cell(f.names[s.candidate]), cell(f.names[s.competitor]),
                    cell(std::string(s.replaced ? "replace" : "keep")), cell(static_cast<std::size_t>(s.case_fired))});
  c.csv("trace", {"iteration", "candidate_id", "competitor_id", "decision", "case_fired"}, rows);
  std::vector<grl::CsvRow> maps;
  for (std::size_t i = 0; i < f.maps.size(); ++i)
    maps.push_back({cell(f.names[i]), cell(grl::abstraction_id(f.maps[i])), cell(f.maps[i].n_states()), cell(cls.label(f.maps[i]))});
  c.csv("maps", {"name", "abstraction_id", "states", "label"}, maps);
  c.summary["chosen"] = f.names[res.chosen];
  c.summary["chosen_states"] = res.map.n_states();
  c.summary["chosen_label"] = cls.label(res.map);
  c.summary["star_label"] = cls.label(f.maps[0]);
  c.summary["comparisons"] = res.trace.size();
  c.summary["resets"] = res.resets;
  c.summary["stable"] = res.stable;
  c.summary["ambiguous_labels"] = cls.store().ambiguous();
}

std::vector<Command> commands() {
  std::vector<Command> cs;
  cs.push_back({"qlearn",
                "tabular Q-learning on an example domain, mean and std of Q across runs",
                {{"domain", Kind::text, nullptr, "ex1 or ex2"},
                 {"gamma", Kind::real, nullptr, "discount"},
                 {"p_min", Kind::real, 0.01, "ex2: acceptance floor"},
                 {"steps", Kind::integer, 100000, "steps per run"},
                 {"runs", Kind::integer, 1, "independent runs"},
                 {"q_init", Kind::real_list, json::array({0.0}), "initial Q, one value or one per (state, action)"},
                 {"record_every", Kind::integer, 1000, "trace interval"},
                 {"schedule", Kind::text, "polynomial", "harmonic or polynomial"},
                 {"omega", Kind::real, 0.75, "polynomial learning-rate exponent"}},
                run_qlearn});
  auto sf = mdp_fields(8, 2);
  sf.push_back({"labels", Kind::int_list, json::array(), "abstract label of every state"});
  sf.push_back({"blocks", Kind::integer, 2, "contiguous blocks when labels is empty"});
  sf.push_back({"dispersion", Kind::text, "uniform", "uniform or stationary"});
  cs.push_back({"surrogate", "surrogate MDP of a state aggregation and its uplifted policy", sf, run_surrogate});
  cs.push_back({"homo",
                "region examples for homomorphisms, or the value-loss bound on random instances",
                {{"case", Kind::text, "approx_q", "nonmdp, approx_q, approx_policy or random"},
                 {"gamma", Kind::real, 0.9, "discount"},
                 {"eps", Kind::real, 0.1, "region examples: eps"},
                 {"eps2", Kind::real, 0.05, "region examples: eps'"},
                 {"instances", Kind::integer, 100, "random: instances"},
                 {"abstract_states", Kind::integer, 3, "random: abstract states"},
                 {"abstract_actions", Kind::integer, 2, "random: abstract actions"},
                 {"states", Kind::integer, 8, "random: underlying states"},
                 {"actions", Kind::integer, 3, "random: underlying actions"},
                 {"noise", Kind::real, 0.01, "random: perturbation size"}},
                run_homo});
  auto bf = mdp_fields(6, 4);
  bf.push_back({"base", Kind::integer, 2, "code alphabet size"});
  bf.push_back({"tol", Kind::real, 1e-8, "tolerance of the value relation check"});
  cs.push_back({"binarize", "sequentialized MDP and its value relation to the original", bf, run_binarize});
  cs.push_back({"bounds",
                "state-count bounds of the extreme aggregation, original against binarized actions",
                {{"eps", Kind::decimal, nullptr, "aggregation tolerance"},
                 {"gamma", Kind::decimal, nullptr, "discount"},
                 {"actions", Kind::int_list, nullptr, "action counts"},
                 {"digits", Kind::integer, 4, "digits after the decimal point"}},
                run_bounds});
  auto vf = gen_fields();
  vf.push_back({"n_mdps", Kind::integer, 200, "instances kept"});
  vf.push_back({"discard", Kind::boolean, true, "drop instances whose uplifted policy is optimal"});
  vf.push_back({"max_attempts", Kind::integer, 0, "generation cap, 0 for 20 * n_mdps"});
  cs.push_back({"vaexp", "value-uniform aggregation: uplift loss against stationary mass", vf, run_vaexp});
  auto pf = gen_fields();
  for (auto& f : pf) {
    if (f.name == "abstract_states") f.fallback = 16;
    if (f.name == "gap_min") f.fallback = 1.0;
    if (f.name == "gap_max") f.fallback = 2.0;
  }
  pf.push_back({"mode", Kind::text, "vpdp", "vpdp, va or broken"});
  pf.push_back({"eps2", Kind::real, 1.0, "vpdp: floor of sub-optimality gaps"});
  pf.push_back({"n_mdps", Kind::integer, 200, "instances"});
  pf.push_back({"c", Kind::real, 1.0, "counterexample threshold factor on noise"});
  cs.push_back({"vpdp", "search for uplift losses above c * noise", pf, run_vpdp});
  cs.push_back({"order",
                "candidate/competitor search over a fixed map class",
                {{"order", Kind::text, "eps", "eps or cpd"},
                 {"eps", Kind::real, 1e-6, "label tolerance"},
                 {"budget", Kind::integer, 15, "comparison budget"},
                 {"start", Kind::integer, 0, "index of the first candidate"}},
                run_order});
  return cs;
}

const Command& find_command(const std::vector<Command>& cs, const std::string& name) {
  for (auto& c : cs)
    if (c.name == name) return c;
  throw ConfigError("unknown command '" + name + "'");
}

json read_json(const fs::path& p) {
  std::ifstream f(p);
  if (!f) throw ConfigError("cannot read config " + p.string());
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError(p.string() + ": " + e.what());
  }
}

fs::path preset_path(const std::string& name) {
  if (name.find('/') != std::string::npos || name.ends_with(".json")) return name;
  return fs::path(GRL_PRESET_DIR) / (name + ".json");
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

json versions() {
  return {{"grl", GRL_VERSION},
          {"compiler", std::string("g++ ") + __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                        std::to_string(BOOST_VERSION % 100)},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"cli11", CLI11_VERSION}};
}

// layer one config document ({command, seed, output_dir, params}) onto the merged one
void layer(json& merged, const json& doc, const std::string& origin) {
  if (!doc.is_object()) throw ConfigError(origin + ": top level must be an object");
  for (auto& [k, v] : doc.items()) {
    if (k == "params") {
      if (!v.is_object()) throw ConfigError(origin + ": 'params' must be an object");
      for (auto& [pk, pv] : v.items()) merged["params"][pk] = pv;
    } else if (k == "command" || k == "output_dir") {
      if (!v.is_string()) throw ConfigError(origin + ": '" + k + "' must be a string");
      merged[k] = v;
    } else if (k == "seed") {
      if (!v.is_number_unsigned()) throw ConfigError(origin + ": 'seed' must be a non-negative integer");
      merged[k] = v;
    } else if (k != "description") {
      throw ConfigError(origin + ": unknown top-level key '" + k + "'");
    }
  }
}

struct RunArgs {
  std::string command, config, preset, output_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> extras;
};

int run(const RunArgs& a) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cs = commands();
  json merged = {{"seed", 1}, {"params", json::object()}};
  if (!a.preset.empty()) layer(merged, read_json(preset_path(a.preset)), "preset " + a.preset);
  if (!a.config.empty()) layer(merged, read_json(a.config), a.config);
  if (!a.command.empty()) {
    if (merged.contains("command") && merged["command"] != a.command)
      throw ConfigError("command '" + a.command + "' conflicts with configured command " + merged["command"].dump());
    merged["command"] = a.command;
  }
  if (!merged.contains("command")) throw ConfigError("no command given");
  const auto& cmd = find_command(cs, merged["command"].get<std::string>());
  if (a.seed) merged["seed"] = *a.seed;

  // --name value / --name=value pairs
  for (std::size_t i = 0; i < a.extras.size(); ++i) {
    std::string key = a.extras[i], value;
    if (!key.starts_with("--")) throw ConfigError("unexpected argument '" + key + "'");
    key = key.substr(2);
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else {
      if (i + 1 >= a.extras.size()) throw ConfigError("field '" + key + "': missing value");
      value = a.extras[++i];
    }
    for (auto& ch : key)
      if (ch == '-') ch = '_';
    const Field* f = nullptr;
    for (auto& x : cmd.fields)
      if (x.name == key) f = &x;
    if (!f) throw ConfigError("unknown field '" + key + "' for command " + cmd.name);
    merged["params"][key] = from_text(*f, value);
  }

  json params = json::object();
  for (auto& [k, v] : merged["params"].items()) {
    bool known = false;
    for (auto& f : cmd.fields) known = known || f.name == k;
    if (!known) throw ConfigError("unknown field '" + k + "' for command " + cmd.name);
  }
  for (auto& f : cmd.fields) {
    if (merged["params"].contains(f.name))
      params[f.name] = coerce(f, merged["params"][f.name]);
    else if (f.fallback.is_null())
      throw ConfigError("missing required field '" + f.name + "' for command " + cmd.name);
    else
      params[f.name] = f.fallback;
  }
  merged["params"] = params;

  fs::path out = merged.value("output_dir", std::string("."));
  if (const char* env = std::getenv("GRL_OUTPUT_DIR"); env && *env) out = env;
  if (!a.output_dir.empty()) out = a.output_dir;
  merged.erase("output_dir");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw grl::IoError("cannot create output directory " + out.string());

  Context ctx;
  ctx.command = cmd.name;
  ctx.seed = merged["seed"].get<std::uint64_t>();
  ctx.out_dir = out;
  ctx.params = params;
  cmd.run(ctx);

  ctx.summary["command"] = cmd.name;
  ctx.summary["seed"] = ctx.seed;
  ctx.summary["params"] = params;
  {
    const auto p = ctx.path("", ".json");
    std::ofstream f(p, std::ios::binary);
    f << ctx.summary.dump(2) << '\n';
    if (!f) throw grl::IoError("write to " + p.string() + " failed");
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  json manifest = {{"command", cmd.name},
                   {"seed", ctx.seed},
                   {"inputs_hash", "fnv1a64:" + hex(fnv1a(merged.dump()))},
                   {"config", merged},
                   {"outputs", ctx.outputs},
                   {"versions", versions()},
                   {"threads", 1},
                   {"wall_time_s", wall}};
  {
    const auto p = out / (ctx.stem() + "_manifest.json");
    std::ofstream f(p, std::ios::binary);
    f << manifest.dump(2) << '\n';
    if (!f) throw grl::IoError("write to " + p.string() + " failed");
  }
  std::cout << manifest.dump(2) << '\n';
  return 0;
}

void list(std::ostream& os) {
  for (auto& c : commands()) {
    os << c.name << ": " << c.help << '\n';
    for (auto& f : c.fields)
      os << "  --" << f.name << " (" << kind_name(f.kind) << (f.fallback.is_null() ? ", required" : ", default " + f.fallback.dump())
         << ") " << f.help << '\n';
  }
  std::error_code ec;
  std::vector<std::string> names;
  for (auto& e : fs::directory_iterator(GRL_PRESET_DIR, ec))
    if (e.path().extension() == ".json") names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  os << "presets:";
  for (auto& n : names) os << ' ' << n;
  os << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"grl experiment driver"};
  app.require_subcommand(1);
  RunArgs args;
  std::uint64_t seed = 0;
  auto* runc = app.add_subcommand(
      "run", "run <command> [options] [--field value ...]; command is qlearn, surrogate, homo, binarize, bounds, vaexp, vpdp or order");
  runc->add_option("--config", args.config, "JSON config {command, seed, output_dir, params}");
  runc->add_option("--preset", args.preset, "preset name or path");
  runc->add_option("--output-dir", args.output_dir, "output directory (beats GRL_OUTPUT_DIR)");
  auto* seed_opt = runc->add_option("--seed", seed, "root seed");
  runc->allow_extras();
  app.add_subcommand("list", "commands, fields and presets");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (app.got_subcommand("list")) {
    list(std::cout);
    return 0;
  }
  if (*seed_opt) args.seed = seed;
  args.extras = runc->remaining();
  if (!args.extras.empty() && !args.extras.front().starts_with("-")) {
    args.command = args.extras.front();
    args.extras.erase(args.extras.begin());
  }
  try {
    return run(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << '\n';
    return 2;
  }
}
