#pragma once

#include <cstddef>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "finite_mdp.hpp"

namespace grl {

// Text format (whitespace separated, '#' starts a comment):
//
//   states  <n>
//   actions <m>
//   gamma   <g>
//   bounds  <r_min> <r_max>      optional
//   transition
//     n*m rows of n probabilities, row (s,a) at position s*m + a
//   reward
//     n rows of m rewards
inline FiniteMDP read_mdp(std::istream& in) {
  std::vector<std::string> tok;
  std::string line;
  while (std::getline(in, line)) {
    if (auto c = line.find('#'); c != std::string::npos) line.erase(c);
    std::istringstream ls(line);
    std::string t;
    while (ls >> t) tok.push_back(t);
  }
  std::size_t pos = 0;
  auto take = [&](const char* what) -> const std::string& {
    if (pos >= tok.size()) throw ParseError(std::string("unexpected end of input, expected ") + what);
    return tok[pos++];
  };
  auto number = [&](const char* what) {
    const std::string& t = take(what);
    try {
      std::size_t used = 0;
      double v = std::stod(t, &used);
      if (used != t.size()) throw ParseError("");
      return v;
    } catch (...) {
      throw ParseError(std::string("bad number '") + t + "' for " + what);
    }
  };
  auto count = [&](const char* what) {
    double v = number(what);
    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw ParseError(std::string(what) + " must be a positive integer");
    return static_cast<std::size_t>(v);
  };
  auto keyword = [&](const std::string& k) {
    const std::string& t = take(k.c_str());
    if (t != k) throw ParseError("expected '" + k + "', found '" + t + "'");
  };

  keyword("states");
  const std::size_t n = count("states");
  keyword("actions");
  const std::size_t m = count("actions");
  keyword("gamma");
  const double g = number("gamma");
  std::optional<std::pair<double, double>> bounds;
  if (pos < tok.size() && tok[pos] == "bounds") {
    ++pos;
    double lo = number("r_min"), hi = number("r_max");
    bounds = {lo, hi};
  }
  keyword("transition");
  std::vector<double> p(n * m * n);
  for (auto& v : p) v = number("transition entry");
  keyword("reward");
  std::vector<double> r(n * m);
  for (auto& v : r) v = number("reward entry");
  if (pos != tok.size()) throw ParseError("trailing input after reward table");
  FiniteMDP mdp(n, m, std::move(p), std::move(r), g);
  if (bounds) mdp.set_reward_bounds(bounds->first, bounds->second);
  return mdp;
}

inline void write_mdp(std::ostream& out, const FiniteMDP& m) {
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "states " << m.n_states() << "\nactions " << m.n_actions() << "\ngamma " << m.gamma()
      << "\nbounds " << m.r_min() << ' ' << m.r_max() << "\ntransition\n";
  for (std::size_t s = 0; s < m.n_states(); ++s)
    for (std::size_t a = 0; a < m.n_actions(); ++a) {
      for (std::size_t t = 0; t < m.n_states(); ++t) out << (t ? " " : "") << m.p(s, a, t);
      out << '\n';
    }
  out << "reward\n";
  for (std::size_t s = 0; s < m.n_states(); ++s) {
    for (std::size_t a = 0; a < m.n_actions(); ++a) out << (a ? " " : "") << m.r(s, a);
    out << '\n';
  }
}

inline FiniteMDP load_mdp(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  return read_mdp(f);
}

inline void save_mdp(const std::string& path, const FiniteMDP& m) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  write_mdp(f, m);
}

}  // namespace grl
