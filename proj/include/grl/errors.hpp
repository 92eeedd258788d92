#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace grl {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NonStochasticRow : Error {
  std::size_t state, action;
  double sum;
  NonStochasticRow(std::size_t s, std::size_t a, double total)
      : Error("row (" + std::to_string(s) + "," + std::to_string(a) +
              ") sums to " + std::to_string(total)),
        state(s), action(a), sum(total) {}
};

struct BadGamma : Error {
  explicit BadGamma(double g) : Error("discount must lie in [0,1), got " + std::to_string(g)) {}
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct NoConvergence : Error {
  std::size_t iterations;
  NoConvergence(const std::string& what, std::size_t iters)
      : Error(what + " did not converge within " + std::to_string(iters) + " iterations"),
        iterations(iters) {}
};

struct SingularEvaluation : Error {
  using Error::Error;
};

struct UnknownState : Error {
  std::size_t state;
  explicit UnknownState(std::size_t s)
      : Error("state " + std::to_string(s) + " is outside the policy table"), state(s) {}
};

struct InvalidDispersion : Error {
  using Error::Error;
};

struct PreconditionViolated : Error {
  using Error::Error;
};

struct HistoryTooShort : Error {
  std::size_t length, needed;
  HistoryTooShort(std::size_t len, std::size_t need)
      : Error("history of length " + std::to_string(len) + " needs more than " +
              std::to_string(need) + " percepts"),
        length(len), needed(need) {}
};

struct DegenerateVariance : Error {
  using Error::Error;
};

struct GenerationFailed : Error {
  using Error::Error;
};

struct BadBase : Error {
  explicit BadBase(std::size_t b) : Error("codec base must be >= 2, got " + std::to_string(b)) {}
};

struct ParseError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace grl
