#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "env.hpp"
#include "planners.hpp"

namespace grl {

// Fixed-length codes over {0..base-1}. Codes are assigned to action indices in
// lexicographic order; codes past the last action alias it.
class ActionCodec {
 public:
  ActionCodec() = default;
  ActionCodec(std::size_t n_actions, std::size_t base) : n_(n_actions), base_(base) {
    if (base < 2) throw BadBase(base);
    if (n_actions == 0) throw PreconditionViolated("codec needs at least one action");
    depth_ = 1;
    size_ = base;
    while (size_ < n_actions) {
      size_ *= base;
      ++depth_;
    }
  }

  std::size_t n_actions() const { return n_; }
  std::size_t base() const { return base_; }
  std::size_t depth() const { return depth_; }
  std::size_t n_codes() const { return size_; }
  std::size_t n_padded() const { return size_ - n_; }

  // code word of an extended action index, most significant symbol first
  std::vector<std::size_t> code(std::size_t k) const {
    if (k >= size_) throw PreconditionViolated("extended action out of range");
    std::vector<std::size_t> w(depth_);
    for (std::size_t i = depth_; i-- > 0;) {
      w[i] = k % base_;
      k /= base_;
    }
    return w;
  }

  std::vector<std::size_t> encode(std::size_t a) const {
    if (a >= n_) throw PreconditionViolated("action out of range");
    return code(a);
  }

  std::size_t index(const std::vector<std::size_t>& w) const {
    if (w.size() != depth_) throw ShapeMismatch("code word has wrong length");
    std::size_t k = 0;
    for (auto x : w) {
      if (x >= base_) throw PreconditionViolated("symbol out of range");
      k = k * base_ + x;
    }
    return k;
  }

  std::size_t original(std::size_t k) const { return k < n_ ? k : n_ - 1; }
  std::size_t decode(const std::vector<std::size_t>& w) const { return original(index(w)); }

 private:
  std::size_t n_ = 0, base_ = 2, depth_ = 1, size_ = 2;
};

inline ActionCodec make_codec(std::size_t n_actions, std::size_t base) { return ActionCodec(n_actions, base); }

// gamma^(k/d); the full power k = d returns gamma itself.
struct SubDiscount {
  double gamma = 0;
  std::size_t d = 1;

  double pow(std::size_t k) const {
    if (k % d == 0) return std::pow(gamma, static_cast<double>(k / d));
    return std::pow(gamma, static_cast<double>(k) / static_cast<double>(d));
  }
  double lambda() const { return pow(1); }
};

// Prefix states (o, x_1..x_i), i < d, numbered o*P + (B^i-1)/(B-1) + value(x).
struct AugmentedIndex {
  std::size_t base = 2, depth = 1, per_obs = 1;

  explicit AugmentedIndex(const ActionCodec& c) : base(c.base()), depth(c.depth()) {
    per_obs = 0;
    std::size_t p = 1;
    for (std::size_t i = 0; i < depth; ++i, p *= base) per_obs += p;
  }

  std::size_t operator()(std::size_t o, const std::vector<std::size_t>& prefix) const {
    std::size_t offset = 0, p = 1, v = 0;
    for (std::size_t i = 0; i < prefix.size(); ++i, p *= base) offset += p;
    for (auto x : prefix) v = v * base + x;
    return o * per_obs + offset + v;
  }
};

enum class SeqObservation { repeat, augmented };

// Symbol-at-a-time wrapper around a history environment. Between real steps
// the reward is 0 and the observation is the last real one (or the index of
// the augmented prefix state).
class SeqEnv {
 public:
  SeqEnv(const HistoryEnv& inner, ActionCodec codec, SeqObservation mode = SeqObservation::repeat)
      : inner_(&inner), codec_(std::move(codec)), index_(codec_), mode_(mode) {
    if (codec_.n_actions() != inner.n_actions()) throw ShapeMismatch("codec does not match the action count");
    discount_ = {inner.gamma(), codec_.depth()};
    reset();
  }

  const ActionCodec& codec() const { return codec_; }
  double lambda() const { return discount_.lambda(); }
  const SubDiscount& discount() const { return discount_; }
  const History& inner_history() const { return history_; }
  const std::vector<std::size_t>& pending() const { return buffer_; }

  void reset() {
    history_ = inner_->initial_history();
    buffer_.clear();
  }

  Percept current() const {
    const std::size_t o = history_.back().observation;
    return {mode_ == SeqObservation::repeat ? o : index_(o, buffer_), 0.0};
  }

  Percept step(std::size_t symbol, Rng& rng) {
    if (symbol >= codec_.base()) throw PreconditionViolated("symbol out of range");
    buffer_.push_back(symbol);
    if (buffer_.size() < codec_.depth()) return current();
    const std::size_t a = codec_.decode(buffer_);
    buffer_.clear();
    Percept e = inner_->sample(history_, a, rng, scratch_);
    history_ = history_.extend(a, e);
    if (auto mem = inner_->memory(); mem && history_.retained() > 2 * *mem + 64) history_ = history_.trimmed(*mem);
    if (mode_ == SeqObservation::augmented) e.observation = index_(e.observation, {});
    return e;
  }

 private:
  const HistoryEnv* inner_;
  ActionCodec codec_;
  AugmentedIndex index_;
  SeqObservation mode_;
  SubDiscount discount_;
  History history_;
  std::vector<std::size_t> buffer_;
  std::vector<Outcome> scratch_;
};

inline SeqEnv sequentialize(const HistoryEnv& env, const ActionCodec& codec,
                            SeqObservation mode = SeqObservation::repeat) {
  return SeqEnv(env, codec, mode);
}

// Explicit MDP over prefix states with actions = symbols and discount gamma^(1/d).
inline FiniteMDP sequentialize_markov(const FiniteMDP& m, const ActionCodec& codec) {
  if (codec.n_actions() != m.n_actions()) throw ShapeMismatch("codec does not match the action count");
  const AugmentedIndex idx(codec);
  const std::size_t B = codec.base(), d = codec.depth(), no = m.n_states();
  const std::size_t ns = no * idx.per_obs;
  std::vector<double> p(ns * B * ns, 0.0), r(ns * B, 0.0);
  std::vector<std::size_t> prefix;
  for (std::size_t o = 0; o < no; ++o) {
    for (std::size_t i = 0, count = 1; i < d; ++i, count *= B) {
      prefix.assign(i, 0);
      for (std::size_t v = 0; v < count; ++v) {
        for (std::size_t k = v, j = i; j-- > 0; k /= B) prefix[j] = k % B;
        const std::size_t s = idx(o, prefix);
        for (std::size_t x = 0; x < B; ++x) {
          auto next = prefix;
          next.push_back(x);
          if (i + 1 < d) {
            p[(s * B + x) * ns + idx(o, next)] = 1.0;
          } else {
            const std::size_t a = codec.decode(next);
            r[s * B + x] = m.r(o, a);
            for (std::size_t t = 0; t < no; ++t) p[(s * B + x) * ns + t * idx.per_obs] = m.p(o, a, t);
          }
        }
      }
    }
  }
  FiniteMDP out(ns, B, std::move(p), std::move(r), SubDiscount{m.gamma(), d}.lambda());
  out.set_reward_bounds(std::min(m.r_min(), 0.0), std::max(m.r_max(), 0.0));
  return out;
}

// Original action chosen by greedily following seq_q from (o, empty prefix).
inline std::vector<std::size_t> uplift_sequential(const QTable& seq_q, const ActionCodec& codec, std::size_t n_obs) {
  const AugmentedIndex idx(codec);
  std::vector<std::size_t> out(n_obs);
  for (std::size_t o = 0; o < n_obs; ++o) {
    std::vector<std::size_t> w;
    while (w.size() < codec.depth()) w.push_back(seq_q.greedy(idx(o, w)));
    out[o] = codec.decode(w);
  }
  return out;
}

struct QRelationReport {
  bool holds = false;
  double max_deviation = 0;
  std::size_t observation = 0;
  std::vector<std::size_t> prefix;  // x_1..x_i of the worst case
};

// Compares Q-bar*(o x_<i, x_i) with gamma^((d-i)/d) max over codes extending
// x_<=i of Q*(o, decode(code)), both sides solved by exact policy iteration.
inline QRelationReport check_q_relationship(const FiniteMDP& m, const ActionCodec& codec, double tol) {
  const auto seq = sequentialize_markov(m, codec);
  const QTable q = pi(m, 1e-12).q;
  const QTable qs = pi(seq, 1e-12).q;
  const AugmentedIndex idx(codec);
  const SubDiscount disc{m.gamma(), codec.depth()};
  const std::size_t B = codec.base(), d = codec.depth();
  QRelationReport rep;
  rep.max_deviation = -1;
  for (std::size_t o = 0; o < m.n_states(); ++o) {
    for (std::size_t k = 0; k < codec.n_codes(); ++k) {
      const auto w = codec.code(k);
      for (std::size_t i = 1; i <= d; ++i) {
        // codes sharing the first i symbols form a contiguous block
        std::size_t span = 1;
        for (std::size_t j = i; j < d; ++j) span *= B;
        if (k % span != 0) continue;
        double best = q(o, codec.original(k));
        for (std::size_t c = k + 1; c < k + span; ++c) best = std::max(best, q(o, codec.original(c)));
        const std::vector<std::size_t> head(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(i - 1));
        const double lhs = qs(idx(o, head), w[i - 1]);
        const double dev = std::abs(lhs - disc.pow(d - i) * best);
        if (dev > rep.max_deviation) {
          rep.max_deviation = dev;
          rep.observation = o;
          rep.prefix.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(i));
        }
      }
    }
  }
  rep.holds = rep.max_deviation <= tol;
  return rep;
}

using Rational = boost::multiprecision::cpp_rational;

// Exact rational value of a decimal literal such as "0.1" or "2.5e-3".
inline Rational parse_decimal(const std::string& text) {
  using boost::multiprecision::cpp_int;
  std::size_t pos = 0;
  bool neg = false;
  if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) neg = text[pos++] == '-';
  cpp_int digits = 0;
  long scale = 0;
  bool any = false, dot = false;
  for (; pos < text.size(); ++pos) {
    const char c = text[pos];
    if (c >= '0' && c <= '9') {
      digits = digits * 10 + (c - '0');
      if (dot) --scale;
      any = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      break;
    }
  }
  if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
    long e = 0;
    auto [ptr, ec] = std::from_chars(text.data() + pos + 1 + (text[pos + 1] == '+'), text.data() + text.size(), e);
    if (ec != std::errc() || ptr != text.data() + text.size()) throw ParseError("bad decimal: " + text);
    scale += e;
    pos = text.size();
  }
  if (!any || pos != text.size()) throw ParseError("bad decimal: " + text);
  Rational v(digits);
  cpp_int ten = 1;
  for (long i = 0; i < std::abs(scale); ++i) ten *= 10;
  v = scale >= 0 ? v * Rational(ten) : v / Rational(ten);
  return neg ? Rational(-v) : v;
}

// shortest round-trip decimal of x, read back exactly
inline Rational exact_decimal(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return parse_decimal(std::string(buf, ptr));
}

namespace detail {

inline void check_bound_args(const Rational& eps, const Rational& gamma, std::size_t n) {
  if (eps <= 0) throw PreconditionViolated("eps must be positive");
  if (gamma <= 0 || gamma >= 1) throw BadGamma(gamma.convert_to<double>());
  if (n < 2) throw PreconditionViolated("bound needs at least two actions");
}

inline Rational rpow(const Rational& x, std::size_t k) {
  Rational out = 1;
  for (std::size_t i = 0; i < k; ++i) out *= x;
  return out;
}

}  // namespace detail

// (2 / (eps (1-gamma)^3))^|A|
inline Rational esa_bound(const Rational& eps, const Rational& gamma, std::size_t n_actions) {
  detail::check_bound_args(eps, gamma, n_actions);
  const Rational base = Rational(2) / (eps * detail::rpow(1 - gamma, 3));
  return detail::rpow(base, n_actions);
}

// ceil(1 - gamma + lb n)
inline std::size_t binarized_ceiling(const Rational& gamma, std::size_t n) {
  std::size_t k = 0;
  while ((std::size_t{2} << k) <= n) ++k;  // 2^k <= n < 2^(k+1)
  if ((std::size_t{1} << k) == n) return k + 1;
  // lb n - k is irrational here, so the comparison with gamma is never a tie
  using F = boost::multiprecision::cpp_bin_float_100;
  const F frac = log(F(n)) / log(F(2)) - F(k);
  const F g = F(gamma.convert_to<F>());
  return frac > g ? k + 2 : k + 1;
}

// 4 ceil(1 - gamma + lb|A|)^6 / (gamma^2 eps^2 (1-gamma)^6)
inline Rational binarized_esa_bound(const Rational& eps, const Rational& gamma, std::size_t n_actions) {
  detail::check_bound_args(eps, gamma, n_actions);
  const Rational c(binarized_ceiling(gamma, n_actions));
  return 4 * detail::rpow(c, 6) / (gamma * gamma * eps * eps * detail::rpow(1 - gamma, 6));
}

inline Rational esa_bound(double eps, double gamma, std::size_t n) {
  return esa_bound(exact_decimal(eps), exact_decimal(gamma), n);
}
inline Rational binarized_esa_bound(double eps, double gamma, std::size_t n) {
  return binarized_esa_bound(exact_decimal(eps), exact_decimal(gamma), n);
}

// scientific rendering with the given significant digits, valid far beyond double range
inline std::string format_scientific(const Rational& x, int digits = 6) {
  using F = boost::multiprecision::cpp_bin_float_100;
  const F v(x);
  return v.str(digits, std::ios_base::scientific);
}

}  // namespace grl
