#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "errors.hpp"

namespace grl {

struct Percept {
  std::size_t observation = 0;
  double reward = 0.0;
  friend bool operator==(const Percept&, const Percept&) = default;
};

inline constexpr std::size_t kNoAction = static_cast<std::size_t>(-1);

// Immutable interaction history e1 a1 e2 a2 ... en. Extension shares the
// whole prefix, so it is O(|O|) regardless of length. Every node keeps the
// running observation counts. A history may be trimmed: older nodes are
// released while length and counts survive, which is all that
// bounded-memory kernels and abstractions need.
class History {
  struct Node {
    Percept percept;
    std::size_t action;  // action that produced this percept
    mutable std::shared_ptr<const Node> parent;
    std::size_t length;
    std::vector<std::uint32_t> counts;

    ~Node() {
      // unlink iteratively so long chains do not recurse in the destructor
      auto p = std::move(parent);
      while (p && p.use_count() == 1) {
        auto next = std::move(p->parent);
        p = std::move(next);
      }
    }
  };

 public:
  History() = default;

  static History start(Percept e, std::size_t n_observations) {
    auto n = std::make_shared<Node>();
    n->percept = e;
    n->action = kNoAction;
    n->length = 1;
    n->counts.assign(n_observations, 0);
    if (e.observation < n_observations) ++n->counts[e.observation];
    History h;
    h.tip_ = std::move(n);
    h.retained_ = 1;
    return h;
  }

  History extend(std::size_t action, Percept e) const {
    auto n = std::make_shared<Node>();
    n->percept = e;
    n->action = action;
    n->parent = tip_;
    n->length = tip_->length + 1;
    n->counts = tip_->counts;
    if (e.observation < n->counts.size()) ++n->counts[e.observation];
    History h;
    h.tip_ = std::move(n);
    h.retained_ = retained_ + 1;
    return h;
  }

  bool empty() const { return !tip_; }
  std::size_t size() const { return tip_ ? tip_->length : 0; }
  std::size_t retained() const { return retained_; }
  bool complete() const { return retained_ == size(); }

  const Percept& back() const { return tip_->percept; }
  std::size_t last_action() const { return tip_->action; }

  // k = 0 is the most recent percept
  const Percept& percept_from_end(std::size_t k) const { return node_from_end(k)->percept; }
  std::size_t action_from_end(std::size_t k) const { return node_from_end(k)->action; }

  std::uint32_t count(std::size_t observation) const {
    return observation < tip_->counts.size() ? tip_->counts[observation] : 0;
  }

  // Keep only the last `keep` percepts in memory.
  History trimmed(std::size_t keep) const {
    if (keep == 0) keep = 1;
    if (retained_ <= keep) return *this;
    std::vector<const Node*> chain;
    const Node* n = tip_.get();
    for (std::size_t i = 0; i < keep; ++i, n = n->parent.get()) chain.push_back(n);
    std::shared_ptr<Node> prev;
    for (std::size_t i = chain.size(); i-- > 0;) {
      auto c = std::make_shared<Node>();
      c->percept = chain[i]->percept;
      c->action = chain[i]->action;
      c->parent = prev;
      c->length = chain[i]->length;
      c->counts = chain[i]->counts;
      prev = std::move(c);
    }
    History h;
    h.tip_ = std::move(prev);
    h.retained_ = keep;
    return h;
  }

  // First m percepts; needs the full history.
  History prefix(std::size_t m) const {
    if (m == 0 || m > size()) throw PreconditionViolated("prefix length out of range");
    std::size_t back = size() - m;
    if (back >= retained_) throw PreconditionViolated("prefix reaches into trimmed part of history");
    auto n = tip_;
    for (std::size_t i = 0; i < back; ++i) n = n->parent;
    History h;
    h.tip_ = std::move(n);
    h.retained_ = retained_ - back;
    return h;
  }

  // Retained percepts, oldest first.
  std::vector<Percept> percepts() const {
    std::vector<Percept> out(retained_);
    const Node* n = tip_.get();
    for (std::size_t i = retained_; i-- > 0; n = n->parent.get()) out[i] = n->percept;
    return out;
  }

  // Actions between retained percepts; out[i] produced percepts()[i+1].
  std::vector<std::size_t> actions() const {
    std::vector<std::size_t> out(retained_ ? retained_ - 1 : 0);
    const Node* n = tip_.get();
    for (std::size_t i = out.size(); i-- > 0; n = n->parent.get()) out[i] = n->action;
    return out;
  }

  std::vector<double> rewards() const {
    std::vector<double> out;
    for (const auto& e : percepts()) out.push_back(e.reward);
    return out;
  }

  friend bool operator==(const History& a, const History& b) {
    if (a.size() != b.size() || a.retained_ != b.retained_) return false;
    const Node* x = a.tip_.get();
    const Node* y = b.tip_.get();
    for (; x && y; x = x->parent.get(), y = y->parent.get()) {
      if (x == y) return true;
      if (!(x->percept == y->percept) || x->action != y->action) return false;
    }
    return x == y;
  }

 private:
  const Node* node_from_end(std::size_t k) const {
    if (k >= retained_) throw PreconditionViolated("history access beyond retained percepts");
    const Node* n = tip_.get();
    for (std::size_t i = 0; i < k; ++i) n = n->parent.get();
    return n;
  }

  std::shared_ptr<const Node> tip_;
  std::size_t retained_ = 0;
};

}  // namespace grl
