#include <gtest/gtest.h>

#include <cmath>

#include "grl/abstraction.hpp"
#include "grl/domains.hpp"
#include "grl/random_mdp.hpp"

using namespace grl;

namespace {

std::vector<std::size_t> random_labels(std::size_t X, std::size_t S, Rng& rng) {
  std::vector<std::size_t> l(X);
  for (std::size_t x = 0; x < X; ++x) l[x] = x < S ? x : rng.below(S);
  return l;
}

double mass_on(const std::vector<StateReward>& k, std::size_t s) {
  double t = 0;
  for (const auto& e : k)
    if (e.state == s) t += e.prob;
  return t;
}

}  // namespace

TEST(StateProcess, ConstantMapPutsAllMassOnOneState) {
  Rng rng(1);
  MdpEnv env(random_mdp(5, 2, 0.9, rng));
  auto k = state_process_kernel(env, Abstraction::constant(5), env.initial_history(), 1);
  EXPECT_NEAR(mass_on(k, 0), 1.0, 1e-12);
}

TEST(StateProcess, IdentityMapEqualsKernel) {
  Rng rng(2);
  auto m = random_mdp(4, 2, 0.9, rng);
  MdpEnv env(m, 2);
  auto k = state_process_kernel(env, Abstraction::identity(4), env.initial_history(), 1);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(mass_on(k, t), m.p(2, 1, t), 1e-12);
}

TEST(StateProcess, KeyedMrpHistoriesDisagree) {
  auto d = make_example1(0.9);
  auto h00 = History::start({0, 0}, 4);
  auto h10 = History::start({2, 0}, 4);
  EXPECT_NEAR(mass_on(state_process_kernel(*d.env, d.psi, h00, 0), 0), 0.5, 1e-12);
  EXPECT_NEAR(mass_on(state_process_kernel(*d.env, d.psi, h10, 0), 0), 0.0, 1e-12);
}

TEST(BuildSurrogate, IdentityWithDegenerateDispersion) {
  Rng rng(3);
  auto m = random_mdp(5, 3, 0.8, rng);
  auto psi = Abstraction::identity(5);
  auto sur = build_surrogate(m, psi, Dispersion::uniform(psi, 3));
  EXPECT_EQ(sur.mdp.transition_data(), m.transition_data());
  EXPECT_EQ(sur.mdp.reward_data(), m.reward_data());
}

TEST(BuildSurrogate, TotalAggregationUsesStationaryAverage) {
  Rng rng(4);
  auto m = random_mdp(6, 2, 0.9, rng);
  auto psi = Abstraction::constant(6);
  Matrix w(2);
  for (std::size_t a = 0; a < 2; ++a) w[a] = stationary_distribution(action_matrix(m, a));
  auto sur = build_surrogate(m, psi, Dispersion::from_action_weights(psi, w), DispersionSource::stationary_of_policy);
  ASSERT_EQ(sur.mdp.n_states(), 1u);
  for (std::size_t a = 0; a < 2; ++a) {
    EXPECT_NEAR(sur.mdp.p(0, a, 0), 1.0, 1e-12);
    double avg = 0;
    for (std::size_t x = 0; x < 6; ++x) avg += w[a][x] * m.r(x, a);
    EXPECT_NEAR(sur.mdp.r(0, a), avg, 1e-12);
  }
  EXPECT_EQ(sur.provenance.source, DispersionSource::stationary_of_policy);
}

TEST(BuildSurrogate, RejectsMassOutsidePreimage) {
  auto m = make_mrp({{0.5, 0.5}, {0.5, 0.5}}, {0, 1}, 0.5);
  auto psi = Abstraction::identity(2);
  Dispersion bad({{{0.5, 0.5}}, {{0.0, 1.0}}});
  EXPECT_THROW(build_surrogate(m, psi, bad), InvalidDispersion);
  Dispersion unnormalized({{{0.5, 0.0}}, {{0.0, 1.0}}});
  EXPECT_THROW(build_surrogate(m, psi, unnormalized), InvalidDispersion);
}

TEST(CheckQdp, IdentityHolds) {
  Rng rng(5);
  auto m = random_mdp(6, 3, 0.9, rng);
  auto rep = check_qdp(m, Abstraction::identity(6), 0.0);
  EXPECT_TRUE(rep.holds);
  EXPECT_EQ(rep.worst_gap, 0.0);
}

TEST(CheckQdp, KeyedMrpMapIsExact) {
  auto m = example1_mrp(0.9);
  auto rep = check_qdp(m, Abstraction::tabular({0, 1, 0, 1}), 1e-8);
  EXPECT_TRUE(rep.holds);
  EXPECT_LT(rep.worst_gap, 1e-8);
}

TEST(CheckQdp, GapOfPointThreeFailsAtPointOne) {
  // two absorbing states, gamma 0: Q* = reward
  auto m = make_finite_mdp({{{1, 0}}, {{0, 1}}}, {{0.5}, {0.8}}, 0.0);
  auto rep = check_qdp(m, Abstraction::constant(2), 0.1);
  EXPECT_FALSE(rep.holds);
  EXPECT_NEAR(rep.worst_gap, 0.3, 1e-12);
  ASSERT_TRUE(rep.witness);
  EXPECT_EQ(rep.witness->x, 0u);
  EXPECT_EQ(rep.witness->y, 1u);
}

TEST(CheckVpdp, IdentityHolds) {
  Rng rng(6);
  auto m = random_mdp(5, 2, 0.9, rng);
  EXPECT_TRUE(check_vpdp(m, Abstraction::identity(5), 0, 0).holds);
}

TEST(CheckVpdp, SameValueAndOptimalSetButDifferentSuboptimalQ) {
  auto m = make_finite_mdp({{{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}}, {{1.0, 0.0}, {1.0, 0.5}}, 0.0);
  auto psi = Abstraction::constant(2);
  EXPECT_TRUE(check_vpdp(m, psi, 0.0, 0.1).holds);
  EXPECT_FALSE(check_qdp(m, psi, 0.1).holds);
}

TEST(CheckVpdp, DisjointOptimalActionsFail) {
  auto m = make_finite_mdp({{{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}}, {{1.0, 0.0}, {0.0, 1.0}}, 0.0);
  auto rep = check_vpdp(m, Abstraction::constant(2), 0.5, 0.1);
  EXPECT_FALSE(rep.holds);
  EXPECT_EQ(rep.worst_gap, 0.0);
}

TEST(CheckEpsMdp, IdentityHasZeroGaps) {
  Rng rng(7);
  auto m = random_mdp(5, 2, 0.9, rng);
  auto rep = check_eps_mdp(m, Abstraction::identity(5), 0, 0);
  EXPECT_TRUE(rep.holds);
  EXPECT_EQ(rep.worst_gap, 0.0);
  EXPECT_EQ(rep.worst_secondary, 0.0);
}

TEST(CheckEpsMdp, KeyedMrpMapFails) {
  auto m = example1_mrp(0.9);
  auto rep = check_eps_mdp(m, Abstraction::tabular({0, 1, 0, 1}), 0.5, 10.0);
  EXPECT_FALSE(rep.holds);
  // L1 gap 1 is a total-variation gap of 1/2 between histories 00 and 10
  EXPECT_NEAR(rep.worst_gap, 1.0, 1e-12);
  EXPECT_NEAR(rep.worst_gap / 2, 0.5, 1e-12);
}

TEST(CheckEpsMdp, DuplicatedStatesAreExact) {
  Rng rng(8);
  auto base = random_mdp(3, 2, 0.9, rng);
  // symmetric split: micro states 2s and 2s+1 share every block transition equally
  std::vector<double> p, r;
  for (std::size_t x = 0; x < 6; ++x)
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t y = 0; y < 6; ++y) p.push_back(base.p(x / 2, a, y / 2) / 2);
      r.push_back(base.r(x / 2, a));
    }
  FiniteMDP m(6, 2, p, r, 0.9);
  auto rep = check_eps_mdp(m, Abstraction::tabular({0, 0, 1, 1, 2, 2}), 0, 0);
  EXPECT_TRUE(rep.holds);
}

TEST(ExtremeQdp, IdenticalRowsCollapse) {
  Rng rng(9);
  auto m = random_mdp(5, 2, 0.9, rng, 0, 0.4, 0.4);
  EXPECT_EQ(extreme_qdp_map(m, 0.1).n_states(), 1u);
}

TEST(ExtremeQdp, TwoEpsApartSplits) {
  auto m = make_finite_mdp({{{1, 0}}, {{0, 1}}}, {{0.3}, {0.5}}, 0.0);
  EXPECT_EQ(extreme_qdp_map(m, 0.1).n_states(), 2u);
}

TEST(ExtremeQdp, EdgeValuesGoToLowerBin) {
  EXPECT_EQ(qdp_bin(0.3, 0.1), 3);
  EXPECT_EQ(qdp_bin(0.30000000001, 0.1), 4);
  EXPECT_EQ(qdp_bin(-0.2, 0.1), -2);
}

TEST(ExtremeQdp, RespectsStateBound) {
  Rng rng(10);
  for (int k = 0; k < 30; ++k) {
    auto m = random_mdp(20, 2, 0.5, rng);
    const double eps = 0.05 + rng.uniform() * 0.5;
    auto psi = extreme_qdp_map(m, eps);
    EXPECT_LE(static_cast<double>(psi.n_states()), extreme_qdp_bound(eps, 0.5, 2));
    EXPECT_TRUE(check_qdp(m, psi, eps).holds);
  }
}

TEST(EmpiricalSurrogate, SingleStateExactAfterOneStep) {
  MdpEnv env(make_finite_mdp({{{1.0}}}, {{0.7}}, 0.9));
  auto est = empirical_surrogate(env, Abstraction::identity(1), Policy::uniform(1, 1), 1, 3);
  EXPECT_TRUE(est.complete());
  EXPECT_DOUBLE_EQ(est.surrogate.mdp.r(0, 0), 0.7);
  EXPECT_DOUBLE_EQ(est.surrogate.mdp.p(0, 0, 0), 1.0);
}

TEST(EmpiricalSurrogate, FlagsUnvisitedPairs) {
  MdpEnv env(make_finite_mdp({{{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}}, {{0, 0}, {0, 0}}, 0.9));
  auto est = empirical_surrogate(env, Abstraction::identity(2), Policy::uniform(2, 2), 50, 3);
  EXPECT_FALSE(est.complete());
  EXPECT_EQ(est.unvisited.size(), 2u);
  EXPECT_DOUBLE_EQ(est.surrogate.mdp.p(1, 0, 1), 1.0);
}

TEST(EmpiricalSurrogate, KeyDomainLearnsXXY) {
  auto d = make_example2(0.01, 0.9);
  auto est = empirical_surrogate(*d.env, d.psi, Policy::uniform(3, 2), 1000000, 17);
  ASSERT_TRUE(est.complete());
  auto q = avi(est.surrogate.mdp, 1e-9);
  EXPECT_EQ(q.greedy_policy(), (std::vector<std::size_t>{0, 0, 1}));
}

TEST(EmpiricalSurrogate, IidKernelWithinSqrtN) {
  // every row is the same distribution, so each step is an i.i.d. draw
  const std::vector<double> d = {0.2, 0.5, 0.3};
  auto m = make_finite_mdp({{d}, {d}, {d}}, {{0.1}, {0.2}, {0.3}}, 0.9);
  MdpEnv env(m);
  const std::size_t n = 200000;
  auto est = empirical_surrogate(env, Abstraction::identity(3), Policy::uniform(3, 1), n, 5);
  for (std::size_t s = 0; s < 3; ++s) {
    const double visits = static_cast<double>(est.visits[s]);
    for (std::size_t t = 0; t < 3; ++t)
      EXPECT_NEAR(est.surrogate.mdp.p(s, 0, t), d[t], 5 * std::sqrt(d[t] * (1 - d[t]) / visits));
  }
}

TEST(AbstractionProperties, ReflexiveQdp) {
  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    auto m = random_mdp(2 + rng.below(10), 1 + rng.below(3), rng.uniform(0, 0.95), rng);
    EXPECT_TRUE(check_qdp(m, Abstraction::identity(m.n_states()), 0.0).holds);
  }
}

TEST(AbstractionProperties, EpsMdpImpliesEpsQdp) {
  Rng rng(12);
  int tested = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t S = 2 + rng.below(3), X = S + rng.below(6), A = 1 + rng.below(3);
    const double g = rng.uniform(0.1, 0.9);
    auto labels = random_labels(X, S, rng);
    auto base = lift_mdp(random_mdp(S, A, g, rng), labels, rng);
    auto m = perturb_mdp(base, rng.uniform(0, 0.05), rng.uniform(0, 0.05), rng);
    auto psi = Abstraction::tabular(labels, S);
    auto e = check_eps_mdp(m, psi, 1e9, 1e9);
    // one-step gap eps2 + gamma * eps1 * span/2 compounds through the value recursion
    const double span = (m.r_max() - m.r_min()) / (1 - g);
    const double bound = (e.worst_secondary + g * e.worst_gap * span / 2) / (1 - g);
    auto q = check_qdp(m, psi, bound);
    EXPECT_TRUE(q.holds) << "gap " << q.worst_gap << " bound " << bound;
    ++tested;
  }
  EXPECT_EQ(tested, 200);
}

TEST(AbstractionProperties, ExtremeMapIsBinWidthQdp) {
  Rng rng(13);
  for (int k = 0; k < 100; ++k) {
    auto m = random_mdp(3 + rng.below(15), 1 + rng.below(3), rng.uniform(0, 0.9), rng);
    const double eps = rng.uniform(0.01, 1.0);
    auto q = avi(m, 1e-10);
    auto psi = extreme_qdp_map(m, eps, q);
    EXPECT_LT(check_qdp(m, psi, eps, q).worst_gap, eps);
  }
}

TEST(AbstractionProperties, ExactQdpUpliftIsOptimalForAnyDispersion) {
  Rng rng(14);
  for (int inst = 0; inst < 10; ++inst) {
    const std::size_t S = 2 + rng.below(3), X = S + 2 + rng.below(6), A = 2 + rng.below(2);
    auto labels = random_labels(X, S, rng);
    auto m = lift_mdp(random_mdp(S, A, 0.9, rng), labels, rng);
    auto psi = Abstraction::tabular(labels, S);
    ASSERT_LT(check_qdp(m, psi, 1e-7).worst_gap, 1e-7);
    auto v_star = vi(m, 1e-10);
    for (int b = 0; b < 10; ++b) {
      Matrix w(A);
      for (auto& row : w) {
        row.resize(X);
        for (auto& v : row) v = rng.uniform() + 1e-3;
      }
      auto sur = build_surrogate(m, psi, Dispersion::from_action_weights(psi, w));
      auto greedy = avi(sur.mdp, 1e-10).greedy_policy();
      auto up = uplift_tabular(Policy::deterministic(greedy, A), psi);
      auto v = pe(m, up, 1e-10);
      for (std::size_t x = 0; x < X; ++x) EXPECT_NEAR(v[x], v_star[x], 1e-7);
    }
  }
}
