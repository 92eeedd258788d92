#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "grl/homomorphism.hpp"

using namespace grl;

namespace {

// Q = (I - gamma M)^-1 r, independent of the planners
std::vector<double> solve_regions(const FiniteMDP& m) {
  const auto n = static_cast<Eigen::Index>(m.n_states());
  Eigen::MatrixXd A(n, n);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    b(i) = m.r(i, 0);
    for (Eigen::Index j = 0; j < n; ++j) A(i, j) = (i == j) - m.gamma() * m.p(i, 0, j);
  }
  Eigen::VectorXd x = A.fullPivLu().solve(b);
  return {x.data(), x.data() + n};
}

}  // namespace

TEST(CheckQHomo, IdentityHasZeroGap) {
  Rng rng(1);
  auto m = random_mdp(5, 3, 0.9, rng);
  auto rep = check_q_homo(m, Homomorphism::identity(5, 3), 0.0);
  EXPECT_TRUE(rep.holds);
  EXPECT_EQ(rep.worst_gap, 0.0);
}

TEST(CheckQHomo, NonMdpRegionsShareValue) {
  auto ex = make_region_example(RegionCase::nonmdp, 0.5);
  auto rep = check_q_homo(ex.mrp, ex.homo, 1e-8);
  EXPECT_TRUE(rep.holds);
  EXPECT_LT(rep.worst_gap, 1e-8);
}

TEST(CheckQHomo, ApproxQGapIsEps) {
  const double eps = 0.1;
  auto ex = make_region_example(RegionCase::approx_q, 0.5, eps);
  auto rep = check_q_homo(ex.mrp, ex.homo, 1.0);
  EXPECT_NEAR(rep.worst_gap, eps, 1e-8);
}

TEST(RegionExample, CaseOneNumbers) {
  auto ex = make_region_example(RegionCase::nonmdp, 0.5);
  const double c = 2 / 0.875;
  EXPECT_NEAR(c, 2.2857142857, 1e-9);
  const std::vector<double> expect = {0.2857142857, 0.5714285714, 1.1428571429, 2.2857142857, 2.2857142857};
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(ex.q[i], expect[i], 1e-9);
}

TEST(RegionExample, KernelRowsAsDisplayed) {
  auto ex = make_region_example(RegionCase::nonmdp, 0.5);
  // mass reaching the aggregated state {R4a, R4b} from each of them differs
  EXPECT_EQ(ex.mrp.p(3, 0, 2) + ex.mrp.p(3, 0, 3) + ex.mrp.p(3, 0, 4), 0.0);
  EXPECT_EQ(ex.mrp.p(4, 0, 2) + ex.mrp.p(4, 0, 3) + ex.mrp.p(4, 0, 4), 0.5);
}

TEST(RegionExample, DegenerateCasesAgree) {
  for (double g : {0.2, 0.5, 0.8}) {
    auto one = make_region_example(RegionCase::nonmdp, g);
    auto two = make_region_example(RegionCase::approx_q, g, 0.0);
    auto three = make_region_example(RegionCase::approx_policy, g, 0.3, 0.0);
    auto two_eps = make_region_example(RegionCase::approx_q, g, 0.3);
    EXPECT_NEAR(two.q[0], one.q[0], 1e-12);
    EXPECT_NEAR(two.q[1], one.q[1], 1e-12);
    EXPECT_NEAR(two.q[2], one.q[2], 1e-12);
    EXPECT_NEAR(two.q[4], one.q[3], 1e-12);
    EXPECT_NEAR(three.q[0], two_eps.q[0], 1e-12);
    EXPECT_NEAR(three.q[1], two_eps.q[1], 1e-12);
    EXPECT_NEAR(three.q[3], two_eps.q[2], 1e-12);
    EXPECT_NEAR(three.q[6], two_eps.q[5], 1e-12);
  }
}

TEST(RegionExample, ClosedFormsAreFixedPoints) {
  for (int k = 1; k <= 9; ++k) {
    const double g = 0.1 * k;
    for (auto which : {RegionCase::nonmdp, RegionCase::approx_q, RegionCase::approx_policy}) {
      auto ex = make_region_example(which, g, 0.2, 0.1);
      auto oracle = solve_regions(ex.mrp);
      auto q = avi(ex.mrp, 1e-10);
      for (std::size_t i = 0; i < ex.q.size(); ++i) {
        EXPECT_NEAR(oracle[i], ex.q[i], 1e-9);
        EXPECT_NEAR(q(i, 0), ex.q[i], 1e-6);
      }
    }
  }
}

TEST(RegionExample, ApproxPolicyRegionsShareValues) {
  auto ex = make_region_example(RegionCase::approx_policy, 0.7, 0.2, 0.25);
  EXPECT_EQ(ex.q[1], ex.q[2]);
  EXPECT_EQ(ex.q[5], ex.q[6]);
  EXPECT_NEAR(ex.q[4] - ex.q[3], 0.2, 1e-12);
}

TEST(SurrogateFromHomo, IdentityReproducesUnderlying) {
  Rng rng(2);
  auto m = random_mdp(4, 3, 0.8, rng);
  auto h = Homomorphism::identity(4, 3);
  auto sur = surrogate_from_homo(m, h, HomoDispersion::uniform(h));
  EXPECT_EQ(sur.mdp.transition_data(), m.transition_data());
  EXPECT_EQ(sur.mdp.reward_data(), m.reward_data());
}

TEST(SurrogateFromHomo, RegionCaseOneHasFourPairs) {
  const double g = 0.6;
  auto ex = make_region_example(RegionCase::nonmdp, g);
  Rng rng(3);
  for (int k = 0; k < 5; ++k) {
    auto B = HomoDispersion::from_weights(ex.homo, [&](std::size_t, std::size_t) { return rng.uniform() + 0.01; });
    auto sur = surrogate_from_homo(ex.mrp, ex.homo, B);
    ASSERT_EQ(sur.mdp.n_states(), 4u);
    auto q = avi(sur.mdp, 1e-12);
    const double c = 2 / (1 - g * g * g);
    const std::vector<double> expect = {c - 2, g * g * c, g * c, c};
    for (std::size_t s = 0; s < 4; ++s) EXPECT_NEAR(q(s, 0), expect[s], 1e-9);
  }
}

TEST(SurrogateFromHomo, ConstantIsOneByOne) {
  Rng rng(4);
  auto m = random_mdp(5, 2, 0.9, rng);
  auto h = Homomorphism::constant(5, 2);
  auto sur = surrogate_from_homo(m, h, HomoDispersion::uniform(h));
  EXPECT_EQ(sur.mdp.n_states(), 1u);
  EXPECT_EQ(sur.mdp.n_actions(), 1u);
}

TEST(SurrogateFromHomo, EmptyPreimageRejected) {
  Rng rng(5);
  auto m = random_mdp(3, 2, 0.9, rng);
  Homomorphism h = Homomorphism::identity(3, 2);
  h.n_abstract_actions = 3;  // abstract action 2 has no pre-image
  EXPECT_THROW(HomoDispersion::uniform(h), InvalidDispersion);
}

TEST(VerifyValueLoss, ExactHomomorphismHasNoLoss) {
  auto ex = make_region_example(RegionCase::nonmdp, 0.9);
  auto rep = verify_value_loss(ex.mrp, ex.homo, HomoDispersion::uniform(ex.homo), 1e-8);
  EXPECT_TRUE(rep.holds);
  EXPECT_NEAR(rep.observed, 0.0, 1e-7);
}

TEST(VerifyValueLoss, ApproxQCaseWithinBound) {
  auto ex = make_region_example(RegionCase::approx_q, 0.5, 0.1);
  auto rep = verify_value_loss(ex.mrp, ex.homo, HomoDispersion::uniform(ex.homo), 0.1 + 1e-8);
  EXPECT_NEAR(rep.bound, 1.6, 1e-6);
  EXPECT_LE(rep.observed, 1.6);
  EXPECT_TRUE(rep.holds);
}

TEST(VerifyValueLoss, PreconditionChecked) {
  auto ex = make_region_example(RegionCase::approx_q, 0.5, 0.3);
  EXPECT_THROW(verify_value_loss(ex.mrp, ex.homo, HomoDispersion::uniform(ex.homo), 0.1), PreconditionViolated);
}

TEST(VerifyValueLoss, RandomQUniformInstancesRespectBound) {
  Rng rng(6);
  for (int k = 0; k < 30; ++k) {
    auto inst = random_q_uniform_instance(3, 2, 8, 3, 0.8, rng.uniform(0, 0.05), rng);
    auto B = HomoDispersion::from_weights(inst.homo, [&](std::size_t, std::size_t) { return rng.uniform() + 1e-3; });
    auto rep = verify_value_loss(inst.mdp, inst.homo, B, inst.eps + 1e-9);
    EXPECT_TRUE(rep.holds) << rep.observed << " > " << rep.bound;
    EXPECT_GE(rep.observed, -1e-7);
  }
}

TEST(VerifyValueLoss, UnperturbedInstancesAreExact) {
  Rng rng(7);
  for (int k = 0; k < 10; ++k) {
    auto inst = random_q_uniform_instance(3, 2, 7, 4, 0.9, 0.0, rng);
    EXPECT_LT(inst.eps, 1e-7);
    auto rep = verify_value_loss(inst.mdp, inst.homo, HomoDispersion::uniform(inst.homo), 1e-7);
    EXPECT_NEAR(rep.observed, 0.0, 1e-6);
  }
}
