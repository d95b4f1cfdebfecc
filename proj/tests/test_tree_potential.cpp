#include <gtest/gtest.h>

#include <cmath>

#include "vrjp/tree_potential.hpp"

using namespace vrjp;

TEST(TreePotential, BetaFromWeights) {
  const std::vector<int> counts = {2, 1, 0, 0};
  const auto t = tree_from_child_counts(counts);
  const TreePotential pot(t, 0.8, {2.0, 0.5, 4.0}, 0.3);
  EXPECT_NEAR(pot.beta_tilde(0), 0.4 * (2.0 + 0.5), 1e-15);
  EXPECT_NEAR(pot.beta(0), 0.4 * 2.5 + 0.3, 1e-15);
  EXPECT_NEAR(pot.beta(1), 0.4 * (0.5 + 4.0), 1e-15);
  EXPECT_NEAR(pot.beta(2), 0.4 * 2.0, 1e-15);
  EXPECT_NEAR(pot.beta(3), 0.4 * 0.25, 1e-15);
  EXPECT_NEAR(pot.u_log(3), std::log(8.0), 1e-15);
}

TEST(TreePotential, Validation) {
  const std::vector<int> counts = {1, 0};
  const auto t = tree_from_child_counts(counts);
  EXPECT_THROW(TreePotential(t, 1.0, {1.0, 1.0}, 1.0), DomainError);
  EXPECT_THROW(TreePotential(t, 1.0, {-1.0}, 1.0), DomainError);
  EXPECT_THROW(TreePotential(t, 0.0, {1.0}, 1.0), DomainError);
  EXPECT_THROW(TreePotential(t, 1.0, {1.0}, 0.0), DomainError);
}

TEST(TreePotential, AttachIsDeterministic) {
  RandomStream r1(3, 4), r2(3, 4);
  const auto t = sample_tree(OffspringLaw::deterministic(2), 4, r1);
  sample_tree(OffspringLaw::deterministic(2), 4, r2);
  const auto p1 = attach_potential(t, 0.5, r1);
  const auto p2 = attach_potential(t, 0.5, r2);
  for (std::size_t x = 0; x < t.size(); ++x) EXPECT_EQ(p1.beta(x), p2.beta(x));
  EXPECT_EQ(p1.gamma(), p2.gamma());
}

TEST(Conductances, EdgeAndVertexValues) {
  const std::vector<int> counts = {2, 0, 0};
  const auto t = tree_from_child_counts(counts);
  const TreePotential pot(t, 0.6, {2.0, 3.0}, 1.0);
  const auto c = conductances(t, pot);
  // c(x) = W e^{U_parent + U_x}
  EXPECT_NEAR(c.c(1), 0.6 * 2.0, 1e-14);
  EXPECT_NEAR(c.c(2), 0.6 * 3.0, 1e-14);
  EXPECT_NEAR(c.pi(0), 0.6 * 5.0, 1e-14);
}
