#include <gtest/gtest.h>

#include <cmath>

#include "vrjp/network.hpp"
#include "vrjp/stats.hpp"

using namespace vrjp;

TEST(WiredNetwork, SeriesParallelByHand) {
  // Root with two children; the second has one child at depth 2.
  const std::vector<int> counts = {2, 0, 1, 0};
  const auto t = tree_from_child_counts(counts);
  const TreePotential pot(t, 1.0, {1.0, 2.0, 0.5}, 1.0);
  const auto net = make_wired_network(t, pot, 1);
  // c(1) = 1, c(2) = 2; boundary of node 2 is W e^{2U_2} A_3 = 4 * 0.5 = 2; node 1 has none.
  EXPECT_NEAR(std::exp(net.log_boundary[2]), 2.0, 1e-14);
  EXPECT_EQ(net.log_boundary[1], -INFINITY);
  EXPECT_NEAR(effective_conductance(net), 1.0, 1e-14);  // 2 in series with 2
  EXPECT_NEAR(escape_probability(net), 1.0 / 3.0, 1e-14);
  EXPECT_NEAR(generation_conductance(t, pot, 1), 3.0, 1e-14);
  EXPECT_NEAR(nash_williams_lower_bound(t, pot, 1), 1.0 / 3.0, 1e-14);
  EXPECT_THROW(make_wired_network(t, pot, 2), DomainError);
}

TEST(WiredNetwork, NashWilliamsBelowResistance) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    RandomStream rng(800, s);
    const auto t = sample_tree(OffspringLaw({{1, 0.3}, {2, 0.7}}), 9, rng);
    const auto pot = attach_potential(t, 0.01 * static_cast<double>(s + 1), rng);
    for (int n = 1; n <= 8; ++n) {
      const auto net = make_wired_network(t, pot, n);
      EXPECT_LE(nash_williams_lower_bound(t, pot, n), effective_resistance(net) * (1 + 1e-12));
    }
  }
}

TEST(WiredNetwork, NoOverflowAtTinyWeight) {
  RandomStream rng(801, 0);
  const auto t = sample_tree(OffspringLaw::deterministic(2), 17, rng);
  const auto pot = attach_potential(t, 1e-3, rng);
  const auto net = make_wired_network(t, pot, 16);
  const double lc = log_effective_conductance(net);
  EXPECT_TRUE(std::isfinite(lc));
  EXPECT_TRUE(std::isfinite(std::log(escape_probability(net))) || escape_probability(net) == 0.0);
}

TEST(NetworkWalk, MatchesEscapeProbability) {
  RandomStream rng(802, 0);
  const auto t = sample_tree(OffspringLaw::deterministic(2), 5, rng);
  const auto pot = attach_potential(t, 0.3, rng);
  const auto net = make_wired_network(t, pot, 4);
  const double p = escape_probability(net);
  const NetworkWalk walk(net);
  constexpr int kWalks = 50000;
  int hits = 0, censored = 0;
  for (int k = 0; k < kWalks; ++k) {
    const auto o = walk.run(rng, 1000000);
    hits += o == WalkOutcome::HitLevelN;
    censored += o == WalkOutcome::Censored;
  }
  EXPECT_EQ(censored, 0);
  EXPECT_NEAR(hits / double(kWalks), p, 4 * std::sqrt(p * (1 - p) / kWalks));
}

TEST(NetworkWalk, Censoring) {
  RandomStream rng(803, 0);
  const auto t = sample_tree(OffspringLaw::deterministic(2), 6, rng);
  const auto pot = attach_potential(t, 1.0, rng);
  const auto net = make_wired_network(t, pot, 5);
  EXPECT_EQ(walk_simulate(net, rng, 0), WalkOutcome::Censored);
}

TEST(LogAdd, Basics) {
  EXPECT_NEAR(detail::log_add(std::log(2.0), std::log(3.0)), std::log(5.0), 1e-15);
  EXPECT_EQ(detail::log_add(-INFINITY, 1.5), 1.5);
  EXPECT_EQ(detail::log_add(-INFINITY, -INFINITY), -INFINITY);
}
