#include <gtest/gtest.h>

#include <cmath>

#include "vrjp/gw_tree.hpp"
#include "vrjp/stats.hpp"

using namespace vrjp;

TEST(OffspringLaw, ValidationAndConditions) {
  EXPECT_THROW(OffspringLaw({{2, 0.5}, {3, 0.4}}), ConfigError);
  EXPECT_THROW(OffspringLaw({{-1, 1.0}}), ConfigError);
  const OffspringLaw law({{1, 0.2}, {3, 0.8}});
  EXPECT_NEAR(law.mean(), 2.6, 1e-15);
  EXPECT_TRUE(law.a1());
  EXPECT_FALSE(law.a2());
  EXPECT_FALSE(OffspringLaw({{0, 0.1}, {3, 0.9}}).a1());
  EXPECT_TRUE(OffspringLaw::deterministic(2).a2());
  EXPECT_EQ(law.max_offspring(), 3);
}

TEST(OffspringLaw, JsonRoundTrip) {
  const auto law = OffspringLaw::from_json(nlohmann::json::parse(R"({"pmf": {"2": 0.25, "3": 0.75}})"));
  EXPECT_NEAR(law.probability(3), 0.75, 0.0);
  const auto again = OffspringLaw::from_json(law.to_json());
  EXPECT_EQ(again.support(), law.support());
  EXPECT_THROW(OffspringLaw::from_json(nlohmann::json::parse(R"({"pmf": {"x": 1.0}})")), ConfigError);
  EXPECT_THROW(OffspringLaw::from_json(nlohmann::json::parse(R"([1])")), ConfigError);
}

TEST(OffspringLaw, SamplingFrequencies) {
  const OffspringLaw law({{1, 0.3}, {2, 0.5}, {4, 0.2}});
  RandomStream rng(7, 0);
  std::map<int, int> counts;
  constexpr int kDraws = 100000;
  for (int k = 0; k < kDraws; ++k) ++counts[law.sample(rng)];
  for (const auto& [k, p] : law.support()) {
    const double se = std::sqrt(p * (1 - p) / kDraws);
    EXPECT_NEAR(counts[k] / double(kDraws), p, 4 * se);
  }
}

TEST(TreeArena, FromChildCounts) {
  const std::vector<int> counts = {2, 1, 0, 3, 0, 0, 0};
  const auto t = tree_from_child_counts(counts);
  ASSERT_EQ(t.size(), 7u);
  EXPECT_EQ(t.max_depth(), 3);
  EXPECT_EQ(t.generation_size(1), 2u);
  EXPECT_EQ(t.generation_size(2), 1u);
  EXPECT_EQ(t.generation_size(3), 3u);
  EXPECT_EQ(t.parent[3], 1);
  EXPECT_EQ(t.parent[6], 3);
  EXPECT_EQ(t.num_children(3), 3);
  EXPECT_EQ(t.depth[6], 3);
}

TEST(TreeArena, SampledStructureInvariants) {
  RandomStream rng(8, 0);
  const OffspringLaw law({{1, 0.5}, {2, 0.3}, {3, 0.2}});
  const auto t = sample_tree(law, 9, rng);
  EXPECT_EQ(t.max_depth(), 9);
  for (std::size_t x = 1; x < t.size(); ++x) {
    const auto p = static_cast<std::size_t>(t.parent[x]);
    EXPECT_LT(p, x);
    EXPECT_EQ(t.depth[x], t.depth[p] + 1);
    EXPECT_GE(static_cast<std::int32_t>(x), t.child_begin[p]);
    EXPECT_LT(static_cast<std::int32_t>(x), t.child_end[p]);
  }
  for (std::size_t x = t.generation_begin(9); x < t.generation_end(9); ++x) EXPECT_EQ(t.num_children(x), 0);
  for (std::size_t x = 0; x < t.generation_begin(9); ++x) EXPECT_GE(t.num_children(x), 1);
}

TEST(TreeArena, GenerationGrowthMatchesMean) {
  const OffspringLaw law({{1, 0.5}, {3, 0.5}});
  stats::MeanAccumulator acc;
  for (std::uint64_t r = 0; r < 4000; ++r) {
    RandomStream rng(9, r);
    acc.add(static_cast<double>(sample_tree(law, 5, rng).generation_size(5)));
  }
  EXPECT_NEAR(acc.mean(), std::pow(2.0, 5), 4 * acc.stderr_of_mean());
}

TEST(TreeArena, NodeCapAndPreconditions) {
  RandomStream rng(10, 0);
  EXPECT_THROW(sample_tree(OffspringLaw::deterministic(2), 20, rng, 1000), ResourceError);
  EXPECT_THROW(sample_tree(OffspringLaw({{0, 0.5}, {3, 0.5}}), 3, rng), ConfigError);
  EXPECT_THROW(sample_tree(OffspringLaw::deterministic(2), -1, rng), DomainError);
}

TEST(BrwField, PathSumsAndRunningMax) {
  const std::vector<int> counts = {1, 1, 0};
  const auto t = tree_from_child_counts(counts);
  const std::vector<double> a = {std::exp(-1.0), std::exp(2.0)};
  const auto f = brw_fields(t, a, 0.5, 0.1);
  EXPECT_NEAR(f.s[1], 1.0, 1e-15);
  EXPECT_NEAR(f.s[2], -1.0, 1e-15);
  EXPECT_NEAR(f.s_tilde[1], 0.5 * (1.0 - 0.1), 1e-15);
  EXPECT_NEAR(f.s_tilde[2], 0.5 * (-1.0 - 0.2), 1e-15);
  EXPECT_EQ(f.running_max[0], 0.0);
  EXPECT_NEAR(f.running_max[2], 0.45, 1e-15);
  EXPECT_NEAR(min_ancestral_max(t, f, 2), 0.45, 1e-15);
  EXPECT_NEAR(additive_sum(t, f, 2, 1.0), std::exp(0.6), 1e-14);
  EXPECT_THROW(additive_sum(t, f, 3, 1.0), DomainError);
}
