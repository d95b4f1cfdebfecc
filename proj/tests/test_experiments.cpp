#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "vrjp/experiments.hpp"

using namespace vrjp;

namespace {

json base_spec() {
  return json::parse(R"({
    "name": "t",
    "law": {"pmf": {"2": 1.0}},
    "w": {"rel": 1.0},
    "depths": [0, 3, 6],
    "replicas": 64,
    "seed": 17,
    "assertions": [{"kind": "cramer_identity"}, {"kind": "resistance_identity"}, {"kind": "nash_williams"}]
  })");
}

}  // namespace

TEST(ExperimentSpec, ParsesAndRoundTrips) {
  const auto s = ExperimentSpec::from_json(base_spec());
  EXPECT_EQ(s.depths, (std::vector<int>{0, 3, 6}));
  EXPECT_TRUE(s.w.relative);
  EXPECT_EQ(s.assertions.size(), 3u);
  const auto again = ExperimentSpec::from_json(s.to_json());
  EXPECT_EQ(again.to_json(), s.to_json());
}

TEST(ExperimentSpec, RejectsBadInput) {
  EXPECT_THROW(ExperimentSpec::parse_text("{\"name\": \"x\", "), ConfigError);
  auto bad = [](auto edit) {
    auto j = base_spec();
    edit(j);
    return j;
  };
  EXPECT_THROW(ExperimentSpec::from_json(bad([](json& j) { j["depths"] = {3, 2}; })), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_json(bad([](json& j) { j["depths"] = {-1}; })), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_json(bad([](json& j) { j["replicas"] = 0; })), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_json(bad([](json& j) { j["bogus"] = 1; })), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_json(bad([](json& j) { j["w"] = -1.0; })), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_json(bad([](json& j) { j["law"] = {{"pmf", {{"0", 0.5}, {"3", 0.5}}}}; })),
               ConfigError);
  EXPECT_THROW(ExperimentSpec::from_json(bad([](json& j) { j.erase("law"); })), ConfigError);
  EXPECT_THROW(ExperimentSpec::from_json(bad([](json& j) {
                 j["kind"] = "lattice";
                 j["box"] = {{"d", 2}};
               })),
               ConfigError);  // relative weight on a lattice
}

TEST(Experiments, IdentitiesPass) {
  const auto spec = ExperimentSpec::from_json(base_spec());
  const auto out = run(spec, 2);
  const auto s = summarize(out);
  EXPECT_EQ(s.failed_replicas, 0u);
  EXPECT_TRUE(s.pass());
  for (const auto& r : out.records) {
    EXPECT_EQ(r.depths.size(), 3u);
    EXPECT_TRUE(std::isnan(r.depths[0].lambda_n));
    EXPECT_GT(r.depths[2].psi, 0.0);
  }
}

TEST(Experiments, IndependentOfThreadCount) {
  const auto spec = ExperimentSpec::from_json(base_spec());
  std::ostringstream a, b;
  write_csv(a, run(spec, 1));
  write_csv(b, run(spec, 3));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), kCsvHeader);
}

TEST(Experiments, SummaryJsonHasNoTimings) {
  const auto spec = ExperimentSpec::from_json(base_spec());
  const auto out = run(spec, 1);
  const auto j = summary_json(out, summarize(out));
  EXPECT_EQ(j.dump(), summary_json(run(spec, 2), summarize(run(spec, 2))).dump());
  EXPECT_TRUE(j.at("pass").get<bool>());
}

TEST(Experiments, UnknownAssertionIsConfigError) {
  auto j = base_spec();
  j["assertions"] = json::array({{{"kind", "no_such_check"}}});
  const auto spec = ExperimentSpec::from_json(j);
  EXPECT_THROW(summarize(run(spec, 1)), ConfigError);
}

TEST(Experiments, PositiveRecurrenceRange) {
  const auto spec = ExperimentSpec::from_json(base_spec());
  const auto out = run(spec, 1);
  EXPECT_THROW(positive_recurrence_check(out.records, {1, 2}, 0.3), ConfigError);
  EXPECT_NO_THROW(positive_recurrence_check(out.records, {1, 2}, 0.24));
  EXPECT_THROW(additive_moment_check(out.records, {1, 2}, 0.6, 2.0), ConfigError);
}

TEST(Experiments, LatticeMartingale) {
  const auto spec = ExperimentSpec::from_json(json::parse(R"({
    "name": "z2", "kind": "lattice", "w": 1.0, "box": {"d": 2}, "depths": [0, 1, 2],
    "replicas": 4000, "seed": 3, "assertions": [{"kind": "psi_mean"}, {"kind": "bracket_constant"}]
  })"));
  const auto s = summarize(run(spec, 2));
  EXPECT_TRUE(s.pass());
}

TEST(Experiments, CouplingAndPitControls) {
  auto j = base_spec();
  j["depths"] = {5};
  j["replicas"] = 20000;
  j["w"] = {{"rel", 2.0}};
  j["options"] = {{"record_brw", 0}};
  const auto out = run(ExperimentSpec::from_json(j), 2);
  EXPECT_GT(coupling_ks_test(out.records, 0).p_value, 1e-3);
  EXPECT_LT(coupling_ks_test(out.records, 0, true).p_value, 1e-6);
  EXPECT_GT(pit_conditional_test(out.records, 0).p_value, 1e-3);
  EXPECT_LT(pit_conditional_test(out.records, 0, true).p_value, 1e-6);
}

TEST(Experiments, DecayEstimateSignInRecurrentPhase) {
  auto j = base_spec();
  j["depths"] = {4, 10};
  j["replicas"] = 100;
  j["w"] = {{"rel", 0.5}};
  j["options"] = {{"record_brw", 0}};
  const auto out = run(ExperimentSpec::from_json(j), 2);
  const auto est = decay_rate_estimate(out.records, 0, 1);
  EXPECT_LT(est.slope, 0.0);
}

TEST(Experiments, CsvNumbersRoundTrip) {
  const auto out = run(ExperimentSpec::from_json(base_spec()), 1);
  std::ostringstream os;
  write_csv(os, out);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::vector<std::string> cells;
  std::stringstream ls(line);
  for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
  ASSERT_EQ(cells.size(), 12u);
  EXPECT_EQ(std::stod(cells[3]), out.records[0].depths[0].psi);
}
