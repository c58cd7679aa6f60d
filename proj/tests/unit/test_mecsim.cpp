#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "csfuse/core/error.hpp"
#include "csfuse/mecsim/mecsim.hpp"

using namespace csfuse;
using namespace csfuse::mecsim;

namespace {

DeploymentProfile fast_profile() {
  DeploymentProfile p;
  p.name = "fast";
  p.rtt_ms = 0.0;
  p.uplink_mbps = 1e6;
  p.detect_ms = 1.0;
  p.synth_per_tile_ms = 0.0;
  p.associate_ms = 0.0;
  p.screen_ms = 0.0;
  return p;
}

}  // namespace

TEST(Simulate, EveryArrivalIsAccountedFor) {
  for (auto prof : {edge_profile(), cloud_profile()})
    for (bool dwell : {true, false}) {
      PersonFlow flow;
      flow.dwell = dwell;
      const auto m = simulate(prof, flow, 0.15, 120.0, 3);
      EXPECT_EQ(m.persons_arrived, m.persons_screened + m.persons_missed) << prof.name;
      EXPECT_EQ(m.frames_generated, m.frames_processed + m.frames_dropped) << prof.name;
      EXPECT_EQ(m.confusion.total(), m.persons_screened);
      EXPECT_LE(m.screened_in_window, m.persons_screened);
      if (dwell) EXPECT_EQ(m.persons_missed, 0);
      EXPECT_EQ(static_cast<long>(m.latencies_ms.size()), m.frames_processed);
    }
}

TEST(Simulate, UnconstrainedServerKeepsUpWithArrivals) {
  PersonFlow flow;
  flow.arrivals_per_min = 20.0;
  const auto m = simulate(fast_profile(), flow, 0.15, 1200.0, 5);
  EXPECT_EQ(m.persons_missed, 0);
  EXPECT_NEAR(m.throughput_per_min, m.offered_per_min, 0.05 * m.offered_per_min);
  EXPECT_NEAR(m.latency_max_ms, 1.0, 0.01);
  // Every frame of a 0.9 s transit at 30 fps is processed.
  EXPECT_EQ(m.frames_dropped, 0);
  EXPECT_GE(m.mean_frames_per_person, 26.0);
}

// Dwell frames are exempt from the budget, so the law is checked with dwell off.
TEST(Simulate, NoProcessedFrameExceedsTheBudget) {
  PersonFlow transit;
  transit.dwell = false;
  for (auto prof : {edge_profile(), cloud_profile()}) {
    prof.budget_ms = 300.0;
    const auto m = simulate(prof, transit, 0.15, 300.0, 7);
    EXPECT_LE(m.latency_max_ms, 300.0 + 1e-9) << prof.name;
  }
  DeploymentProfile tight = cloud_profile();
  tight.budget_ms = 100.0;  // RTT alone exceeds it
  const auto none = simulate(tight, transit, 0.15, 60.0, 1);
  EXPECT_EQ(none.frames_processed, 0);
  EXPECT_EQ(none.persons_missed, none.persons_arrived);
}

TEST(Simulate, ZeroBandwidthWithPayloadIsRejected) {
  DeploymentProfile p = edge_profile();
  p.uplink_mbps = 0.0;
  EXPECT_THROW(simulate(p, PersonFlow{}, 0.15, 10.0, 1), ConfigError);
  PersonFlow empty;
  empty.payload_kb = 0.0;
  EXPECT_NO_THROW(simulate(p, empty, 0.15, 10.0, 1));
}

TEST(Simulate, SameSeedSameBytes) {
  EXPECT_EQ(metrics_json(simulate(edge_profile(), PersonFlow{}, 0.15, 120.0, 9)),
            metrics_json(simulate(edge_profile(), PersonFlow{}, 0.15, 120.0, 9)));
  EXPECT_NE(metrics_json(simulate(edge_profile(), PersonFlow{}, 0.15, 120.0, 9)),
            metrics_json(simulate(edge_profile(), PersonFlow{}, 0.15, 120.0, 10)));
}

TEST(Simulate, LongerRoundTripNeverHelps) {
  double prev_tp = 1e9, prev_p50 = -1.0;
  for (double rtt : {1.0, 20.0, 50.0, 80.0}) {
    DeploymentProfile p = edge_profile();
    p.rtt_ms = rtt;
    const auto m = simulate(p, PersonFlow{}, 0.15, 600.0, 2);
    EXPECT_LE(m.throughput_per_min, prev_tp * 1.01) << "rtt " << rtt;
    EXPECT_GT(m.latency_p50_ms, prev_p50) << "rtt " << rtt;
    prev_tp = m.throughput_per_min;
    prev_p50 = m.latency_p50_ms;
  }
}

TEST(Simulate, InvalidFlowIsRejected) {
  PersonFlow f;
  f.fps = 0.0;
  EXPECT_THROW(f.validate(), ConfigError);
  PersonFlow g;
  g.p_frame = 1.5;
  EXPECT_THROW(g.validate(), ConfigError);
  DeploymentProfile p;
  p.slots = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Compare, IdenticalProfilesAreSymmetric) {
  const auto c = compare_deployments(edge_profile(), edge_profile(), PersonFlow{}, 0.15, 120.0, {1, 2, 3});
  EXPECT_DOUBLE_EQ(c.ratio.mean, 1.0);
  EXPECT_DOUBLE_EQ(c.accuracy_gap.max, 0.0);
  EXPECT_EQ(c.runs_a.size(), 3u);
  const std::string table = comparison_table(c);
  EXPECT_NE(table.find("edge"), std::string::npos);
  EXPECT_THROW(compare_deployments(edge_profile(), edge_profile(), PersonFlow{}, 0.15, 120.0, {}), ConfigError);
}

TEST(Majority, ClosedForms) {
  const double p = 0.785;
  EXPECT_DOUBLE_EQ(majority_accuracy(1, p), p);
  EXPECT_NEAR(majority_accuracy(2, p), p, 1e-15);
  EXPECT_NEAR(majority_accuracy(3, p), p * p * p + 3 * p * p * (1 - p), 1e-15);
  EXPECT_NEAR(majority_accuracy(4, p), majority_accuracy(3, p), 1e-15);
  EXPECT_NEAR(majority_accuracy(9, 0.5), 0.5, 1e-14);
  EXPECT_GT(majority_accuracy(15, p), majority_accuracy(5, p));
  EXPECT_DOUBLE_EQ(majority_accuracy(0, p), 0.5);  // no frames: a coin flip
}

TEST(Scenario, JsonIsStrictAndRoundTrips) {
  Scenario s;
  s.duration_s = 90.0;
  s.seeds = {4, 8};
  s.profiles[1].rtt_ms = 150.0;
  const auto back = scenario_from_json(scenario_json(s));
  EXPECT_EQ(back.duration_s, 90.0);
  EXPECT_EQ(back.seeds, s.seeds);
  EXPECT_EQ(back.profiles.at(1).rtt_ms, 150.0);
  EXPECT_EQ(scenario_json(back), scenario_json(s));
  EXPECT_THROW(scenario_from_json("{\"duration\": 10}"), ConfigError);
  EXPECT_THROW(scenario_from_json("{\"profiles\": [{\"rtt_ms\": 1}]}"), ConfigError);
  EXPECT_THROW(scenario_from_json("{\"flow\": {\"fps\": 30, \"colour\": 1}}"), ConfigError);
  EXPECT_THROW(scenario_from_json("not json"), ConfigError);
  EXPECT_EQ(scenario_from_json("{}").profiles.size(), 2u);
}

TEST(Histogram, BinsCoverEveryLatency) {
  const std::string csv = latency_histogram_csv({1.0, 9.99, 10.0, 25.0}, 10.0);
  EXPECT_EQ(csv, "bin_lo_ms,bin_hi_ms,count\n0,10,2\n10,20,1\n20,30,1\n");
  EXPECT_EQ(latency_histogram_csv({}, 10.0), "bin_lo_ms,bin_hi_ms,count\n");
}
