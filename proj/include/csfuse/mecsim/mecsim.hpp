#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csfuse/screening/screening.hpp"

namespace csfuse::mecsim {

struct DeploymentProfile {
  std::string name = "edge";
  double rtt_ms = 1.0;
  double uplink_mbps = 100.0;
  double detect_ms = 10.0;
  double synth_per_tile_ms = 4.0;
  int tiles_per_frame = 7;  // one synthesized tile per disparity candidate
  double associate_ms = 7.0;
  double screen_ms = 5.0;
  double budget_ms = 100.0;
  int slots = 1;

  double compute_ms() const { return detect_ms + synth_per_tile_ms * tiles_per_frame + associate_ms + screen_ms; }
  void validate() const;
};

/// RTT 1 ms, 100 Mbps private 5G uplink, 50 ms compute.
DeploymentProfile edge_profile();
/// RTT 200 ms, 4 Mbps WAN uplink, same compute.
DeploymentProfile cloud_profile();

struct PersonFlow {
  double arrivals_per_min = 72.0;  // Poisson
  double speed_mps = 1.0;
  double zone_m = 0.9;             // screening zone, one person at a time
  double fps = 30.0;
  double payload_kb = 200.0;       // 1 KB = 1000 bytes
  bool dwell = true;               // unscreened persons wait at the zone exit
  int k_min = 5;
  double p_frame = 0.785;          // per-frame classification accuracy

  double transit_s() const { return zone_m / speed_mps; }
  void validate() const;
};

struct SimMetrics {
  double duration_s = 0.0;
  long persons_arrived = 0;
  long persons_screened = 0;
  long persons_missed = 0;          // left unscreened (dwell off)
  long screened_in_window = 0;      // screened before duration_s
  double offered_per_min = 0.0;
  double throughput_per_min = 0.0;
  long frames_generated = 0;
  long frames_processed = 0;
  long frames_dropped = 0;
  double latency_p50_ms = 0.0;
  double latency_p90_ms = 0.0;
  double latency_p99_ms = 0.0;
  double latency_max_ms = 0.0;
  double mean_frames_per_person = 0.0;
  double mean_dwell_s = 0.0;
  screening::ConfusionCounts confusion;
  double accuracy = 0.0;  // 0 when nobody was screened
  std::vector<double> latencies_ms;  // processed frames, completion order
};

/// Arrivals stop at `duration_s`; the run continues until everyone has left the zone.
SimMetrics simulate(const DeploymentProfile& profile, const PersonFlow& flow, double fever_rate, double duration_s,
                    std::uint64_t seed);

/// P(majority of n independent frames is right), ties split evenly (equals the odd n-1 case).
double majority_accuracy(int n, double p_frame);

struct Spread {
  double mean = 0.0, min = 0.0, max = 0.0;
};

struct Comparison {
  std::string name_a, name_b;
  Spread throughput_a, throughput_b, ratio;  // ratio = a / b
  Spread accuracy_a, accuracy_b, accuracy_gap;  // gap = a - b
  std::vector<SimMetrics> runs_a, runs_b;
};

Comparison compare_deployments(const DeploymentProfile& a, const DeploymentProfile& b, const PersonFlow& flow,
                               double fever_rate, double duration_s, const std::vector<std::uint64_t>& seeds);

struct Scenario {
  std::vector<DeploymentProfile> profiles{edge_profile(), cloud_profile()};
  PersonFlow flow;
  double fever_rate = 0.15;
  double duration_s = 600.0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

/// Strict: unknown keys are ConfigErrors.
Scenario scenario_from_json(const std::string& text);
std::string scenario_json(const Scenario& s);
std::string metrics_json(const SimMetrics& m);
/// bin_lo_ms,bin_hi_ms,count over processed-frame latencies.
std::string latency_histogram_csv(const std::vector<double>& latencies_ms, double bin_ms = 10.0);
/// Two-column table, one row per metric.
std::string comparison_table(const Comparison& c);

}  // namespace csfuse::mecsim
