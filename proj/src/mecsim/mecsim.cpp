#include "csfuse/mecsim/mecsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <optional>
#include <queue>
#include <random>

#include "csfuse/core/error.hpp"
#include "json.hpp"

namespace csfuse::mecsim {

void DeploymentProfile::validate() const {
  for (double v : {rtt_ms, detect_ms, synth_per_tile_ms, associate_ms, screen_ms}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("profile " + name + ": times must be finite and >= 0");
  }
  if (!(uplink_mbps >= 0.0)) throw ConfigError("profile " + name + ": uplink must be >= 0");
  if (tiles_per_frame < 0) throw ConfigError("profile " + name + ": tiles_per_frame must be >= 0");
  if (!(budget_ms > 0.0)) throw ConfigError("profile " + name + ": budget must be > 0");
  if (slots < 1) throw ConfigError("profile " + name + ": need at least one server slot");
}

DeploymentProfile edge_profile() { return {}; }

DeploymentProfile cloud_profile() {
  DeploymentProfile p;
  p.name = "cloud";
  p.rtt_ms = 200.0;
  p.uplink_mbps = 4.0;
  return p;
}

void PersonFlow::validate() const {
  if (!(arrivals_per_min >= 0.0) || !std::isfinite(arrivals_per_min)) throw ConfigError("flow: arrival rate must be >= 0");
  if (!(speed_mps > 0.0)) throw ConfigError("flow: speed must be > 0");
  if (!(zone_m > 0.0)) throw ConfigError("flow: zone length must be > 0");
  if (!(fps > 0.0)) throw ConfigError("flow: fps must be > 0");
  if (!(payload_kb >= 0.0)) throw ConfigError("flow: payload must be >= 0");
  if (k_min < 1) throw ConfigError("flow: k_min must be >= 1");
  if (!(p_frame >= 0.0 && p_frame <= 1.0)) throw ConfigError("flow: p_frame must lie in [0, 1]");
}

double majority_accuracy(int n, double p) {
  if (n <= 0) return 0.5;
  const int m = n % 2 == 1 ? n : n - 1;
  double total = 0.0;
  for (int k = m / 2 + 1; k <= m; ++k) {
    const double logc = std::lgamma(m + 1.0) - std::lgamma(k + 1.0) - std::lgamma(m - k + 1.0);
    total += std::exp(logc) * std::pow(p, k) * std::pow(1.0 - p, m - k);
  }
  return total;
}

namespace {

enum class Ev { Arrival, Tick, SlotDone, ZoneExit };

struct Event {
  double t;
  long seq;
  Ev kind;
  long a = 0;  // person or frame index

  bool operator>(const Event& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

struct Frame {
  double captured = 0.0;
  long person = -1;
  bool dwell = false;
};

enum class State { Queued, Walking, Dwelling, Gone };

struct PersonState {
  double arrived = 0.0;
  bool fever = false;
  double u = 0.0;  // quantile for the coupled correctness draw
  State state = State::Queued;
  int frames = 0;
  double dwell_start = 0.0;
};

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

SimMetrics simulate(const DeploymentProfile& prof, const PersonFlow& flow, double fever_rate, double duration_s,
                    std::uint64_t seed) {
  prof.validate();
  flow.validate();
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw ConfigError("simulate: duration must be > 0");
  if (!(fever_rate >= 0.0 && fever_rate <= 1.0)) throw ConfigError("simulate: fever rate must lie in [0, 1]");
  if (prof.uplink_mbps == 0.0 && flow.payload_kb > 0.0) {
    throw ConfigError("simulate: zero uplink bandwidth with a nonzero payload never finishes transmitting");
  }

  const double tx_s = flow.payload_kb > 0.0 ? flow.payload_kb * 8e3 / (prof.uplink_mbps * 1e6) : 0.0;
  const double service_s = tx_s + (prof.rtt_ms + prof.compute_ms()) / 1e3;
  const double budget_s = prof.budget_ms / 1e3;
  const double frame_dt = 1.0 / flow.fps;

  std::mt19937_64 rng(seed);
  std::vector<PersonState> people;
  {
    std::exponential_distribution<double> gap(flow.arrivals_per_min / 60.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double t = flow.arrivals_per_min > 0.0 ? gap(rng) : duration_s;
    while (t < duration_s) {
      PersonState p;
      p.arrived = t;
      p.fever = unit(rng) < fever_rate;
      p.u = unit(rng);
      people.push_back(p);
      t += gap(rng);
    }
  }

  SimMetrics m;
  m.duration_s = duration_s;
  m.persons_arrived = static_cast<long>(people.size());

  std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
  long seq = 0;
  auto push = [&](double t, Ev k, long a = 0) { events.push({t, seq++, k, a}); };
  for (std::size_t i = 0; i < people.size(); ++i) push(people[i].arrived, Ev::Arrival, static_cast<long>(i));
  if (!people.empty()) push(0.0, Ev::Tick);

  std::vector<Frame> frames;
  std::deque<long> line;
  long occupant = -1;
  long departed = 0;
  int busy = 0;
  std::optional<long> waiting;
  double dwell_total = 0.0;
  long frames_credited = 0;

  auto try_dispatch = [&](long f, double now) {
    const double latency = now - frames[f].captured + service_s;
    if (!frames[f].dwell && latency > budget_s) {
      ++m.frames_dropped;
      return;
    }
    ++busy;
    push(now + service_s, Ev::SlotDone, f);
  };

  auto enter = [&](long p, double now) {
    occupant = p;
    people[p].state = State::Walking;
    push(now + flow.transit_s(), Ev::ZoneExit, p);
  };

  auto leave = [&](long p, double now, bool screened) {
    auto& ps = people[p];
    ps.state = State::Gone;
    ++departed;
    if (screened) {
      ++m.persons_screened;
      if (now <= duration_s) ++m.screened_in_window;
      frames_credited += ps.frames;
      const bool correct = ps.u < majority_accuracy(ps.frames, flow.p_frame);
      m.confusion.add(correct ? ps.fever : !ps.fever, ps.fever);
    } else {
      ++m.persons_missed;
    }
    if (waiting && frames[*waiting].person == p) {
      ++m.frames_dropped;
      waiting.reset();
    }
    occupant = -1;
    if (!line.empty()) {
      const long next = line.front();
      line.pop_front();
      enter(next, now);
    }
  };

  while (!events.empty()) {
    const Event e = events.top();
    events.pop();
    const double now = e.t;
    switch (e.kind) {
      case Ev::Arrival:
        if (occupant < 0) enter(e.a, now);
        else line.push_back(e.a);
        break;
      case Ev::Tick: {
        if (occupant >= 0) {
          ++m.frames_generated;
          const long f = static_cast<long>(frames.size());
          frames.push_back({now, occupant, people[occupant].state == State::Dwelling});
          if (busy < prof.slots) {
            try_dispatch(f, now);
          } else {
            if (waiting) ++m.frames_dropped;
            waiting = f;
          }
        }
        if (departed < m.persons_arrived) push(now + frame_dt, Ev::Tick);
        break;
      }
      case Ev::SlotDone: {
        --busy;
        ++m.frames_processed;
        const Frame& fr = frames[e.a];
        m.latencies_ms.push_back((now - fr.captured) * 1e3);
        auto& ps = people[fr.person];
        if (ps.state == State::Walking || ps.state == State::Dwelling) {
          ++ps.frames;
          if (ps.state == State::Dwelling && ps.frames >= flow.k_min) {
            dwell_total += now - ps.dwell_start;
            leave(fr.person, now, true);
          }
        }
        if (waiting && busy < prof.slots) {
          const long f = *waiting;
          waiting.reset();
          try_dispatch(f, now);
        }
        break;
      }
      case Ev::ZoneExit: {
        auto& ps = people[e.a];
        if (ps.frames >= flow.k_min) {
          leave(e.a, now, true);
        } else if (flow.dwell) {
          ps.state = State::Dwelling;
          ps.dwell_start = now;
        } else {
          leave(e.a, now, false);
        }
        break;
      }
    }
  }

  m.offered_per_min = static_cast<double>(m.persons_arrived) / duration_s * 60.0;
  m.throughput_per_min = static_cast<double>(m.screened_in_window) / duration_s * 60.0;
  m.latency_p50_ms = percentile(m.latencies_ms, 0.5);
  m.latency_p90_ms = percentile(m.latencies_ms, 0.9);
  m.latency_p99_ms = percentile(m.latencies_ms, 0.99);
  m.latency_max_ms = m.latencies_ms.empty() ? 0.0 : *std::max_element(m.latencies_ms.begin(), m.latencies_ms.end());
  if (m.persons_screened > 0) {
    m.mean_frames_per_person = static_cast<double>(frames_credited) / static_cast<double>(m.persons_screened);
    m.mean_dwell_s = dwell_total / static_cast<double>(m.persons_screened);
    m.accuracy = screening::accuracy(m.confusion);
  }
  return m;
}

namespace {

Spread spread(const std::vector<double>& v) {
  Spread s{0.0, INFINITY, -INFINITY};
  for (double x : v) {
    s.mean += x / static_cast<double>(v.size());
    s.min = std::min(s.min, x);
    s.max = std::max(s.max, x);
  }
  return s;
}

}  // namespace

Comparison compare_deployments(const DeploymentProfile& a, const DeploymentProfile& b, const PersonFlow& flow,
                               double fever_rate, double duration_s, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("compare_deployments: empty seed list");
  Comparison c;
  c.name_a = a.name;
  c.name_b = b.name;
  std::vector<double> ta, tb, r, aa, ab, gap;
  for (auto s : seeds) {
    c.runs_a.push_back(simulate(a, flow, fever_rate, duration_s, s));
    c.runs_b.push_back(simulate(b, flow, fever_rate, duration_s, s));
    const auto& x = c.runs_a.back();
    const auto& y = c.runs_b.back();
    ta.push_back(x.throughput_per_min);
    tb.push_back(y.throughput_per_min);
    r.push_back(y.throughput_per_min > 0.0 ? x.throughput_per_min / y.throughput_per_min : INFINITY);
    aa.push_back(x.accuracy);
    ab.push_back(y.accuracy);
    gap.push_back(x.accuracy - y.accuracy);
  }
  c.throughput_a = spread(ta);
  c.throughput_b = spread(tb);
  c.ratio = spread(r);
  c.accuracy_a = spread(aa);
  c.accuracy_b = spread(ab);
  c.accuracy_gap = spread(gap);
  return c;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

DeploymentProfile profile_from(const json& j) {
  check_keys(j, {"name", "rtt_ms", "uplink_mbps", "detect_ms", "synth_per_tile_ms", "tiles_per_frame", "associate_ms",
                 "screen_ms", "budget_ms", "slots"},
             "profile");
  DeploymentProfile p;
  if (!j.contains("name")) throw ConfigError("profile: missing 'name'");
  read(j, "name", p.name);
  read(j, "rtt_ms", p.rtt_ms);
  read(j, "uplink_mbps", p.uplink_mbps);
  read(j, "detect_ms", p.detect_ms);
  read(j, "synth_per_tile_ms", p.synth_per_tile_ms);
  read(j, "tiles_per_frame", p.tiles_per_frame);
  read(j, "associate_ms", p.associate_ms);
  read(j, "screen_ms", p.screen_ms);
  read(j, "budget_ms", p.budget_ms);
  read(j, "slots", p.slots);
  p.validate();
  return p;
}

ordered_json profile_to(const DeploymentProfile& p) {
  return {{"name", p.name},           {"rtt_ms", p.rtt_ms},
          {"uplink_mbps", p.uplink_mbps}, {"detect_ms", p.detect_ms},
          {"synth_per_tile_ms", p.synth_per_tile_ms}, {"tiles_per_frame", p.tiles_per_frame},
          {"associate_ms", p.associate_ms}, {"screen_ms", p.screen_ms},
          {"budget_ms", p.budget_ms},     {"slots", p.slots}};
}

}  // namespace

Scenario scenario_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    check_keys(j, {"profiles", "flow", "oracle_rate", "duration_s", "seeds"}, "scenario");
    Scenario s;
    if (j.contains("profiles")) {
      s.profiles.clear();
      for (const auto& p : j.at("profiles")) s.profiles.push_back(profile_from(p));
    } else {
      s.profiles = {edge_profile(), cloud_profile()};
    }
    if (j.contains("flow")) {
      const auto& f = j.at("flow");
      check_keys(f, {"arrivals_per_min", "speed_mps", "zone_m", "fps", "payload_kb", "dwell", "k_min", "p_frame"}, "flow");
      read(f, "arrivals_per_min", s.flow.arrivals_per_min);
      read(f, "speed_mps", s.flow.speed_mps);
      read(f, "zone_m", s.flow.zone_m);
      read(f, "fps", s.flow.fps);
      read(f, "payload_kb", s.flow.payload_kb);
      read(f, "dwell", s.flow.dwell);
      read(f, "k_min", s.flow.k_min);
      read(f, "p_frame", s.flow.p_frame);
    }
    read(j, "oracle_rate", s.fever_rate);
    read(j, "duration_s", s.duration_s);
    read(j, "seeds", s.seeds);
    s.flow.validate();
    if (s.profiles.empty()) throw ConfigError("scenario: no profiles");
    if (!(s.duration_s > 0.0)) throw ConfigError("scenario: duration_s must be > 0");
    if (!(s.fever_rate >= 0.0 && s.fever_rate <= 1.0)) throw ConfigError("scenario: oracle_rate must lie in [0, 1]");
    if (s.seeds.empty()) throw ConfigError("scenario: seeds must be non-empty");
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

std::string scenario_json(const Scenario& s) {
  ordered_json profiles = ordered_json::array();
  for (const auto& p : s.profiles) profiles.push_back(profile_to(p));
  const ordered_json j{{"profiles", profiles},
                       {"flow",
                        {{"arrivals_per_min", s.flow.arrivals_per_min},
                         {"speed_mps", s.flow.speed_mps},
                         {"zone_m", s.flow.zone_m},
                         {"fps", s.flow.fps},
                         {"payload_kb", s.flow.payload_kb},
                         {"dwell", s.flow.dwell},
                         {"k_min", s.flow.k_min},
                         {"p_frame", s.flow.p_frame}}},
                       {"oracle_rate", s.fever_rate},
                       {"duration_s", s.duration_s},
                       {"seeds", s.seeds}};
  return j.dump(2) + "\n";
}

std::string metrics_json(const SimMetrics& m) {
  const auto& c = m.confusion;
  const ordered_json j{{"duration_s", m.duration_s},
                       {"persons_arrived", m.persons_arrived},
                       {"persons_screened", m.persons_screened},
                       {"persons_missed", m.persons_missed},
                       {"screened_in_window", m.screened_in_window},
                       {"offered_per_min", m.offered_per_min},
                       {"throughput_per_min", m.throughput_per_min},
                       {"frames_generated", m.frames_generated},
                       {"frames_processed", m.frames_processed},
                       {"frames_dropped", m.frames_dropped},
                       {"latency_ms", {{"p50", m.latency_p50_ms}, {"p90", m.latency_p90_ms}, {"p99", m.latency_p99_ms}, {"max", m.latency_max_ms}}},
                       {"mean_frames_per_person", m.mean_frames_per_person},
                       {"mean_dwell_s", m.mean_dwell_s},
                       {"confusion", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
                       {"accuracy", m.accuracy}};
  return j.dump(2) + "\n";
}

std::string latency_histogram_csv(const std::vector<double>& lat, double bin_ms) {
  if (!(bin_ms > 0.0)) throw ConfigError("latency histogram: bin width must be > 0");
  std::string out = "bin_lo_ms,bin_hi_ms,count\n";
  if (lat.empty()) return out;
  const double top = *std::max_element(lat.begin(), lat.end());
  const auto bins = static_cast<std::size_t>(std::floor(top / bin_ms)) + 1;
  std::vector<long> counts(bins, 0);
  for (double v : lat) ++counts[std::min(bins - 1, static_cast<std::size_t>(std::floor(v / bin_ms)))];
  char buf[96];
  for (std::size_t i = 0; i < bins; ++i) {
    std::snprintf(buf, sizeof buf, "%g,%g,%ld\n", static_cast<double>(i) * bin_ms, static_cast<double>(i + 1) * bin_ms,
                  counts[i]);
    out += buf;
  }
  return out;
}

std::string comparison_table(const Comparison& c) {
  auto mean_of = [](const std::vector<SimMetrics>& runs, auto field) {
    double s = 0.0;
    for (const auto& r : runs) s += static_cast<double>(field(r));
    return s / static_cast<double>(runs.size());
  };
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-28s %12s %12s\n", "metric", c.name_a.c_str(), c.name_b.c_str());
  out += buf;
  auto row = [&](const char* label, double a, double b, const char* fmt) {
    char va[32], vb[32];
    std::snprintf(va, sizeof va, fmt, a);
    std::snprintf(vb, sizeof vb, fmt, b);
    std::snprintf(buf, sizeof buf, "%-28s %12s %12s\n", label, va, vb);
    out += buf;
  };
  row("throughput (persons/min)", c.throughput_a.mean, c.throughput_b.mean, "%.1f");
  row("accuracy (%)", 100.0 * c.accuracy_a.mean, 100.0 * c.accuracy_b.mean, "%.1f");
  row("latency p50 (ms)", mean_of(c.runs_a, [](const SimMetrics& m) { return m.latency_p50_ms; }),
      mean_of(c.runs_b, [](const SimMetrics& m) { return m.latency_p50_ms; }), "%.1f");
  row("frames processed", mean_of(c.runs_a, [](const SimMetrics& m) { return m.frames_processed; }),
      mean_of(c.runs_b, [](const SimMetrics& m) { return m.frames_processed; }), "%.0f");
  row("frames dropped", mean_of(c.runs_a, [](const SimMetrics& m) { return m.frames_dropped; }),
      mean_of(c.runs_b, [](const SimMetrics& m) { return m.frames_dropped; }), "%.0f");
  row("mean dwell (s)", mean_of(c.runs_a, [](const SimMetrics& m) { return m.mean_dwell_s; }),
      mean_of(c.runs_b, [](const SimMetrics& m) { return m.mean_dwell_s; }), "%.2f");
  std::snprintf(buf, sizeof buf, "throughput ratio %s/%s: %.2f (min %.2f, max %.2f over %zu seeds)\n", c.name_a.c_str(),
                c.name_b.c_str(), c.ratio.mean, c.ratio.min, c.ratio.max, c.runs_a.size());
  out += buf;
  return out;
}

}  // namespace csfuse::mecsim
