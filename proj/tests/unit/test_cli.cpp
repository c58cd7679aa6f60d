#include <gtest/gtest.h>

#include <sstream>

#include "csfuse/app/commands.hpp"
#include "csfuse/app/config.hpp"
#include "csfuse/core/error.hpp"
#include "csfuse/core/io.hpp"
#include "temp_dir.hpp"

using namespace csfuse;
using namespace csfuse::app;
using testsupport::TempDir;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::string write_config(const TempDir& d, const std::string& json) {
  const auto p = d / "config.json";
  io::atomic_write(p, json);
  return p.string();
}

const char* kTinyConfig = R"({
  "seed": 3,
  "data": {"n": 4},
  "train": {"iterations": 2, "batch": 2},
  "scenario": {"duration_s": 30, "seeds": [1, 2]}
})";

}  // namespace

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(parse_config(R"({"sede": 1})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"train": {"iters": 1}})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"seed": "one"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"scale": "huge"})"), ConfigError);
  EXPECT_THROW(parse_config("{"), ConfigError);
}

TEST(Config, DefaultsAndOverrides) {
  const auto c = parse_config("{}");
  EXPECT_EQ(c.scale, "test");
  EXPECT_EQ(c.n, 120u);
  const auto p = parse_config(R"({"scale": "test"})", "paper");
  EXPECT_EQ(p.scale, "paper");
  EXPECT_EQ(config_json(parse_config(config_json(c))), config_json(c));
  EXPECT_NE(config_json(c), config_json(parse_config(R"({"seed": 1})")));
}

TEST(Cli, EvalReportsTruncatedAccuracy) {
  TempDir d("eval");
  std::string csv = "record_id,predicted,truth\n";
  auto add = [&](int count, int p, int t) {
    for (int i = 0; i < count; ++i) csv += "r" + std::to_string(csv.size()) + "," + std::to_string(p) + "," + std::to_string(t) + "\n";
  };
  add(6, 1, 1);
  add(2, 1, 0);
  add(110, 0, 0);
  add(24, 0, 1);
  io::atomic_write(d / "e.csv", csv);
  const auto r = cli({"eval", "--input", (d / "e.csv").string(), "--out", (d / "o").string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("accuracy 81.6% (116/142; TP 6 FP 2 TN 110 FN 24)"), std::string::npos) << r.out;
  EXPECT_TRUE(std::filesystem::exists(d / "o" / "eval.json"));
}

TEST(Cli, ExitCodesByFailureKind) {
  TempDir d("codes");
  EXPECT_EQ(cli({}).code, kConfigError);
  EXPECT_EQ(cli({"frobnicate"}).code, kConfigError);
  EXPECT_EQ(cli({"eval"}).code, kConfigError);
  EXPECT_EQ(cli({"simulate", "--scale", "huge"}).code, kConfigError);
  EXPECT_EQ(cli({"simulate", "--config", write_config(d, R"({"bogus": 1})")}).code, kConfigError);
  EXPECT_EQ(cli({"eval", "--input", (d / "missing.csv").string(), "--out", (d / "o").string()}).code, kDataError);
  io::atomic_write(d / "bad.csv", "wrong,header\n");
  EXPECT_EQ(cli({"eval", "--input", (d / "bad.csv").string(), "--out", (d / "o").string()}).code, kDataError);
  const auto r = cli({"screen", "--out", (d / "nothing").string()});
  EXPECT_EQ(r.code, kDataError);
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, GenDataIsByteDeterministic) {
  TempDir a("gd_a"), b("gd_b");
  for (auto* d : {&a, &b}) {
    const auto r = cli({"gen-data", "--config", write_config(*d, kTinyConfig), "--out", (*d / "o").string()});
    ASSERT_EQ(r.code, kOk) << r.err;
  }
  for (const char* f : {"data/manifest.csv", "data/truth.csv", "data/images/s00000_visual.ppm", "data/images/s00003_thermal.pgm",
                        "gen-data.log"})
    EXPECT_EQ(io::read_file(a / "o" / f), io::read_file(b / "o" / f)) << f;
}

TEST(Cli, SimulateIsByteDeterministic) {
  TempDir a("sim_a"), b("sim_b");
  for (auto* d : {&a, &b}) {
    const auto r = cli({"simulate", "--config", write_config(*d, kTinyConfig), "--out", (*d / "o").string()});
    ASSERT_EQ(r.code, kOk) << r.err;
  }
  for (const char* f : {"edge_metrics.json", "cloud_metrics.json", "edge_latency.csv", "simulate.log"})
    EXPECT_EQ(io::read_file(a / "o" / f), io::read_file(b / "o" / f)) << f;
  const auto r = cli({"compare", "--config", write_config(a, kTinyConfig), "--out", (a / "c").string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("cloud"), std::string::npos);
}

TEST(Cli, TrainThenSynthWritesATile) {
  TempDir d("synth");
  const auto cfg = write_config(d, kTinyConfig);
  const auto out = (d / "o").string();
  ASSERT_EQ(cli({"gen-data", "--config", cfg, "--out", out}).code, kOk);
  const auto t = cli({"train", "--config", cfg, "--out", out});
  ASSERT_EQ(t.code, kOk) << t.err;
  EXPECT_TRUE(std::filesystem::exists(d / "o" / "weights.csgw"));
  EXPECT_TRUE(std::filesystem::exists(d / "o" / "history.csv"));
  const auto s = cli({"synth", "--config", cfg, "--out", out, "--input", (d / "o" / "data/images/s00001_thermal.pgm").string()});
  ASSERT_EQ(s.code, kOk) << s.err;
  const auto ppm = io::read_file(d / "o" / "synth.ppm");
  EXPECT_EQ(ppm.substr(0, 2), "P6");
  EXPECT_NE(s.out.find("synthesized 16x16 tile"), std::string::npos) << s.out;
}
