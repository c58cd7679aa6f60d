#include <gtest/gtest.h>

#include <cmath>

#include "csfuse/core/error.hpp"
#include "csfuse/data/rig.hpp"
#include "csfuse/data/templates.hpp"
#include "csfuse/screening/screening.hpp"

using namespace csfuse;
using namespace csfuse::screening;

namespace {

ThermalFrame flat_frame(double celsius, int w = 20, int h = 10) {
  ThermalFrame f{Gray16Image(w, h), data::ThermalCalib{}};
  std::fill(f.raster.pixels.begin(), f.raster.pixels.end(),
            static_cast<std::uint16_t>(std::lround(f.calib.to_counts(celsius))));
  return f;
}

void set_celsius(ThermalFrame& f, int x, int y, double c) {
  f.raster.at(x, y) = static_cast<std::uint16_t>(std::lround(f.calib.to_counts(c)));
}

}  // namespace

TEST(Canthus, ReadsWindowMaxOverBothPoints) {
  ThermalFrame f = flat_frame(30.0);
  set_celsius(f, 5, 5, 36.0);
  set_celsius(f, 14, 4, 35.0);
  EXPECT_NEAR(read_canthus_temperature(f, {{4.2, 4.9}, {14.5, 4.5}}), 36.0, 1e-3);
  // radius 0 only sees the containing pixel
  EXPECT_NEAR(read_canthus_temperature(f, {{4.2, 4.9}, {14.5, 4.5}}, 0), 35.0, 1e-3);
}

TEST(Canthus, WindowOutsideFrameIsAnError) {
  const ThermalFrame f = flat_frame(30.0);
  EXPECT_THROW(read_canthus_temperature(f, {{0.5, 5.0}, {10, 5}}), DataError);
  EXPECT_THROW(read_canthus_temperature(f, {{5, 5}, {19.5, 5}}), DataError);
  EXPECT_NO_THROW(read_canthus_temperature(f, {{1.0, 1.0}, {18.9, 8.9}}));
}

TEST(Compensation, AddsKappaTimesDistance) {
  const CompensationModel m;
  const auto c = compensate_temperature(35.2, 8.0, m);
  EXPECT_NEAR(c.t_comp, 36.0, 1e-12);
  EXPECT_FALSE(c.extrapolated);
  EXPECT_TRUE(compensate_temperature(35.0, 25.0, m).extrapolated);
  EXPECT_DOUBLE_EQ(compensate_temperature(35.0, 0.0, m).t_comp, 35.0);
  EXPECT_THROW(compensate_temperature(35.0, -1.0, m), DataError);
  EXPECT_THROW(compensate_temperature(35.0, std::nan(""), m), DataError);
}

TEST(Compensation, FitRecoversKappaFromNoisyReadings) {
  data::Rng rng(3);
  std::uniform_real_distribution<double> ud(4.0, 15.0);
  std::normal_distribution<double> body(36.8, 0.3), noise(0.0, 0.05);
  std::vector<double> d, meas, b;
  for (int i = 0; i < 200; ++i) {
    d.push_back(ud(rng));
    b.push_back(body(rng));
    meas.push_back(b.back() - 0.1 * d.back() + noise(rng));
  }
  const auto m = fit_compensation(d, meas, b);
  EXPECT_NEAR(m.kappa, 0.1, 0.005);
  EXPECT_GE(m.min_distance_ft, 4.0);
  EXPECT_LE(m.max_distance_ft, 15.0);
  EXPECT_THROW(fit_compensation({}, {}, {}), DataError);
}

TEST(Fever, ThresholdIsInclusive) {
  EXPECT_TRUE(classify_fever(38.0));
  EXPECT_FALSE(classify_fever(37.999));
  EXPECT_TRUE(classify_fever(37.6, 37.5));
}

TEST(Accuracy, CountsAndExamples) {
  ConfusionCounts c{6, 2, 110, 24};
  EXPECT_EQ(c.total(), 142);
  EXPECT_NEAR(accuracy(c), 116.0 / 142.0, 1e-15);
  EXPECT_EQ(percent_truncated(accuracy(c)), "81.6");
  EXPECT_EQ(percent_truncated(1.0), "100.0");
  EXPECT_EQ(percent_truncated(0.8169999), "81.6");
  EXPECT_EQ(percent_truncated(0.817), "81.7");
  EXPECT_THROW(accuracy(ConfusionCounts{}), DataError);
  ConfusionCounts d;
  d.add(true, true);
  d.add(true, false);
  d.add(false, false);
  d.add(false, true);
  EXPECT_EQ(d.tp + d.fp + d.tn + d.fn, 4);
  EXPECT_EQ(d.fn, 1);
}

TEST(EvalCsv, ParsesFlagsAndRejectsBadInput) {
  const auto rows = parse_eval_csv("record_id,predicted,truth\na,1,1\nb,false,true\nc,0,0\n");
  ASSERT_EQ(rows.size(), 3u);
  const auto c = confusion(rows);
  EXPECT_EQ(c.tp, 1);
  EXPECT_EQ(c.fn, 1);
  EXPECT_EQ(c.tn, 1);
  EXPECT_THROW(parse_eval_csv("id,p,t\na,1,1\n"), DataError);
  EXPECT_THROW(parse_eval_csv("record_id,predicted,truth\na,yes,1\n"), DataError);
  EXPECT_THROW(parse_eval_csv("record_id,predicted,truth\na,1\n"), DataError);
}

TEST(Records, JsonRoundTripKeepsKeyOrder) {
  PersonRecord r;
  r.id = "f0:1";
  r.b_y = {1, 2, 3, 4};
  r.b_x = {5, 6, 7, 8};
  r.canthus = {9.5, 10.5};
  r.t_meas = 36.25;
  r.distance_ft = 7.5;
  r.offset_ft = -0.5;
  r.t_comp = 37.0;
  r.pose_extrapolated = true;
  const std::string s = record_json(r);
  EXPECT_LT(s.find("\"id\""), s.find("\"b_y\""));
  EXPECT_LT(s.find("\"t_meas_c\""), s.find("\"t_comp_c\""));
  EXPECT_EQ(s.find('\n'), std::string::npos);
  const auto back = record_from_json(s);
  EXPECT_EQ(back.id, r.id);
  EXPECT_EQ(back.b_x.w, 7.0);
  EXPECT_EQ(back.t_comp, 37.0);
  EXPECT_TRUE(back.pose_extrapolated);
  EXPECT_EQ(record_json(back), s);
}

class ScreenPipeline : public ::testing::Test {
 protected:
  static constexpr std::size_t kTile = 16;
  data::RigSpec rig;
  ScreeningBundle bundle;

  void SetUp() override {
    bundle.detector = data::make_detector(rig, kTile);
    bundle.synthesizer = fusion::identity_synthesizer();
    bundle.associate.tile = kTile;
    bundle.associate.crop_scale = rig.crop_scale;
    // Constant regressor: every face is 6 ft away, offset 1 ft.
    auto& reg = bundle.regressor;
    reg.distance.coef.assign(9, 0.0);
    reg.distance.coef[0] = 6.0;
    reg.offset.coef.assign(9, 0.0);
    reg.offset.coef[0] = 1.0;
    reg.hull_min.assign(8, -1e9);
    reg.hull_max.assign(8, 1e9);
    reg.tile = kTile;
  }

  // Thermal frame = visual luma shifted by `shift` at half intensity, with a hot plateau at
  // both canthi.
  Gray16Image thermal_for(const data::Person& p, const RgbImage& vis, double shift, double canthus_c) {
    Gray16Image th = data::shifted_gray(vis, shift);
    for (auto& v : th.pixels) v /= 2;
    const auto lm = data::visual_landmarks(p, rig);
    const auto hot = static_cast<std::uint16_t>(std::lround(rig.calib.to_counts(canthus_c)));
    for (int j = 0; j < 2; ++j) {
      const int cx = int(std::floor(lm[j].x + shift)), cy = int(std::floor(lm[j].y));
      for (int y = cy - 1; y <= cy + 1; ++y)
        for (int x = cx - 1; x <= cx + 1; ++x) th.at(x, y) = hot;
    }
    return th;
  }
};

TEST_F(ScreenPipeline, FeverIsFlaggedAfterCompensation) {
  data::Person p;
  p.distance_ft = 6.0;
  p.offset_ft = 1.0;
  const RgbImage vis = data::render_visual({p}, rig);
  const auto res = screen_frame_pair(vis, thermal_for(p, vis, 28.0, 38.0), bundle, "f0");
  ASSERT_EQ(res.records.size(), 1u);
  const auto& r = res.records[0];
  EXPECT_EQ(r.id, "f0:0");
  EXPECT_NEAR(r.t_meas, 38.0, 1e-3);
  EXPECT_NEAR(r.t_comp, r.t_meas + 0.6, 1e-12);
  EXPECT_TRUE(r.fever);
  EXPECT_TRUE(r.sane);
  EXPECT_DOUBLE_EQ(r.distance_ft, 6.0);
}

TEST_F(ScreenPipeline, HealthyReadingIsNotFlagged) {
  data::Person p;
  p.distance_ft = 6.0;
  const RgbImage vis = data::render_visual({p}, rig);
  const auto res = screen_frame_pair(vis, thermal_for(p, vis, 28.0, 36.2), bundle, "f1");
  ASSERT_EQ(res.records.size(), 1u);
  EXPECT_NEAR(res.records[0].t_comp, 36.8, 1e-3);
  EXPECT_FALSE(res.records[0].fever);
}

TEST_F(ScreenPipeline, EmptySceneGivesNoRecords) {
  const RgbImage vis = data::render_visual({}, rig);
  const auto res = screen_frame_pair(vis, data::shifted_gray(vis, 28.0), bundle, "f2");
  EXPECT_TRUE(res.records.empty());
  EXPECT_TRUE(res.skipped.empty());
}

TEST_F(ScreenPipeline, AssociationIgnoresThermalGain) {
  data::Person p;
  p.distance_ft = 9.0;
  p.offset_ft = 2.0;
  const RgbImage vis = data::render_visual({p}, rig);
  const Gray16Image full = data::shifted_gray(vis, 24.0);
  Gray16Image half = full;
  for (auto& v : half.pixels) v /= 2;
  const auto a = screen_frame_pair(vis, full, bundle, "a"), b = screen_frame_pair(vis, half, bundle, "b");
  ASSERT_EQ(a.records.size(), 1u);
  ASSERT_EQ(b.records.size(), 1u);
  EXPECT_EQ(a.records[0].b_x.x, b.records[0].b_x.x);
}

TEST_F(ScreenPipeline, NegativeDistanceBecomesSkip) {
  bundle.regressor.distance.coef[0] = -2.0;
  data::Person p;
  const RgbImage vis = data::render_visual({p}, rig);
  const auto res = screen_frame_pair(vis, thermal_for(p, vis, 28.0, 36.0), bundle, "f3");
  EXPECT_TRUE(res.records.empty());
  ASSERT_EQ(res.skipped.size(), 1u);
}
