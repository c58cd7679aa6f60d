#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "csfuse/core/geometry.hpp"
#include "csfuse/core/image.hpp"

namespace csfuse::data {

/// Linear map from raw 16-bit counts to degrees Celsius.
struct ThermalCalib {
  double a = 0.0005;
  double c = 10.0;

  double to_celsius(double counts) const { return a * counts + c; }
  double to_counts(double celsius) const { return (celsius - c) / a; }
};

/// Parameters of the synthetic two-camera rig and scene population.
struct RigSpec {
  int frame_w = 640;
  int frame_h = 160;
  double focal_px = 320.0;   // shared by both cameras
  double cx = 48.0;          // principal point
  double cy = 80.0;
  double face_ft = 0.8;      // physical face diameter
  double crop_scale = 1.2;   // tile crop = face box scaled about its center
  double parallax_k = 112.0; // px*ft: horizontal parallax K/d
  double parallax_c0 = 10.0; // px: constant horizontal misalignment
  double roll = 0.01;        // rad: small relative roll of the thermal camera
  double min_distance_ft = 4.0;
  double max_distance_ft = 15.0;
  double min_offset_ft = 0.0;
  double max_offset_ft = 6.0;
  double y_jitter_px = 8.0;
  double landmark_jitter = 0.04;  // face-box units
  ThermalCalib calib;
  double ambient_c = 22.0;
  double kappa_c_per_ft = 0.1;    // canthus reading falls by kappa per foot
  double skin_drop_c = 2.0;       // skin runs this much cooler than the canthus
  double thermal_mix = 3.0;       // °C per unit luma contrast
  double thermal_blur_px = 1.0;
  double canthus_spot_px = 1.5;
  double fever_rate = 0.15;
  double healthy_mean_c = 36.8;
  double healthy_sd_c = 0.2;
  double fever_mean_c = 38.6;
  double fever_sd_c = 0.3;
};

/// Face layout in face-box units (the face is the disk inscribed in its box).
struct FaceShape {
  std::array<Point2, 4> rel;  // left canthus, right canthus, nose tip, mouth center
  double eye_hw = 0.085;
  double eye_hh = 0.04;
  double brow_gap = 0.07;
  double mouth_hw = 0.12;
  double mouth_hh = 0.035;
  std::array<double, 3> skin{205.0, 155.0, 125.0};
};

FaceShape canonical_face();

struct Person {
  double distance_ft = 8.0;
  double offset_ft = 0.0;
  double y_jitter_px = 0.0;
  FaceShape shape = canonical_face();
  double body_temp_c = 36.8;
  bool fever = false;
};

using Rng = std::mt19937_64;

Person sample_person(const RigSpec& rig, Rng& rng);

/// Square face box in the visual frame.
BBox face_box(const Person& p, const RigSpec& rig);
/// Face box grown by crop_scale about its center.
BBox crop_box(const BBox& face, double scale);

FeaturePoints visual_landmarks(const Person& p, const RigSpec& rig);
/// Thermal image position of a visual-frame point on a surface at `distance_ft`.
Point2 warp_to_thermal(Point2 p, double distance_ft, const RigSpec& rig);
Point2 warp_to_visual(Point2 q, double distance_ft, const RigSpec& rig);
FeaturePoints thermal_landmarks(const Person& p, const RigSpec& rig);

/// Horizontal parallax of the face center, K/d + c0 - roll*(y - cy).
double horizontal_parallax(const Person& p, const RigSpec& rig);

/// Canthus temperature the thermal camera sees (body minus the distance ramp).
double canthus_temperature(const Person& p, const RigSpec& rig);

RgbImage render_visual(const std::vector<Person>& people, const RigSpec& rig);
Gray16Image render_thermal(const std::vector<Person>& people, const RigSpec& rig);

/// Thermal frame that is the visual frame's channel mean shifted right by `shift_px`
/// (counts = mean/255 * 65535); used to test the disparity sweep in isolation.
Gray16Image shifted_gray(const RgbImage& visual, double shift_px);

}  // namespace csfuse::data

namespace csfuse::data {

/// Face rendered straight into a T x T tile whose extent is the crop box (face box scaled by
/// crop_scale), over the mid-frame background color.
RgbImage render_face_tile(const FaceShape& face, std::size_t tile, double crop_scale, const RigSpec& rig);

/// Landmark positions of `face` in such a tile.
FeaturePoints face_tile_landmarks(const FaceShape& face, std::size_t tile, double crop_scale);

}  // namespace csfuse::data
