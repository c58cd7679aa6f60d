#include "csfuse/data/rig.hpp"

#include <algorithm>
#include <cmath>

namespace csfuse::data {
namespace {

using Rgb = std::array<double, 3>;

constexpr int kSuper = 4;

Rgb background(double /*x*/, double y, const RigSpec& rig) {
  const double t = y / rig.frame_h;
  return {95.0 + 20.0 * t, 110.0 + 10.0 * t, 140.0};
}

double ambient(double y, const RigSpec& rig) { return rig.ambient_c + 0.5 * y / rig.frame_h; }

bool in_ellipse(double u, double v, double cu, double cv, double a, double b) {
  const double du = (u - cu) / a, dv = (v - cv) / b;
  return du * du + dv * dv <= 1.0;
}

double luma(const Rgb& c) { return (0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]) / 255.0; }

/// Color of the face at face-box coordinates (u, v); false outside the face disk.
bool face_color(const FaceShape& f, double u, double v, Rgb& out, double* radial = nullptr) {
  const double rr = ((u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5)) / 0.25;
  if (rr > 1.0) return false;
  if (radial) *radial = rr;
  const auto& L = f.rel;
  const Point2 mouth = L[3], nose = L[2];
  if (in_ellipse(u, v, mouth.x, mouth.y, f.mouth_hw * 0.9, f.mouth_hh * 0.35)) {
    out = {90.0, 30.0, 35.0};
    return true;
  }
  if (in_ellipse(u, v, mouth.x, mouth.y, f.mouth_hw, f.mouth_hh)) {
    out = {175.0, 70.0, 72.0};
    return true;
  }
  for (double side : {-1.0, 1.0}) {
    if (in_ellipse(u, v, nose.x + side * 0.045, nose.y + 0.015, 0.025, 0.015)) {
      out = {105.0, 58.0, 48.0};
      return true;
    }
  }
  const Point2 eyes[2] = {{L[0].x - f.eye_hw, L[0].y}, {L[1].x + f.eye_hw, L[1].y}};
  for (const Point2& e : eyes) {
    if (in_ellipse(u, v, e.x, e.y, f.eye_hh * 0.95, f.eye_hh * 0.95)) {
      out = {55.0, 38.0, 30.0};
      return true;
    }
    if (in_ellipse(u, v, e.x, e.y, f.eye_hw, f.eye_hh)) {
      out = {236.0, 234.0, 228.0};
      return true;
    }
    if (in_ellipse(u, v, e.x, e.y - f.brow_gap, f.eye_hw * 1.15, 0.018)) {
      out = {72.0, 46.0, 34.0};
      return true;
    }
  }
  double shade = 1.0 - 0.25 * rr;
  if (in_ellipse(u, v, nose.x, nose.y - 0.01, 0.03, 0.025)) shade *= 1.1;
  out = {f.skin[0] * shade, f.skin[1] * shade, f.skin[2] * shade};
  return true;
}

std::vector<const Person*> far_to_near(const std::vector<Person>& people) {
  std::vector<const Person*> order;
  for (const auto& p : people) order.push_back(&p);
  std::stable_sort(order.begin(), order.end(),
                   [](const Person* a, const Person* b) { return a->distance_ft > b->distance_ft; });
  return order;
}

void pixel_range(double lo, double hi, int limit, int& a, int& b) {
  a = std::max(0, static_cast<int>(std::floor(lo)) - 2);
  b = std::min(limit - 1, static_cast<int>(std::ceil(hi)) + 2);
}

std::vector<double> gaussian_blur(const std::vector<double>& src, int w, int h, double sigma) {
  if (sigma <= 0.0) return src;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double s = 0.0;
  for (int i = -r; i <= r; ++i) s += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= s;
  std::vector<double> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * src[y * w + std::clamp(x + i, 0, w - 1)];
      tmp[y * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[std::clamp(y + i, 0, h - 1) * w + x];
      out[y * w + x] = acc;
    }
  return out;
}

}  // namespace

FaceShape canonical_face() {
  FaceShape f;
  f.rel = {Point2{0.40, 0.40}, Point2{0.60, 0.40}, Point2{0.50, 0.60}, Point2{0.50, 0.78}};
  return f;
}

Person sample_person(const RigSpec& rig, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  Person p;
  p.distance_ft = uni(rig.min_distance_ft, rig.max_distance_ft);
  p.offset_ft = uni(rig.min_offset_ft, rig.max_offset_ft);
  p.y_jitter_px = uni(-rig.y_jitter_px, rig.y_jitter_px);
  FaceShape f = canonical_face();
  const double j = rig.landmark_jitter;
  // Eyes move together so the face stays symmetric about its own axis.
  const double eye_spread = uni(-j, j) * 0.5, eye_height = uni(-j, j);
  f.rel[0] = {f.rel[0].x - eye_spread, f.rel[0].y + eye_height};
  f.rel[1] = {f.rel[1].x + eye_spread, f.rel[1].y + eye_height};
  f.rel[2] = {f.rel[2].x + uni(-j, j) * 0.5, f.rel[2].y + uni(-j, j)};
  f.rel[3] = {f.rel[3].x + uni(-j, j) * 0.5, f.rel[3].y + uni(-j, j) * 0.5};
  f.eye_hw *= uni(0.85, 1.15);
  f.mouth_hw *= uni(0.8, 1.2);
  const double tone = uni(0.8, 1.1);
  f.skin = {std::min(245.0, 205.0 * tone), 155.0 * tone * uni(0.95, 1.05), 125.0 * tone * uni(0.9, 1.05)};
  p.shape = f;
  p.fever = u01(rng) < rig.fever_rate;
  std::normal_distribution<double> nd(0.0, 1.0);
  if (p.fever) {
    p.body_temp_c = std::clamp(rig.fever_mean_c + rig.fever_sd_c * nd(rng), 38.1, 40.0);
  } else {
    p.body_temp_c = std::clamp(rig.healthy_mean_c + rig.healthy_sd_c * nd(rng), 36.0, 37.6);
  }
  return p;
}

BBox face_box(const Person& p, const RigSpec& rig) {
  const double s = rig.focal_px * rig.face_ft / p.distance_ft;
  const double x = rig.cx + rig.focal_px * p.offset_ft / p.distance_ft;
  const double y = rig.cy + p.y_jitter_px;
  return {x - 0.5 * s, y - 0.5 * s, s, s};
}

BBox crop_box(const BBox& face, double scale) {
  const double w = face.w * scale, h = face.h * scale;
  return {face.cx() - 0.5 * w, face.cy() - 0.5 * h, w, h};
}

FeaturePoints visual_landmarks(const Person& p, const RigSpec& rig) {
  const BBox b = face_box(p, rig);
  FeaturePoints pts;
  for (const Point2& r : p.shape.rel) pts.push_back({b.x + r.x * b.w, b.y + r.y * b.h});
  return pts;
}

Point2 warp_to_thermal(Point2 p, double d, const RigSpec& rig) {
  return {p.x + rig.parallax_k / d + rig.parallax_c0 - rig.roll * (p.y - rig.cy), p.y + rig.roll * (p.x - rig.cx)};
}

Point2 warp_to_visual(Point2 q, double d, const RigSpec& rig) {
  const double r1 = q.x - rig.parallax_k / d - rig.parallax_c0 - rig.roll * rig.cy;
  const double r2 = q.y + rig.roll * rig.cx;
  const double det = 1.0 + rig.roll * rig.roll;
  return {(r1 + rig.roll * r2) / det, (r2 - rig.roll * r1) / det};
}

FeaturePoints thermal_landmarks(const Person& p, const RigSpec& rig) {
  FeaturePoints pts = visual_landmarks(p, rig);
  for (Point2& q : pts) q = warp_to_thermal(q, p.distance_ft, rig);
  return pts;
}

double horizontal_parallax(const Person& p, const RigSpec& rig) {
  const BBox b = face_box(p, rig);
  return rig.parallax_k / p.distance_ft + rig.parallax_c0 - rig.roll * (b.cy() - rig.cy);
}

double canthus_temperature(const Person& p, const RigSpec& rig) {
  return p.body_temp_c - rig.kappa_c_per_ft * p.distance_ft;
}

RgbImage render_visual(const std::vector<Person>& people, const RigSpec& rig) {
  const int W = rig.frame_w, H = rig.frame_h;
  std::vector<double> buf(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const Rgb c = background(x + 0.5, y + 0.5, rig);
      for (int k = 0; k < 3; ++k) buf[(static_cast<std::size_t>(y) * W + x) * 3 + k] = c[k];
    }
  for (const Person* p : far_to_near(people)) {
    const BBox b = face_box(*p, rig);
    int x0, x1, y0, y1;
    pixel_range(b.x, b.right(), W, x0, x1);
    pixel_range(b.y, b.bottom(), H, y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        Rgb acc{0.0, 0.0, 0.0};
        bool any = false;
        for (int sy = 0; sy < kSuper; ++sy)
          for (int sx = 0; sx < kSuper; ++sx) {
            const double px = x + (sx + 0.5) / kSuper, py = y + (sy + 0.5) / kSuper;
            Rgb c;
            if (face_color(p->shape, (px - b.x) / b.w, (py - b.y) / b.h, c)) {
              any = true;
            } else {
              const std::size_t i = (static_cast<std::size_t>(y) * W + x) * 3;
              c = {buf[i], buf[i + 1], buf[i + 2]};
            }
            for (int k = 0; k < 3; ++k) acc[k] += c[k];
          }
        if (!any) continue;
        for (int k = 0; k < 3; ++k)
          buf[(static_cast<std::size_t>(y) * W + x) * 3 + k] = acc[k] / (kSuper * kSuper);
      }
  }
  RgbImage img(W, H);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(buf[i]), 0L, 255L));
  }
  return img;
}

Gray16Image render_thermal(const std::vector<Person>& people, const RigSpec& rig) {
  const int W = rig.frame_w, H = rig.frame_h;
  std::vector<double> temp(static_cast<std::size_t>(W) * H);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) temp[static_cast<std::size_t>(y) * W + x] = ambient(y + 0.5, rig);
  for (const Person* p : far_to_near(people)) {
    const BBox b = face_box(*p, rig);
    const double d = p->distance_ft;
    const double t_canthus = canthus_temperature(*p, rig);
    const double l_skin = luma(p->shape.skin);
    double qx0 = 1e18, qx1 = -1e18, qy0 = 1e18, qy1 = -1e18;
    for (const Point2 c : {Point2{b.x, b.y}, Point2{b.right(), b.y}, Point2{b.x, b.bottom()}, Point2{b.right(), b.bottom()}}) {
      const Point2 q = warp_to_thermal(c, d, rig);
      qx0 = std::min(qx0, q.x);
      qx1 = std::max(qx1, q.x);
      qy0 = std::min(qy0, q.y);
      qy1 = std::max(qy1, q.y);
    }
    int x0, x1, y0, y1;
    pixel_range(qx0, qx1, W, x0, x1);
    pixel_range(qy0, qy1, H, y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * W + x;
        double acc = 0.0;
        bool any = false;
        for (int sy = 0; sy < kSuper; ++sy)
          for (int sx = 0; sx < kSuper; ++sx) {
            const Point2 q{x + (sx + 0.5) / kSuper, y + (sy + 0.5) / kSuper};
            const Point2 v = warp_to_visual(q, d, rig);
            Rgb c;
            double rr = 0.0;
            if (face_color(p->shape, (v.x - b.x) / b.w, (v.y - b.y) / b.h, c, &rr)) {
              any = true;
              acc += t_canthus - rig.skin_drop_c - rr + rig.thermal_mix * (luma(c) - l_skin);
            } else {
              acc += temp[i];
            }
          }
        if (any) temp[i] = acc / (kSuper * kSuper);
      }
  }
  temp = gaussian_blur(temp, W, H, rig.thermal_blur_px);
  for (const Person* p : far_to_near(people)) {
    const FeaturePoints th = thermal_landmarks(*p, rig);
    const double t_canthus = canthus_temperature(*p, rig);
    const double r = rig.canthus_spot_px;
    for (std::size_t j : {0u, 1u}) {
      int x0, x1, y0, y1;
      pixel_range(th[j].x - r, th[j].x + r, W, x0, x1);
      pixel_range(th[j].y - r, th[j].y + r, H, y0, y1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
          if (std::hypot(x + 0.5 - th[j].x, y + 0.5 - th[j].y) <= r) temp[static_cast<std::size_t>(y) * W + x] = t_canthus;
        }
    }
  }
  Gray16Image img(W, H);
  for (std::size_t i = 0; i < temp.size(); ++i) {
    img.pixels[i] = static_cast<std::uint16_t>(std::clamp(std::lround(rig.calib.to_counts(temp[i])), 0L, 65535L));
  }
  return img;
}

Gray16Image shifted_gray(const RgbImage& visual, double shift_px) {
  Gray16Image out(visual.width, visual.height);
  for (int y = 0; y < visual.height; ++y)
    for (int x = 0; x < visual.width; ++x) {
      // Linear interpolation of the channel mean at x - shift.
      const double sx = x - shift_px;
      const int xa = static_cast<int>(std::floor(sx));
      const double t = sx - xa;
      auto g = [&](int xx) {
        xx = std::clamp(xx, 0, visual.width - 1);
        return (visual.at(xx, y, 0) + visual.at(xx, y, 1) + visual.at(xx, y, 2)) / 3.0;
      };
      const double v = (1.0 - t) * g(xa) + t * g(xa + 1);
      out.at(x, y) = static_cast<std::uint16_t>(std::clamp(std::lround(v / 255.0 * 65535.0), 0L, 65535L));
    }
  return out;
}

RgbImage render_face_tile(const FaceShape& face, std::size_t tile, double crop_scale, const RigSpec& rig) {
  const int T = static_cast<int>(tile);
  const Rgb bg = background(0.0, 0.5 * rig.frame_h, rig);
  RgbImage img(T, T);
  const double s = T / crop_scale, off = 0.5 * (T - s);
  for (int y = 0; y < T; ++y)
    for (int x = 0; x < T; ++x) {
      Rgb acc{0.0, 0.0, 0.0};
      for (int sy = 0; sy < kSuper; ++sy)
        for (int sx = 0; sx < kSuper; ++sx) {
          const double px = x + (sx + 0.5) / kSuper, py = y + (sy + 0.5) / kSuper;
          Rgb c;
          if (!face_color(face, (px - off) / s, (py - off) / s, c)) c = bg;
          for (int k = 0; k < 3; ++k) acc[k] += c[k];
        }
      for (int k = 0; k < 3; ++k) {
        img.at(x, y, k) = static_cast<std::uint8_t>(std::clamp(std::lround(acc[k] / (kSuper * kSuper)), 0L, 255L));
      }
    }
  return img;
}

FeaturePoints face_tile_landmarks(const FaceShape& face, std::size_t tile, double crop_scale) {
  const double T = static_cast<double>(tile);
  FeaturePoints pts;
  for (const Point2& r : face.rel) pts.push_back({((r.x - 0.5) / crop_scale + 0.5) * T, ((r.y - 0.5) / crop_scale + 0.5) * T});
  return pts;
}

}  // namespace csfuse::data
