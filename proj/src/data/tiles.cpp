#include "csfuse/data/tiles.hpp"

#include <algorithm>
#include <cmath>

#include "csfuse/core/error.hpp"

namespace csfuse::data {
namespace {

template <class Fetch>
double bilinear(double x, double y, int w, int h, Fetch&& fetch) {
  const double fx = x - 0.5, fy = y - 0.5;
  const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
  const double tx = fx - x0, ty = fy - y0;
  auto at = [&](int xx, int yy) { return fetch(std::clamp(xx, 0, w - 1), std::clamp(yy, 0, h - 1)); };
  return (1 - ty) * ((1 - tx) * at(x0, y0) + tx * at(x0 + 1, y0)) + ty * ((1 - tx) * at(x0, y0 + 1) + tx * at(x0 + 1, y0 + 1));
}

template <class Fetch>
void resample(const BBox& box, std::size_t tile, int w, int h, Fetch&& fetch, double* out) {
  if (!box.valid()) throw DataError("cannot crop a degenerate box");
  const int s = std::max(1, static_cast<int>(std::ceil(box.w / static_cast<double>(tile))));
  const double step_x = box.w / static_cast<double>(tile), step_y = box.h / static_cast<double>(tile);
  for (std::size_t i = 0; i < tile; ++i)
    for (std::size_t j = 0; j < tile; ++j) {
      double acc = 0.0;
      for (int a = 0; a < s; ++a)
        for (int b = 0; b < s; ++b) {
          const double x = box.x + (static_cast<double>(j) + (b + 0.5) / s) * step_x;
          const double y = box.y + (static_cast<double>(i) + (a + 0.5) / s) * step_y;
          acc += bilinear(x, y, w, h, fetch);
        }
      out[i * tile + j] = acc / (s * s);
    }
}

}  // namespace

Tensor rgb_tile(const RgbImage& img, const BBox& box, std::size_t tile) {
  Tensor t(numcore::Shape{1, 3, tile, tile});
  for (int c = 0; c < 3; ++c) {
    auto plane = t.plane(0, static_cast<std::size_t>(c));
    resample(box, tile, img.width, img.height, [&](int x, int y) { return static_cast<double>(img.at(x, y, c)); },
             plane.data());
    for (double& v : plane) v = v / 127.5 - 1.0;
  }
  return t;
}

Tensor thermal_tile(const Gray16Image& img, const BBox& box, std::size_t tile) {
  Tensor t(numcore::Shape{1, 1, tile, tile});
  auto plane = t.plane(0, 0);
  resample(box, tile, img.width, img.height, [&](int x, int y) { return static_cast<double>(img.at(x, y)); },
           plane.data());
  for (double& v : plane) v = v / 32767.5 - 1.0;
  return t;
}

RgbImage tile_to_rgb(const Tensor& tiles, std::size_t sample) {
  const auto& s = tiles.shape();
  if (s.c != 3) throw ShapeError("tile_to_rgb expects 3 channels");
  RgbImage img(static_cast<int>(s.w), static_cast<int>(s.h));
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < s.h; ++y)
      for (std::size_t x = 0; x < s.w; ++x) {
        const double v = (std::clamp(tiles.at(sample, c, y, x), -1.0, 1.0) + 1.0) * 127.5;
        img.at(static_cast<int>(x), static_cast<int>(y), static_cast<int>(c)) = static_cast<std::uint8_t>(std::lround(v));
      }
  return img;
}

Point2 to_tile(Point2 p, const BBox& box, std::size_t tile) {
  const double T = static_cast<double>(tile);
  return {(p.x - box.x) * T / box.w, (p.y - box.y) * T / box.h};
}

Point2 from_tile(Point2 p, const BBox& box, std::size_t tile) {
  const double T = static_cast<double>(tile);
  return {box.x + p.x * box.w / T, box.y + p.y * box.h / T};
}

std::vector<BBox> detect_faces(const RgbImage& img, int min_area) {
  const int W = img.width, H = img.height;
  std::vector<std::uint8_t> skin(static_cast<std::size_t>(W) * H, 0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const int r = img.at(x, y, 0), b = img.at(x, y, 2);
      skin[static_cast<std::size_t>(y) * W + x] = (r - b > 5) ? 1 : 0;
    }
  std::vector<int> label(skin.size(), -1);
  std::vector<BBox> out;
  std::vector<int> stack;
  for (int start = 0; start < W * H; ++start) {
    if (!skin[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(out.size()) + 1000000;
    std::vector<int> pix;
    stack.push_back(start);
    label[start] = id;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      pix.push_back(i);
      const int x = i % W, y = i / W;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (auto& n : nb) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= W || n[1] >= H) continue;
        const int j = n[1] * W + n[0];
        if (skin[j] && label[j] < 0) {
          label[j] = id;
          stack.push_back(j);
        }
      }
    }
    if (static_cast<int>(pix.size()) < min_area) continue;
    // Fill each row between its extreme skin pixels so eyes and mouth do not bias the moments.
    int ymin = H, ymax = -1;
    for (int i : pix) {
      ymin = std::min(ymin, i / W);
      ymax = std::max(ymax, i / W);
    }
    std::vector<int> lo(ymax - ymin + 1, W), hi(ymax - ymin + 1, -1);
    for (int i : pix) {
      const int r = i / W - ymin, x = i % W;
      lo[r] = std::min(lo[r], x);
      hi[r] = std::max(hi[r], x);
    }
    double n = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
    for (int r = 0; r < static_cast<int>(lo.size()); ++r) {
      if (hi[r] < lo[r]) continue;
      const double yc = ymin + r + 0.5;
      for (int x = lo[r]; x <= hi[r]; ++x) {
        const double xc = x + 0.5;
        n += 1;
        sx += xc;
        sy += yc;
        sxx += xc * xc;
        syy += yc * yc;
      }
    }
    const double mx = sx / n, my = sy / n;
    const double vx = std::max(0.0, sxx / n - mx * mx), vy = std::max(0.0, syy / n - my * my);
    // A uniform disk of radius a has variance a^2/4 along each axis.
    const double ax = 2.0 * std::sqrt(vx);
    const double ay = 2.0 * std::sqrt(vy);
    out.push_back({mx - ax, my - ay, 2 * ax, 2 * ay});
  }
  std::sort(out.begin(), out.end(), [](const BBox& a, const BBox& b) { return a.x < b.x; });
  return out;
}

}  // namespace csfuse::data
