#include "csfuse/csgan/landmarks.hpp"

#include <cmath>
#include <limits>

#include "csfuse/core/error.hpp"

namespace csfuse::csgan {
namespace {

double gray(const Tensor& t, std::size_t n, std::size_t y, std::size_t x) {
  const std::size_t c = t.shape().c;
  double s = 0.0;
  for (std::size_t k = 0; k < c; ++k) s += t.at(n, k, y, x);
  return s / static_cast<double>(c);
}

std::vector<double> gray_plane(const Tensor& t, std::size_t n) {
  const auto& s = t.shape();
  std::vector<double> g(s.h * s.w);
  for (std::size_t y = 0; y < s.h; ++y)
    for (std::size_t x = 0; x < s.w; ++x) g[y * s.w + x] = gray(t, n, y, x);
  return g;
}

struct Scores {
  double corr;
  double ncc;
};

Scores score_at(const std::vector<double>& g, std::size_t width, const std::vector<double>& patch, std::size_t r,
                std::size_t cx, std::size_t cy) {
  const std::size_t side = 2 * r + 1;
  double corr = 0.0, sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < side; ++i) {
    const double* row = g.data() + (cy - r + i) * width + (cx - r);
    for (std::size_t j = 0; j < side; ++j) {
      const double v = row[j];
      corr += patch[i * side + j] * v;
      sum += v;
      sum2 += v * v;
    }
  }
  // Template is zero-mean, so corr is already centered; divide by the patch's centered norm.
  const double n = static_cast<double>(side * side);
  const double var = std::max(0.0, sum2 - sum * sum / n);
  return {corr, var > 1e-18 ? corr / std::sqrt(var) : 0.0};
}

}  // namespace

FeaturePoints Detection::points() const {
  FeaturePoints p;
  p.reserve(hits.size());
  for (const auto& h : hits) p.push_back(h.point);
  return p;
}

double Detection::min_ncc() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& h : hits) m = std::min(m, h.ncc);
  return hits.empty() ? 0.0 : m;
}

LandmarkTemplate make_template(const Tensor& tile, std::size_t sample, Point2 center, std::size_t radius) {
  const auto& s = tile.shape();
  const auto cx = static_cast<std::ptrdiff_t>(std::floor(center.x));
  const auto cy = static_cast<std::ptrdiff_t>(std::floor(center.y));
  const auto r = static_cast<std::ptrdiff_t>(radius);
  if (cx - r < 0 || cy - r < 0 || cx + r >= static_cast<std::ptrdiff_t>(s.w) ||
      cy + r >= static_cast<std::ptrdiff_t>(s.h)) {
    throw ShapeError("landmark template around (" + std::to_string(center.x) + ", " + std::to_string(center.y) +
                     ") does not fit in the tile");
  }
  LandmarkTemplate t;
  t.canonical = center;
  const std::size_t side = 2 * radius + 1;
  t.patch.resize(side * side);
  double mean = 0.0;
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      t.patch[i * side + j] = gray(tile, sample, static_cast<std::size_t>(cy - r) + i, static_cast<std::size_t>(cx - r) + j);
      mean += t.patch[i * side + j];
    }
  mean /= static_cast<double>(side * side);
  double nrm = 0.0;
  for (double& v : t.patch) {
    v -= mean;
    nrm += v * v;
  }
  nrm = std::sqrt(nrm);
  if (nrm < 1e-12) throw ShapeError("landmark template is flat");
  for (double& v : t.patch) v /= nrm;
  return t;
}

Detection detect(const LandmarkDetector& det, const Tensor& batch, std::size_t sample) {
  const auto& s = batch.shape();
  if (s.h != det.tile || s.w != det.tile) {
    throw ShapeError("detector expects " + std::to_string(det.tile) + "x" + std::to_string(det.tile) + " tiles, got " +
                     numcore::to_string(s));
  }
  if (sample >= s.n) throw ShapeError("detector: sample index out of range");
  const std::size_t r = det.radius;
  if (2 * r + 1 > det.tile) throw ShapeError("detector template larger than tile");
  const std::vector<double> g = gray_plane(batch, sample);
  const std::size_t lo = r, hi = det.tile - 1 - r;

  Detection out;
  out.found = true;
  for (const LandmarkTemplate& tpl : det.templates) {
    LandmarkHit hit;
    const auto clampi = [&](double v) {
      return static_cast<std::size_t>(std::clamp(v, static_cast<double>(lo), static_cast<double>(hi)));
    };
    const double ax = std::floor(tpl.canonical.x), ay = std::floor(tpl.canonical.y);
    const double sr = static_cast<double>(det.search_radius);
    const std::size_t x0 = clampi(ax - sr), x1 = clampi(ax + sr);
    const std::size_t y0 = clampi(ay - sr), y1 = clampi(ay + sr);
    hit.ncc = -std::numeric_limits<double>::infinity();
    for (std::size_t y = y0; y <= y1; ++y)
      for (std::size_t x = x0; x <= x1; ++x) {
        const Scores sc = score_at(g, det.tile, tpl.patch, r, x, y);
        if (sc.ncc > hit.ncc) {
          hit.ncc = sc.ncc;
          hit.peak_x = x;
          hit.peak_y = y;
        }
      }
    const std::size_t w = det.soft_window;
    hit.wx0 = std::max(lo, hit.peak_x >= w ? hit.peak_x - w : 0);
    hit.wy0 = std::max(lo, hit.peak_y >= w ? hit.peak_y - w : 0);
    const std::size_t wx1 = std::min(hi, hit.peak_x + w), wy1 = std::min(hi, hit.peak_y + w);
    hit.ww = wx1 - hit.wx0 + 1;
    hit.wh = wy1 - hit.wy0 + 1;
    std::vector<double> corr(hit.ww * hit.wh);
    double cmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hit.wh; ++i)
      for (std::size_t j = 0; j < hit.ww; ++j) {
        corr[i * hit.ww + j] = score_at(g, det.tile, tpl.patch, r, hit.wx0 + j, hit.wy0 + i).corr;
        cmax = std::max(cmax, corr[i * hit.ww + j]);
      }
    hit.weights.resize(corr.size());
    double z = 0.0;
    for (std::size_t k = 0; k < corr.size(); ++k) {
      hit.weights[k] = std::exp(det.beta * (corr[k] - cmax));
      z += hit.weights[k];
    }
    Point2 p;
    for (std::size_t i = 0; i < hit.wh; ++i)
      for (std::size_t j = 0; j < hit.ww; ++j) {
        double& wk = hit.weights[i * hit.ww + j];
        wk /= z;
        p.x += wk * (static_cast<double>(hit.wx0 + j) + 0.5);
        p.y += wk * (static_cast<double>(hit.wy0 + i) + 0.5);
      }
    hit.point = p;
    if (!(hit.ncc >= det.threshold)) out.found = false;
    out.hits.push_back(std::move(hit));
  }
  if (det.templates.empty()) out.found = false;
  return out;
}

void detect_backward(const LandmarkDetector& det, const Detection& d, std::span<const Point2> grad_points,
                     Tensor& grad_batch, std::size_t sample) {
  if (grad_points.size() != d.hits.size()) throw ShapeError("detect_backward: point gradient count mismatch");
  const std::size_t r = det.radius, side = 2 * r + 1;
  const std::size_t channels = grad_batch.shape().c;
  const double inv_c = 1.0 / static_cast<double>(channels);
  for (std::size_t j = 0; j < d.hits.size(); ++j) {
    const LandmarkHit& hit = d.hits[j];
    const Point2 gp = grad_points[j];
    const auto& patch = det.templates[j].patch;
    for (std::size_t i = 0; i < hit.wh; ++i)
      for (std::size_t k = 0; k < hit.ww; ++k) {
        const double wk = hit.weights[i * hit.ww + k];
        const double qx = static_cast<double>(hit.wx0 + k) + 0.5, qy = static_cast<double>(hit.wy0 + i) + 0.5;
        // dp/dcorr_k = beta * w_k * (q_k - p)
        const double gcorr = det.beta * wk * (gp.x * (qx - hit.point.x) + gp.y * (qy - hit.point.y));
        if (gcorr == 0.0) continue;
        const std::size_t cx = hit.wx0 + k, cy = hit.wy0 + i;
        for (std::size_t a = 0; a < side; ++a)
          for (std::size_t b = 0; b < side; ++b) {
            const double v = gcorr * patch[a * side + b] * inv_c;
            for (std::size_t c = 0; c < channels; ++c) grad_batch.at(sample, c, cy - r + a, cx - r + b) += v;
          }
      }
  }
}

}  // namespace csfuse::csgan
