#include "csfuse/csgan/losses.hpp"

#include <cmath>

#include "csfuse/core/error.hpp"

namespace csfuse::csgan {

double adversarial_loss(const Tensor& real, const Tensor& fake, AdversarialRole role) {
  return adversarial_loss_grad(real, fake, role).value;
}

AdversarialGrads adversarial_loss_grad(const Tensor& real, const Tensor& fake, AdversarialRole role) {
  if (fake.empty() || (role == AdversarialRole::Discriminator && real.empty())) {
    throw ShapeError("adversarial loss: empty score map");
  }
  AdversarialGrads g;
  g.fake = Tensor(fake.shape());
  const double nf = static_cast<double>(fake.size());
  if (role == AdversarialRole::Generator) {
    double s = 0.0;
    for (std::size_t i = 0; i < fake.size(); ++i) {
      const double e = fake[i] - 1.0;
      s += e * e;
      g.fake[i] = 2.0 * e / nf;
    }
    g.value = s / nf;
    return g;
  }
  g.real = Tensor(real.shape());
  const double nr = static_cast<double>(real.size());
  double sr = 0.0, sf = 0.0;
  for (std::size_t i = 0; i < real.size(); ++i) {
    const double e = real[i] - 1.0;
    sr += e * e;
    g.real[i] = e / nr;
  }
  for (std::size_t i = 0; i < fake.size(); ++i) {
    sf += fake[i] * fake[i];
    g.fake[i] = fake[i] / nf;
  }
  g.value = 0.5 * (sr / nr + sf / nf);
  return g;
}

double l1_loss(const Tensor& a, const Tensor& b, Tensor* grad_a) {
  numcore::require_same_shape(a, b, "l1 loss");
  const double n = static_cast<double>(a.size());
  if (grad_a) *grad_a = Tensor(a.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += std::abs(d);
    if (grad_a) (*grad_a)[i] = d > 0.0 ? 1.0 / n : (d < 0.0 ? -1.0 / n : 0.0);
  }
  return s / n;
}

double cyclical_loss(const Tensor& x, const Tensor& x_rec, const Tensor& y, const Tensor& y_rec) {
  return l1_loss(x_rec, x) + l1_loss(y_rec, y);
}

double perceptual_loss(const Network& phi, const Tensor& real, const Tensor& synth, Tensor* grad_synth) {
  numcore::require_same_shape(real, synth, "perceptual loss");
  const Tensor fr = forward(phi, real);
  NetTape tape;
  const Tensor fs = forward(phi, synth, grad_synth ? &tape : nullptr);
  const double n = static_cast<double>(fs.size());
  Tensor g(fs.shape());
  double s = 0.0;
  for (std::size_t i = 0; i < fs.size(); ++i) {
    const double d = fs[i] - fr[i];
    s += d * d;
    g[i] = 2.0 * d / n;
  }
  if (grad_synth) *grad_synth = backward(phi, tape, g, nullptr);
  return s / n;
}

FeatureLossResult feature_preserving_loss(std::span<const FeaturePoints> real, std::span<const FeaturePoints> synth,
                                          double t_feat, std::vector<std::vector<Point2>>* grad_synth) {
  if (real.size() != synth.size() || real.empty()) {
    throw ShapeError("feature-preserving loss: batches must be non-empty and of equal length");
  }
  const std::size_t m = real.size();
  FeatureLossResult r;
  std::vector<bool> use(m, false);
  for (std::size_t i = 0; i < m; ++i) {
    const bool ok = !synth[i].empty() && synth[i].size() == real[i].size();
    use[i] = ok;
    if (!ok) ++r.featureless;
  }
  if (grad_synth) {
    grad_synth->assign(m, {});
    for (std::size_t i = 0; i < m; ++i) (*grad_synth)[i].assign(synth[i].size(), Point2{});
  }
  r.m_ratio = static_cast<double>(r.featureless) / static_cast<double>(m);
  if (r.m_ratio >= t_feat) {
    r.gated = true;
    return r;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (!use[i]) continue;
    ++r.included;
    for (std::size_t j = 0; j < real[i].size(); ++j) {
      const Point2 d = synth[i][j] - real[i][j];
      const double len = norm(d);
      total += len;
      if (grad_synth && len > 1e-12) (*grad_synth)[i][j] = (1.0 / len) * d;
    }
  }
  const double inv = 1.0 / static_cast<double>(r.included);
  r.value = total * inv;
  if (grad_synth) {
    for (auto& pts : *grad_synth)
      for (Point2& p : pts) p = inv * p;
  }
  return r;
}

FeatureLossResult feature_preserving_loss(const Tensor& real_batch, const Tensor& synth_batch,
                                          const LandmarkDetector& det, double t_feat, Tensor* grad_synth) {
  numcore::require_same_shape(real_batch, synth_batch, "feature-preserving loss");
  const std::size_t m = real_batch.shape().n;
  std::vector<FeaturePoints> real(m), synth(m);
  std::vector<Detection> dets(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Detection dr = detect(det, real_batch, i);
    dets[i] = detect(det, synth_batch, i);
    if (dr.found) real[i] = dr.points();
    if (dets[i].found) synth[i] = dets[i].points();
  }
  std::vector<std::vector<Point2>> gp;
  FeatureLossResult r = feature_preserving_loss(real, synth, t_feat, grad_synth ? &gp : nullptr);
  if (grad_synth) {
    *grad_synth = Tensor(synth_batch.shape());
    if (!r.gated) {
      for (std::size_t i = 0; i < m; ++i) {
        if (real[i].empty() || synth[i].empty()) continue;
        detect_backward(det, dets[i], gp[i], *grad_synth, i);
      }
    }
  }
  return r;
}

double total_objective(double l_adv, double l_cyc, double l_per, double l_feat, const LossWeights& w) {
  return l_adv + w.cyc * l_cyc + w.per * l_per + w.feat * l_feat;
}

}  // namespace csfuse::csgan
