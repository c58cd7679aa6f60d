#include "csfuse/csgan/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include "csfuse/core/error.hpp"

namespace csfuse::csgan {

using numcore::AdamConfig;
using numcore::AdamState;

ModelSpec paper_scale() {
  ModelSpec s;
  s.gen = {3, 64, 6, 64};
  s.disc = {3, 64, 3, 64};
  return s;
}

ModelSpec test_scale() {
  ModelSpec s;
  s.gen = {3, 8, 2, 16};
  s.disc = {3, 8, 2, 16};
  return s;
}

CsganModel make_model(const ModelSpec& spec, LandmarkDetector detector, std::uint64_t seed, LossWeights weights,
                      double t_feat) {
  if (!(weights.cyc > 0.0) || !(weights.per > 0.0) || !(weights.feat > 0.0)) {
    throw ConfigError("loss weights must be strictly positive");
  }
  if (!(t_feat > 0.0 && t_feat <= 1.0)) throw ConfigError("t_feat must lie in (0, 1]");
  if (spec.gen.tile != spec.disc.tile || spec.gen.channels != spec.disc.channels) {
    throw ConfigError("generator and discriminator disagree on tile shape");
  }
  if (detector.tile != spec.gen.tile) throw ConfigError("landmark detector tile size differs from model tile size");
  CsganModel m;
  m.spec = spec;
  Rng rng(seed);
  m.g_y = make_generator(spec.gen, rng);
  m.g_x = make_generator(spec.gen, rng);
  m.d_y = make_discriminator(spec.disc, rng);
  m.d_x = make_discriminator(spec.disc, rng);
  m.phi = make_perceptual_net(spec.gen.channels, spec.phi_width, rng);
  m.weights = weights;
  m.t_feat = t_feat;
  m.detector = std::move(detector);
  return m;
}

Tensor replicate_channels(const Tensor& single, std::size_t channels) {
  const Shape s = single.shape();
  if (s.c != 1) throw ShapeError("replicate_channels expects one channel, got " + numcore::to_string(s));
  Tensor out(Shape{s.n, channels, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    const auto src = single.plane(n, 0);
    for (std::size_t c = 0; c < channels; ++c) std::copy(src.begin(), src.end(), out.plane(n, c).begin());
  }
  return out;
}

Tensor synthesize_visual(const CsganModel& model, const Tensor& thermal_tiles) {
  check_generator_input(model.spec.gen, thermal_tiles);
  return forward(model.g_y, thermal_tiles);
}

PairedTiles gather(const PairedTiles& data, std::span<const std::size_t> indices) {
  const Shape s = data.thermal.shape();
  PairedTiles out{Tensor(Shape{indices.size(), s.c, s.h, s.w}), Tensor(Shape{indices.size(), data.visual.shape().c, s.h, s.w})};
  const std::size_t tn = s.c * s.plane(), vn = data.visual.shape().c * s.plane();
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const std::size_t i = indices[k];
    if (i >= s.n) throw ShapeError("gather: index out of range");
    std::copy_n(data.thermal.data().begin() + static_cast<std::ptrdiff_t>(i * tn), tn,
                out.thermal.data().begin() + static_cast<std::ptrdiff_t>(k * tn));
    std::copy_n(data.visual.data().begin() + static_cast<std::ptrdiff_t>(i * vn), vn,
                out.visual.data().begin() + static_cast<std::ptrdiff_t>(k * vn));
  }
  return out;
}

namespace {

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericError(std::string("non-finite ") + what + " loss");
}

}  // namespace

GeneratorObjective generator_objective(const CsganModel& model, const Tensor& x, const Tensor& y, bool want_grads) {
  check_generator_input(model.spec.gen, x);
  check_generator_input(model.spec.gen, y);
  GeneratorObjective r;
  NetTape t_fy, t_fx, t_rx, t_ry, t_sy, t_sx;
  const bool g = want_grads;
  const Tensor fake_y = forward(model.g_y, x, g ? &t_fy : nullptr);
  const Tensor fake_x = forward(model.g_x, y, g ? &t_fx : nullptr);

  const Tensor s_y = forward(model.d_y, fake_y, g ? &t_sy : nullptr);
  const Tensor s_x = forward(model.d_x, fake_x, g ? &t_sx : nullptr);
  const AdversarialGrads ay = adversarial_loss_grad({}, s_y, AdversarialRole::Generator);
  const AdversarialGrads ax = adversarial_loss_grad({}, s_x, AdversarialRole::Generator);
  r.l_adv = ay.value + ax.value;

  const Tensor rec_x = forward(model.g_x, fake_y, g ? &t_rx : nullptr);
  const Tensor rec_y = forward(model.g_y, fake_x, g ? &t_ry : nullptr);
  Tensor g_rec_x, g_rec_y;
  r.l_cyc = l1_loss(rec_x, x, g ? &g_rec_x : nullptr) + l1_loss(rec_y, y, g ? &g_rec_y : nullptr);

  Tensor g_per_y, g_per_x;
  r.l_per = perceptual_loss(model.phi, y, fake_y, g ? &g_per_y : nullptr) +
            perceptual_loss(model.phi, x, fake_x, g ? &g_per_x : nullptr);

  Tensor g_feat;
  r.feat = feature_preserving_loss(y, fake_y, model.detector, model.t_feat, g ? &g_feat : nullptr);
  r.l_feat = r.feat.value;

  const LossWeights& w = model.weights;
  r.total = total_objective(r.l_adv, r.l_cyc, r.l_per, r.l_feat, w);
  if (!g) return r;

  r.grad_g_y = zeros_like(model.g_y);
  r.grad_g_x = zeros_like(model.g_x);

  // Cotangent at fake_y: adversarial, cycle through G_X, perceptual, feature term.
  Tensor gy = backward(model.d_y, t_sy, ay.fake, nullptr);
  g_rec_x *= w.cyc;
  gy += backward(model.g_x, t_rx, g_rec_x, &r.grad_g_x);
  g_per_y *= w.per;
  gy += g_per_y;
  g_feat *= w.feat;
  gy += g_feat;

  Tensor gx = backward(model.d_x, t_sx, ax.fake, nullptr);
  g_rec_y *= w.cyc;
  gx += backward(model.g_y, t_ry, g_rec_y, &r.grad_g_y);
  g_per_x *= w.per;
  gx += g_per_x;

  backward(model.g_y, t_fy, gy, &r.grad_g_y);
  backward(model.g_x, t_fx, gx, &r.grad_g_x);
  return r;
}

Optimizers make_optimizers(CsganModel& model, const AdamConfig& cfg) {
  Optimizers o;
  o.g_y = numcore::make_adam_state(param_list(model.g_y), cfg);
  o.g_x = numcore::make_adam_state(param_list(model.g_x), cfg);
  o.d_y = numcore::make_adam_state(param_list(model.d_y), cfg);
  o.d_x = numcore::make_adam_state(param_list(model.d_x), cfg);
  return o;
}

void set_learning_rate(Optimizers& opt, double lr) {
  opt.g_y.config.lr = lr;
  opt.g_x.config.lr = lr;
  opt.d_y.config.lr = lr;
  opt.d_x.config.lr = lr;
}

namespace {

std::vector<const Tensor*> const_params(Network& n) {
  std::vector<const Tensor*> out;
  for_each_param(n, [&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

double update_discriminator(Network& d, const Tensor& real, const Tensor& fake, AdamState& st) {
  NetTape tr, tf;
  const Tensor sr = forward(d, real, &tr);
  const Tensor sf = forward(d, fake, &tf);
  const AdversarialGrads a = adversarial_loss_grad(sr, sf, AdversarialRole::Discriminator);
  require_finite(a.value, "discriminator adversarial");
  Network grads = zeros_like(d);
  backward(d, tr, a.real, &grads);
  backward(d, tf, a.fake, &grads);
  numcore::adam_step(param_list(d), const_params(grads), st);
  return a.value;
}

}  // namespace

LossReport train_step(CsganModel& model, const PairedTiles& batch, Optimizers& opt) {
  const Tensor& x = batch.thermal;
  const Tensor& y = batch.visual;
  LossReport rep;
  rep.lr = opt.g_y.config.lr;
  {
    const Tensor fake_y = forward(model.g_y, x);
    const Tensor fake_x = forward(model.g_x, y);
    rep.l_adv_d = update_discriminator(model.d_y, y, fake_y, opt.d_y) +
                  update_discriminator(model.d_x, x, fake_x, opt.d_x);
  }
  GeneratorObjective obj = generator_objective(model, x, y, true);
  require_finite(obj.l_adv, "generator adversarial");
  require_finite(obj.l_cyc, "cyclical");
  require_finite(obj.l_per, "perceptual");
  require_finite(obj.l_feat, "feature-preserving");
  numcore::adam_step(param_list(model.g_y), const_params(obj.grad_g_y), opt.g_y);
  numcore::adam_step(param_list(model.g_x), const_params(obj.grad_g_x), opt.g_x);
  rep.l_adv_g = obj.l_adv;
  rep.l_cyc = obj.l_cyc;
  rep.l_per = obj.l_per;
  rep.l_feat = obj.l_feat;
  rep.m_ratio = obj.feat.m_ratio;
  return rep;
}

TrainResult train(CsganModel& model, const PairedTiles& data, const TrainConfig& cfg, const ProgressFn& progress) {
  if (data.size() == 0) throw DataError("training dataset is empty");
  if (cfg.batch == 0) throw ConfigError("batch size must be >= 1");
  if (!(cfg.decay.factor > 0.0 && cfg.decay.factor < 1.0)) throw ConfigError("lr decay factor must lie in (0, 1)");
  if (cfg.decay.interval == 0 || cfg.decay.patience == 0) throw ConfigError("lr decay interval/patience must be >= 1");
  Optimizers opt = make_optimizers(model, cfg.adam);
  const double floor = cfg.adam.lr * cfg.decay.floor_ratio;
  double lr = cfg.adam.lr;

  std::mt19937_64 rng(cfg.seed ^ 0x5eedba7c4ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  TrainResult out;
  out.history.reserve(cfg.iterations);
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  double window_sum = 0.0;
  std::size_t window_n = 0;
  std::vector<std::size_t> idx(cfg.batch);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t k = 0; k < cfg.batch; ++k) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      idx[k] = order[cursor++];
    }
    set_learning_rate(opt, lr);
    LossReport rep = train_step(model, gather(data, idx), opt);
    rep.iteration = it;
    if (rep.m_ratio < model.t_feat) {
      window_sum += rep.l_feat;
      ++window_n;
    }
    if ((it + 1) % cfg.decay.interval == 0) {
      if (window_n > 0) {
        const double mean = window_sum / static_cast<double>(window_n);
        if (mean < best) {
          best = mean;
          stale = 0;
        } else if (++stale >= cfg.decay.patience) {
          lr = std::max(floor, lr * cfg.decay.factor);
          stale = 0;
        }
      }
      window_sum = 0.0;
      window_n = 0;
    }
    out.history.push_back(rep);
    if (progress) progress(rep);
  }
  out.final_lr = lr;
  return out;
}

std::string history_csv(const std::vector<LossReport>& history) {
  std::string s = "iteration,l_adv_D,l_adv_G,l_cyc,l_per,l_feat,mRatio,lr\n";
  char buf[512];
  for (const LossReport& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration, r.l_adv_d,
                  r.l_adv_g, r.l_cyc, r.l_per, r.l_feat, r.m_ratio, r.lr);
    s += buf;
  }
  return s;
}

namespace {

void collect(const std::string& prefix, const Network& n, std::vector<numcore::NamedArray>& out) {
  for_each_param(n, [&](const std::string& name, const Tensor& t) {
    out.push_back(numcore::to_named_array(prefix + name, t));
  });
}

void restore(const std::string& prefix, Network& n, const std::map<std::string, const numcore::NamedArray*>& byname,
             std::size_t& used) {
  for_each_param(n, [&](const std::string& name, Tensor& t) {
    const auto it = byname.find(prefix + name);
    if (it == byname.end()) throw DataError("checkpoint is missing array '" + prefix + name + "'");
    Tensor v = numcore::to_tensor(*it->second);
    if (v.shape() != t.shape()) {
      throw DataError("checkpoint array '" + prefix + name + "' has shape " + numcore::to_string(v.shape()) +
                      ", model expects " + numcore::to_string(t.shape()));
    }
    t = std::move(v);
    ++used;
  });
}

}  // namespace

std::vector<numcore::NamedArray> model_arrays(const CsganModel& model) {
  std::vector<numcore::NamedArray> out;
  collect("g_y.", model.g_y, out);
  collect("g_x.", model.g_x, out);
  collect("d_y.", model.d_y, out);
  collect("d_x.", model.d_x, out);
  collect("phi.", model.phi, out);
  return out;
}

void load_model_arrays(CsganModel& model, const std::vector<numcore::NamedArray>& arrays) {
  std::map<std::string, const numcore::NamedArray*> byname;
  for (const auto& a : arrays) byname[a.name] = &a;
  std::size_t used = 0;
  restore("g_y.", model.g_y, byname, used);
  restore("g_x.", model.g_x, byname, used);
  restore("d_y.", model.d_y, byname, used);
  restore("d_x.", model.d_x, byname, used);
  restore("phi.", model.phi, byname, used);
  if (used != arrays.size()) throw DataError("checkpoint holds arrays the model does not have");
}

}  // namespace csfuse::csgan
