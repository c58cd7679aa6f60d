#include "csfuse/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "csfuse/core/error.hpp"

namespace csfuse::numcore {
namespace {

double eval(const LossFn& loss, std::span<const double> p, std::vector<double>* grad) {
  const double v = loss(p, grad);
  if (!std::isfinite(v)) {
    throw NumericError("grad_check: loss is non-finite (" + std::to_string(v) + ")");
  }
  return v;
}

void record(GradCheckReport& r, std::size_t index, double a, double n) {
  const double e = relative_error(a, n);
  if (r.checked == 0 || e > r.max_relative_error) {
    r.max_relative_error = e;
    r.worst_index = index;
    r.analytic = a;
    r.numeric = n;
  }
  ++r.checked;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const LossFn& loss, std::span<const double> params, double step,
                           std::span<const std::size_t> indices) {
  if (!(step > 0.0)) throw NumericError("grad_check: step must be positive");
  std::vector<double> analytic(params.size());
  eval(loss, params, &analytic);
  if (analytic.size() != params.size()) {
    throw ShapeError("grad_check: analytic gradient has wrong length");
  }
  std::vector<double> probe(params.begin(), params.end());
  GradCheckReport report;
  auto check_one = [&](std::size_t i) {
    const double orig = probe[i];
    probe[i] = orig + step;
    const double fp = eval(loss, probe, nullptr);
    probe[i] = orig - step;
    const double fm = eval(loss, probe, nullptr);
    probe[i] = orig;
    record(report, i, analytic[i], (fp - fm) / (2.0 * step));
  };
  if (indices.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) check_one(i);
  } else {
    for (std::size_t i : indices) {
      if (i >= params.size()) throw ShapeError("grad_check: index out of range");
      check_one(i);
    }
  }
  return report;
}

GradCheckReport grad_check_directional(const LossFn& loss, std::span<const double> params, double step,
                                       std::size_t directions, std::uint64_t seed) {
  if (!(step > 0.0)) throw NumericError("grad_check: step must be positive");
  std::vector<double> analytic(params.size());
  eval(loss, params, &analytic);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> dir(params.size());
  std::vector<double> probe(params.size());
  GradCheckReport report;
  for (std::size_t k = 0; k < directions; ++k) {
    double nrm = 0.0;
    for (double& d : dir) {
      d = dist(rng);
      nrm += d * d;
    }
    nrm = std::sqrt(nrm);
    double a = 0.0;
    for (std::size_t i = 0; i < dir.size(); ++i) {
      dir[i] /= nrm;
      a += analytic[i] * dir[i];
    }
    for (std::size_t i = 0; i < dir.size(); ++i) probe[i] = params[i] + step * dir[i];
    const double fp = eval(loss, probe, nullptr);
    for (std::size_t i = 0; i < dir.size(); ++i) probe[i] = params[i] - step * dir[i];
    const double fm = eval(loss, probe, nullptr);
    record(report, k, a, (fp - fm) / (2.0 * step));
  }
  return report;
}

}  // namespace csfuse::numcore
