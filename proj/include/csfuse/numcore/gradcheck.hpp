#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace csfuse::numcore {

/// Scalar loss over a flat parameter vector. When `grad` is non-null it receives the
/// analytic gradient (same length as the parameters).
using LossFn = std::function<double(std::span<const double> params, std::vector<double>* grad)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Central-difference check of every coordinate listed in `indices` (all coordinates when
/// empty). Throws NumericError if the loss is non-finite at any probe.
GradCheckReport grad_check(const LossFn& loss, std::span<const double> params, double step,
                           std::span<const std::size_t> indices = {});

/// Central-difference check of directional derivatives along `directions` seeded random
/// unit vectors; covers every coordinate at once for large parameter vectors.
GradCheckReport grad_check_directional(const LossFn& loss, std::span<const double> params, double step,
                                       std::size_t directions, std::uint64_t seed);

}  // namespace csfuse::numcore
