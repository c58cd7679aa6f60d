#pragma once

#include <string>
#include <vector>

#include "csfuse/core/geometry.hpp"

namespace csfuse::fusion {

/// (|p̂_j - p_j| for j < n, then atan2 of (p̂_j - p_j) for j < n); zero displacement has angle 0.
std::vector<double> disparity_vector(const FeaturePoints& pts_y, const FeaturePoints& pts_yhat);

struct LinearFit {
  std::vector<double> coef;  // intercept first
  double residual_mean = 0.0;
  double residual_std = 0.0;
  double r_squared = 0.0;
};

/// Least squares with intercept via column-pivoted Householder QR.
/// Throws DataError for too few rows or non-finite input, NumericError when rank deficient.
LinearFit fit_regressor(const std::vector<std::vector<double>>& z, const std::vector<double>& targets);

double predict(const LinearFit& fit, const std::vector<double>& z);

struct RegressorModel {
  LinearFit distance;
  LinearFit offset;
  std::vector<double> hull_min;
  std::vector<double> hull_max;
  std::size_t tile = 0;  // tile size z was measured in; 0 = unspecified

  std::size_t dims() const { return hull_min.size(); }
};

RegressorModel fit_pose_regressor(const std::vector<std::vector<double>>& z, const std::vector<double>& distance_ft,
                                  const std::vector<double>& offset_ft);

struct PoseEstimate {
  double distance_ft = 0.0;
  double offset_ft = 0.0;
  bool extrapolated = false;
};

PoseEstimate estimate_position(const std::vector<double>& z, const RegressorModel& model);

std::string regressor_json(const RegressorModel& m);
RegressorModel regressor_from_json(const std::string& text);

}  // namespace csfuse::fusion
