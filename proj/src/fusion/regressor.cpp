#include "csfuse/fusion/regressor.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "csfuse/core/error.hpp"
#include "json.hpp"

namespace csfuse::fusion {

std::vector<double> disparity_vector(const FeaturePoints& a, const FeaturePoints& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError("disparity_vector: point counts differ (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ") or are empty");
  }
  const std::size_t n = a.size();
  std::vector<double> z(2 * n);
  for (std::size_t j = 0; j < n; ++j) {
    const Point2 d = b[j] - a[j];
    z[j] = norm(d);
    z[n + j] = (d.x == 0.0 && d.y == 0.0) ? 0.0 : std::atan2(d.y, d.x);
  }
  return z;
}

LinearFit fit_regressor(const std::vector<std::vector<double>>& z, const std::vector<double>& targets) {
  if (z.size() != targets.size()) throw DataError("fit_regressor: row count differs from target count");
  if (z.empty()) throw DataError("fit_regressor: no rows");
  const std::size_t m = z.front().size();
  const std::size_t rows = z.size();
  if (rows < m + 1) {
    throw DataError("fit_regressor: need at least " + std::to_string(m + 1) + " rows, got " + std::to_string(rows));
  }
  Eigen::MatrixXd a(rows, m + 1);
  Eigen::VectorXd y(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    if (z[i].size() != m) throw DataError("fit_regressor: ragged design matrix");
    if (!std::isfinite(targets[i])) throw DataError("fit_regressor: non-finite target");
    a(i, 0) = 1.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!std::isfinite(z[i][j])) throw DataError("fit_regressor: non-finite feature");
      a(i, j + 1) = z[i][j];
    }
    y(i) = targets[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < static_cast<Eigen::Index>(m + 1)) {
    const auto diag = qr.matrixR().diagonal().cwiseAbs();
    const double cond = diag.minCoeff() > 0.0 ? diag.maxCoeff() / diag.minCoeff() : INFINITY;
    throw NumericError("fit_regressor: design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                       std::to_string(m + 1) + ", |R| diagonal ratio " + std::to_string(cond) + ")");
  }
  const Eigen::VectorXd w = qr.solve(y);
  const Eigen::VectorXd r = y - a * w;
  LinearFit fit;
  fit.coef.assign(w.data(), w.data() + w.size());
  fit.residual_mean = r.mean();
  fit.residual_std = rows > 1 ? std::sqrt((r.array() - fit.residual_mean).square().sum() / static_cast<double>(rows - 1)) : 0.0;
  const double ss_tot = (y.array() - y.mean()).square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - r.squaredNorm() / ss_tot : 1.0;
  return fit;
}

double predict(const LinearFit& fit, const std::vector<double>& z) {
  if (z.size() + 1 != fit.coef.size()) {
    throw ShapeError("predict: feature length " + std::to_string(z.size()) + " does not match model (" +
                     std::to_string(fit.coef.size() - 1) + ")");
  }
  double v = fit.coef[0];
  for (std::size_t j = 0; j < z.size(); ++j) v += fit.coef[j + 1] * z[j];
  return v;
}

RegressorModel fit_pose_regressor(const std::vector<std::vector<double>>& z, const std::vector<double>& d,
                                  const std::vector<double>& o) {
  RegressorModel m;
  m.distance = fit_regressor(z, d);
  m.offset = fit_regressor(z, o);
  const std::size_t k = z.front().size();
  m.hull_min.assign(k, INFINITY);
  m.hull_max.assign(k, -INFINITY);
  for (const auto& row : z)
    for (std::size_t j = 0; j < k; ++j) {
      m.hull_min[j] = std::min(m.hull_min[j], row[j]);
      m.hull_max[j] = std::max(m.hull_max[j], row[j]);
    }
  return m;
}

PoseEstimate estimate_position(const std::vector<double>& z, const RegressorModel& model) {
  if (z.size() != model.dims()) {
    throw ShapeError("estimate_position: |z| = " + std::to_string(z.size()) + ", model expects " +
                     std::to_string(model.dims()));
  }
  PoseEstimate e;
  e.distance_ft = predict(model.distance, z);
  e.offset_ft = predict(model.offset, z);
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j] < model.hull_min[j] || z[j] > model.hull_max[j]) e.extrapolated = true;
  }
  return e;
}

namespace {

nlohmann::json fit_json(const LinearFit& f) {
  return {{"coef", f.coef}, {"residual_mean", f.residual_mean}, {"residual_std", f.residual_std}, {"r_squared", f.r_squared}};
}

LinearFit fit_from(const nlohmann::json& j) {
  LinearFit f;
  f.coef = j.at("coef").get<std::vector<double>>();
  f.residual_mean = j.at("residual_mean").get<double>();
  f.residual_std = j.at("residual_std").get<double>();
  f.r_squared = j.value("r_squared", 0.0);
  return f;
}

}  // namespace

std::string regressor_json(const RegressorModel& m) {
  const nlohmann::json j{{"w", fit_json(m.distance)},
                         {"u", fit_json(m.offset)},
                         {"hull_min", m.hull_min},
                         {"hull_max", m.hull_max},
                         {"tile", m.tile}};
  return j.dump(2) + "\n";
}

RegressorModel regressor_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    RegressorModel m;
    m.distance = fit_from(j.at("w"));
    m.offset = fit_from(j.at("u"));
    m.hull_min = j.at("hull_min").get<std::vector<double>>();
    m.hull_max = j.at("hull_max").get<std::vector<double>>();
    m.tile = j.value("tile", std::size_t{0});
    if (m.hull_min.size() != m.hull_max.size()) throw DataError("regressor: hull bounds differ in length");
    if (m.distance.coef.size() != m.dims() + 1 || m.offset.coef.size() != m.dims() + 1) {
      throw DataError("regressor: coefficient length does not match training hull");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("regressor: ") + e.what());
  }
}

}  // namespace csfuse::fusion
