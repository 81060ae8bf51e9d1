#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "octrl/errors.hpp"

namespace octrl {

// Relative L2 distance after removing the mean of each signal; an undiscounted
// value function is defined only up to an additive constant.
inline double offset_rel_l2(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
  require(p.size() == q.size() && p.size() > 0, "offset_rel_l2: size mismatch");
  Eigen::VectorXd pc = p.array() - p.mean();
  Eigen::VectorXd qc = q.array() - q.mean();
  double denom = qc.norm();
  require(denom > 0.0, "offset_rel_l2: reference signal is constant");
  return (pc - qc).norm() / denom;
}

// Linear-interpolation quantile of a sample (q in [0,1]); NaNs excluded.
inline double quantile(std::vector<double> xs, double q) {
  xs.erase(std::remove_if(xs.begin(), xs.end(), [](double x) { return !std::isfinite(x); }),
           xs.end());
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double w = pos - static_cast<double>(lo);
  return xs[lo] * (1.0 - w) + xs[hi] * w;
}

// Least-squares slope and intercept of y against x.
inline std::pair<double, double> fit_line(const std::vector<double>& x,
                                          const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, "fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  return {slope, intercept};
}

}  // namespace octrl
