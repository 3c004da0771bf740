#include "covdet/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace covdet {

std::vector<double> ThresholdGrid(double low_end, int points) {
  Require(low_end > 0.0 && low_end < 0.5, "threshold grid low end must lie in (0, 0.5)");
  Require(points >= 2 && points % 2 == 0, "threshold grid needs an even number >= 2 of points");
  const int half = points / 2;
  std::vector<double> low(half);
  for (int i = 0; i < half; ++i) {
    low[i] = low_end * std::pow(0.5 / low_end, static_cast<double>(i) / half);
  }
  std::vector<double> grid(low);
  for (int i = half - 1; i >= 0; --i) grid.push_back(1.0 - low[i]);
  return grid;
}

PmPfPoint PmPf(const VectorXd& est_binary, const VectorXd& a_true) {
  Require(est_binary.size() == a_true.size(), "estimate and truth differ in length");
  long long active = 0, inactive = 0, missed = 0, false_alarm = 0;
  for (Eigen::Index i = 0; i < a_true.size(); ++i) {
    const bool truth = a_true(i) > 0.5;
    const bool est = est_binary(i) > 0.5;
    if (truth) {
      ++active;
      missed += est ? 0 : 1;
    } else {
      ++inactive;
      false_alarm += est ? 1 : 0;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {active ? static_cast<double>(missed) / active : nan,
          inactive ? static_cast<double>(false_alarm) / inactive : nan};
}

PmPfCurve ComputePmPfCurve(const VectorXd& a_hat, const VectorXd& a_true,
                           const std::vector<double>& grid) {
  Require(a_hat.size() == a_true.size(), "estimate and truth differ in length");
  PmPfCurve curve;
  curve.thresholds = grid;
  for (double ell : grid) {
    const VectorXd est = (a_hat.array() >= ell).cast<double>();
    const PmPfPoint p = PmPf(est, a_true);
    curve.pm.push_back(p.pm);
    curve.pf.push_back(p.pf);
  }
  return curve;
}

EqualError EqualErrorFromCurve(const PmPfCurve& curve) {
  const std::size_t n = curve.thresholds.size();
  Require(n >= 2, "threshold grid needs at least two points");
  // pm - pf is non-decreasing in the threshold.
  double prev_diff = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double diff = curve.pm[k] - curve.pf[k];
    if (std::isnan(diff)) break;
    if (diff >= 0.0) {
      if (k == 0) {
        if (diff == 0.0) return {curve.pm[0], curve.thresholds[0], true};
        break;
      }
      const double frac = -prev_diff / (diff - prev_diff);
      const double t = curve.thresholds[k - 1] +
                       frac * (curve.thresholds[k] - curve.thresholds[k - 1]);
      const double pm = curve.pm[k - 1] + frac * (curve.pm[k] - curve.pm[k - 1]);
      return {pm, t, true};
    }
    prev_diff = diff;
  }
  EqualError fallback;
  fallback.crossed = false;
  fallback.value = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const double v = std::max(curve.pm[k], curve.pf[k]);
    if (v < fallback.value) {
      fallback.value = v;
      fallback.threshold = curve.thresholds[k];
    }
  }
  return fallback;
}

EqualError EqualErrorProbability(const VectorXd& a_hat, const VectorXd& a_true,
                                 const std::vector<double>& grid) {
  return EqualErrorFromCurve(ComputePmPfCurve(a_hat, a_true, grid));
}

}  // namespace covdet
