#ifndef COVDET_METRICS_H_
#define COVDET_METRICS_H_

#include <vector>

#include "covdet/common.h"

namespace covdet {

// `points` ascending thresholds, log-spaced from low_end towards 0.5 and
// mirrored about 0.5 up to 1 - low_end.
std::vector<double> ThresholdGrid(double low_end = 1e-4, int points = 400);

struct PmPfPoint {
  double pm = 0.0;
  double pf = 0.0;
};

// Missed-detection and false-alarm rates of a binary estimate. A rate is NaN
// when its denominator (number of active or of inactive devices) is zero.
PmPfPoint PmPf(const VectorXd& est_binary, const VectorXd& a_true);

struct PmPfCurve {
  std::vector<double> thresholds;
  std::vector<double> pm;
  std::vector<double> pf;
};

PmPfCurve ComputePmPfCurve(const VectorXd& a_hat, const VectorXd& a_true,
                           const std::vector<double>& grid);

struct EqualError {
  double value = 0.0;
  double threshold = 0.0;
  bool crossed = true;  // false when the fallback min-max value is reported
};

EqualError EqualErrorFromCurve(const PmPfCurve& curve);

EqualError EqualErrorProbability(const VectorXd& a_hat, const VectorXd& a_true,
                                 const std::vector<double>& grid);

}  // namespace covdet

#endif  // COVDET_METRICS_H_
