#ifndef COVDET_POLYNOMIAL_H_
#define COVDET_POLYNOMIAL_H_

#include <vector>

#include "covdet/common.h"

namespace covdet {

// Coefficients are stored in ascending order: p(x) = c[0] + c[1] x + ...

std::vector<double> PolyMultiply(const std::vector<double>& p,
                                 const std::vector<double>& q);

double PolyEval(const std::vector<double>& c, double x);

// All complex roots via eigenvalues of the balanced companion matrix. Leading
// coefficients below rel_drop * max|c| are discarded first; a zero polynomial
// or a constant yields no roots.
std::vector<Complex> PolyRoots(std::vector<double> coeffs, double rel_drop = 1e-15);

// Real roots of c3 x^3 + c2 x^2 + c1 x + c0, degrading to lower degree when
// leading coefficients vanish. Each root gets one Newton polish step.
std::vector<double> CubicRealRoots(double c3, double c2, double c1, double c0);

}  // namespace covdet

#endif  // COVDET_POLYNOMIAL_H_
