#include "covdet/polynomial.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace covdet {

std::vector<double> PolyMultiply(const std::vector<double>& p,
                                 const std::vector<double>& q) {
  if (p.empty() || q.empty()) return {};
  std::vector<double> out(p.size() + q.size() - 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    for (std::size_t j = 0; j < q.size(); ++j) out[i + j] += p[i] * q[j];
  }
  return out;
}

double PolyEval(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

namespace {

// Parlett-Reinsch balancing with radix 2; exact in floating point.
void Balance(MatrixXd& a) {
  constexpr double kRadix = 2.0;
  const int n = static_cast<int>(a.rows());
  bool done = false;
  while (!done) {
    done = true;
    for (int i = 0; i < n; ++i) {
      double r = 0.0;
      double c = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / kRadix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= kRadix;
        c *= kRadix * kRadix;
      }
      g = r * kRadix;
      while (c > g) {
        f /= kRadix;
        c /= kRadix * kRadix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        a.row(i) /= f;
        a.col(i) *= f;
      }
    }
  }
}

}  // namespace

std::vector<Complex> PolyRoots(std::vector<double> coeffs, double rel_drop) {
  double max_abs = 0.0;
  for (double c : coeffs) max_abs = std::max(max_abs, std::abs(c));
  if (max_abs == 0.0) return {};
  while (!coeffs.empty() && std::abs(coeffs.back()) <= rel_drop * max_abs) {
    coeffs.pop_back();
  }
  const int degree = static_cast<int>(coeffs.size()) - 1;
  if (degree < 1) return {};
  const double lead = coeffs.back();
  if (degree == 1) return {Complex(-coeffs[0] / lead, 0.0)};
  MatrixXd companion = MatrixXd::Zero(degree, degree);
  for (int j = 0; j < degree; ++j) companion(0, j) = -coeffs[degree - 1 - j] / lead;
  for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
  Balance(companion);
  Eigen::EigenSolver<MatrixXd> solver(companion, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("companion eigenvalue computation failed");
  }
  const auto& values = solver.eigenvalues();
  return std::vector<Complex>(values.data(), values.data() + values.size());
}

std::vector<double> CubicRealRoots(double c3, double c2, double c1, double c0) {
  const double scale = std::max({std::abs(c2), std::abs(c1), std::abs(c0)});
  std::vector<double> roots;
  if (std::abs(c3) <= 1e-15 * scale || c3 == 0.0) {
    if (std::abs(c2) <= 1e-15 * std::max(std::abs(c1), std::abs(c0)) || c2 == 0.0) {
      if (c1 != 0.0) roots.push_back(-c0 / c1);
      return roots;
    }
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc < 0.0) return roots;
    const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
    if (q != 0.0) {
      roots.push_back(q / c2);
      roots.push_back(c0 / q);
    } else {
      roots.push_back(0.0);
    }
    return roots;
  }
  const double a = c2 / c3;
  const double b = c1 / c3;
  const double c = c0 / c3;
  const double q = (a * a - 3.0 * b) / 9.0;
  const double r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
  const double q3 = q * q * q;
  const double r2 = r * r;
  if (r2 < q3) {
    const double theta = std::acos(std::clamp(r / std::sqrt(q3), -1.0, 1.0));
    const double m = -2.0 * std::sqrt(q);
    constexpr double kTwoPi = 6.283185307179586;
    roots.push_back(m * std::cos(theta / 3.0) - a / 3.0);
    roots.push_back(m * std::cos((theta + kTwoPi) / 3.0) - a / 3.0);
    roots.push_back(m * std::cos((theta - kTwoPi) / 3.0) - a / 3.0);
  } else {
    const double big = -std::copysign(std::cbrt(std::abs(r) + std::sqrt(r2 - q3)), r);
    const double small = big != 0.0 ? q / big : 0.0;
    roots.push_back(big + small - a / 3.0);
    // Near a double root the discriminant sign is unreliable; keep the
    // repeated root as a candidate too.
    if (q > 0.0 && r2 - q3 <= 1e-10 * std::max(r2, std::abs(q3))) {
      roots.push_back(std::copysign(std::sqrt(q), r) - a / 3.0);
    }
  }
  for (double& x : roots) {
    const double f = ((c3 * x + c2) * x + c1) * x + c0;
    const double df = (3.0 * c3 * x + 2.0 * c2) * x + c1;
    if (df != 0.0 && std::isfinite(f / df)) x -= f / df;
  }
  return roots;
}

}  // namespace covdet
