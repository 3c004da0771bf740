#include "covdet/error_analysis.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "covdet/csv.h"
#include "covdet/parallel.h"
#include "covdet/scaling_analysis.h"
#include "covdet/system_model.h"

namespace covdet {

int FisherMatrix::Rank() const {
  const double cutoff = rank_tol * lambda_max();
  return static_cast<int>((eigenvalues.array() > cutoff).count());
}

MatrixXd FisherMatrix::PseudoInverse() const {
  const double cutoff = rank_tol * lambda_max();
  const int n = static_cast<int>(J.rows());
  MatrixXd pinv = MatrixXd::Zero(n, n);
  for (int k = 0; k < eigenvalues.size(); ++k) {
    if (eigenvalues(k) > cutoff) {
      pinv.noalias() += eigenvectors.col(k) * eigenvectors.col(k).transpose() / eigenvalues(k);
    }
  }
  return pinv;
}

FisherMatrix MakeFisherMatrix(const MatrixXd& J, int num_antennas, double rank_tol) {
  Require(J.rows() == J.cols(), "Fisher matrix must be square");
  Require(num_antennas >= 1, "antenna count must be at least 1");
  FisherMatrix f;
  f.J = 0.5 * (J + J.transpose());
  f.num_antennas = num_antennas;
  f.rank_tol = rank_tol;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(f.J);
  if (eig.info() != Eigen::Success) throw NumericalError("Fisher eigendecomposition failed");
  f.eigenvalues = eig.eigenvalues();
  f.eigenvectors = eig.eigenvectors();
  return f;
}

FisherMatrix FisherInformation(const MatrixXcd& S, const MatrixXd& gains,
                               const VectorXd& a, double sigma2, int num_antennas,
                               double rank_tol) {
  const int n = static_cast<int>(S.cols());
  Require(a.size() == n && gains.cols() == n, "dimension mismatch");
  Require((a.array() >= 0.0).all() && (a.array() <= 1.0).all(), "a must lie in [0, 1]");
  MatrixXd J = MatrixXd::Zero(n, n);
  for (int b = 0; b < gains.rows(); ++b) {
    const MatrixXcd sigma = ModelCovariance(S, gains.row(b).transpose(), a, sigma2);
    Eigen::LLT<MatrixXcd> llt(sigma);
    if (llt.info() != Eigen::Success) throw NumericalError("covariance not positive definite");
    const VectorXd root = gains.row(b).transpose().cwiseSqrt();
    const MatrixXcd SG = S * root.asDiagonal();
    const MatrixXcd Q = SG.adjoint() * llt.solve(SG);
    J += Q.cwiseAbs2();
  }
  J *= static_cast<double>(num_antennas);
  return MakeFisherMatrix(J, num_antennas, rank_tol);
}

MatrixXd SampleErrorVectors(const FisherMatrix& fisher, int count, Rng& rng) {
  Require(count >= 1, "sample count must be at least 1");
  const double cutoff = fisher.rank_tol * fisher.lambda_max();
  std::vector<int> kept;
  for (int k = 0; k < fisher.eigenvalues.size(); ++k) {
    if (fisher.eigenvalues(k) > cutoff && fisher.eigenvalues(k) > 0.0) kept.push_back(k);
  }
  if (kept.empty()) throw NumericalError("Fisher matrix has no retained modes");
  MatrixXd basis(fisher.J.rows(), kept.size());
  VectorXd scale(kept.size());
  for (std::size_t t = 0; t < kept.size(); ++t) {
    basis.col(t) = fisher.eigenvectors.col(kept[t]);
    scale(t) = std::sqrt(fisher.num_antennas / fisher.eigenvalues(kept[t]));
  }
  MatrixXd out(count, fisher.J.rows());
  VectorXd z(kept.size());
  for (int c = 0; c < count; ++c) {
    for (Eigen::Index t = 0; t < z.size(); ++t) z(t) = rng.Normal() * scale(t);
    out.row(c) = (basis * z).transpose();
  }
  return out;
}

namespace {

bool IsActive(const VectorXd& a_true, Eigen::Index i) { return a_true(i) > 0.5; }

VectorXd ClampToCone(const VectorXd& v, const VectorXd& a_true) {
  VectorXd out = v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out(i) = IsActive(a_true, i) ? std::min(v(i), 0.0) : std::max(v(i), 0.0);
  }
  return out;
}

// Half of the QP objective with H = J / M; same minimizer.
double HalfObjective(const MatrixXd& H, const VectorXd& x, const VectorXd& eta) {
  const VectorXd r = eta - x;
  return 0.5 * r.dot(H * r);
}

// Projected-gradient residual of the half objective.
double HalfResidual(const MatrixXd& H, const VectorXd& x, const VectorXd& a_true,
                    const VectorXd& eta) {
  return (ClampToCone(eta - H * (eta - x), a_true) - eta).lpNorm<Eigen::Infinity>();
}

// Solves the QP restricted to a guessed face and accepts the result when it
// satisfies the full KKT conditions. The face starts as the support of eta
// plus the zero coordinates whose gradient points into the cone, and is
// re-guessed from each candidate a few times.
bool PolishOnFace(const MatrixXd& H, const VectorXd& x, const VectorXd& a_true,
                  VectorXd& eta) {
  const Eigen::Index n = eta.size();
  const VectorXd hx = H * x;
  const double scale = 1.0 + hx.lpNorm<Eigen::Infinity>();
  const double tol = 1e-10 * scale;
  VectorXd point = eta;
  for (int attempt = 0; attempt < 8; ++attempt) {
    const VectorXd grad = H * (point - x);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool inward = IsActive(a_true, i) ? grad(i) > tol : grad(i) < -tol;
      if (point(i) != 0.0 || inward) free.push_back(i);
    }
    VectorXd candidate = VectorXd::Zero(n);
    if (!free.empty()) {
      const Eigen::Index f = static_cast<Eigen::Index>(free.size());
      MatrixXd hff(f, f);
      VectorXd rhs(f);
      for (Eigen::Index p = 0; p < f; ++p) {
        rhs(p) = hx(free[p]);
        for (Eigen::Index q = 0; q < f; ++q) hff(p, q) = H(free[p], free[q]);
      }
      const VectorXd sol = hff.completeOrthogonalDecomposition().solve(rhs);
      if ((hff * sol - rhs).lpNorm<Eigen::Infinity>() > tol) return false;
      for (Eigen::Index p = 0; p < f; ++p) candidate(free[p]) = sol(p);
    }
    bool signs_ok = true;
    for (Eigen::Index i = 0; i < n && signs_ok; ++i) {
      const double v = candidate(i);
      signs_ok = IsActive(a_true, i) ? v <= 1e-13 * scale : v >= -1e-13 * scale;
    }
    candidate = ClampToCone(candidate, a_true);
    if (signs_ok) {
      const VectorXd cgrad = H * (candidate - x);
      bool kkt = true;
      for (Eigen::Index i = 0; i < n && kkt; ++i) {
        if (candidate(i) != 0.0) continue;
        kkt = IsActive(a_true, i) ? cgrad(i) <= tol : cgrad(i) >= -tol;
      }
      if (kkt && HalfObjective(H, x, candidate) <= HalfObjective(H, x, eta) + 1e-14 * scale) {
        eta = candidate;
        return true;
      }
    }
    // Move to the clamped candidate only when it does not increase the
    // objective, so the next face guess starts from a sensible point.
    if (HalfObjective(H, x, candidate) <= HalfObjective(H, x, point)) {
      point = candidate;
    } else {
      point = ClampToCone(0.5 * (point + candidate), a_true);
    }
  }
  return false;
}

}  // namespace

double ConeQpObjective(const VectorXd& x, const VectorXd& eta, const FisherMatrix& fisher) {
  const VectorXd r = x - eta;
  return r.dot(fisher.J * r) / fisher.num_antennas;
}

double ConeQpResidual(const VectorXd& x, const VectorXd& eta, const FisherMatrix& fisher,
                      const VectorXd& a_true) {
  const VectorXd grad = (2.0 / fisher.num_antennas) * (fisher.J * (eta - x));
  return (ClampToCone(eta - grad, a_true) - eta).lpNorm<Eigen::Infinity>();
}

QpResult ProjectOntoConeQp(const VectorXd& x, const FisherMatrix& fisher,
                           const VectorXd& a_true, const QpOptions& options) {
  Require(x.size() == fisher.J.rows() && a_true.size() == x.size(), "dimension mismatch");
  Require(x.allFinite(), "x must be finite");
  const MatrixXd H = fisher.J / fisher.num_antennas;
  const double lip = fisher.lambda_max() / fisher.num_antennas;
  QpResult result;
  VectorXd eta = ClampToCone(x, a_true);
  if (lip <= 0.0) {
    result.eta = eta;
    result.converged = true;
    return result;
  }
  double f = HalfObjective(H, x, eta);
  VectorXd z = eta;
  double t = 1.0;
  for (int k = 1; k <= options.max_iterations; ++k) {
    result.iterations = k;
    VectorXd next = ClampToCone(z - H * (z - x) / lip, a_true);
    double f_next = HalfObjective(H, x, next);
    if (f_next > f) {
      // Restart from the last accepted point with a plain projected step.
      t = 1.0;
      next = ClampToCone(eta - H * (eta - x) / lip, a_true);
      f_next = HalfObjective(H, x, next);
      if (f_next > f) {
        result.monotone = f_next <= f + 1e-15 * (1.0 + std::abs(f));
        break;
      }
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = next + ((t - 1.0) / t_next) * (next - eta);
    const double change = std::abs(f - f_next);
    eta = next;
    f = f_next;
    t = t_next;
    if (options.polish_every > 0 && k % options.polish_every == 0 &&
        PolishOnFace(H, x, a_true, eta)) {
      result.polished = true;
      result.converged = true;
      break;
    }
    if (change <= options.rel_tol * std::max(std::abs(f), 1e-300)) {
      // A tiny objective change alone can be a stall; require a certified
      // face or a small projected-gradient residual before stopping.
      if (PolishOnFace(H, x, a_true, eta)) {
        result.polished = true;
        result.converged = true;
        break;
      }
      if (HalfResidual(H, x, a_true, eta) <= 1e-10 * (1.0 + (H * x).lpNorm<Eigen::Infinity>())) {
        result.converged = true;
        break;
      }
    }
  }
  if (!result.polished && PolishOnFace(H, x, a_true, eta)) {
    result.polished = true;
    result.converged = true;
  }
  result.eta = eta;
  result.objective = ConeQpObjective(x, eta, fisher);
  return result;
}

PmPfCurve PmPfFromErrors(const std::vector<double>& zero_errors,
                         const std::vector<double>& one_errors,
                         const std::vector<double>& grid) {
  std::vector<double> zeros(zero_errors), ones(one_errors);
  std::sort(zeros.begin(), zeros.end());
  std::sort(ones.begin(), ones.end());
  PmPfCurve curve;
  curve.thresholds = grid;
  const double nan = std::nan("");
  for (double ell : grid) {
    // PM: 1 + e < ell  <=>  e < ell - 1.
    const auto miss = std::lower_bound(ones.begin(), ones.end(), ell - 1.0) - ones.begin();
    const auto fa = zeros.end() - std::lower_bound(zeros.begin(), zeros.end(), ell);
    curve.pm.push_back(ones.empty() ? nan : static_cast<double>(miss) / ones.size());
    curve.pf.push_back(zeros.empty() ? nan : static_cast<double>(fa) / zeros.size());
  }
  return curve;
}

PredictedErrors PredictedErrorDistribution(const MatrixXcd& S, const MatrixXd& gains,
                                           const VectorXd& a_true, double sigma2,
                                           int num_antennas, int count, const Rng& rng,
                                           int workers) {
  Require(count >= 1, "sample count must be at least 1");
  PredictedErrors out;
  out.consistent = CheckConsistency(S, gains, a_true).consistent;
  const FisherMatrix fisher = FisherInformation(S, gains, a_true, sigma2, num_antennas);
  const int n = static_cast<int>(S.cols());
  out.errors.resize(count, n);
  std::vector<char> converged(count, 1);
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(num_antennas));
  ParallelFor(count, workers, [&](int c) {
    Rng local = rng.Split(static_cast<std::uint64_t>(c));
    const VectorXd x = SampleErrorVectors(fisher, 1, local).row(0).transpose();
    const QpResult qp = ProjectOntoConeQp(x, fisher, a_true);
    converged[c] = qp.converged;
    out.errors.row(c) = qp.eta.transpose() * inv_sqrt_m;
  });
  for (int c = 0; c < count; ++c) {
    out.unconverged += converged[c] ? 0 : 1;
    for (int i = 0; i < n; ++i) {
      (a_true(i) > 0.5 ? out.one_errors : out.zero_errors).push_back(out.errors(c, i));
    }
  }
  out.curve = PmPfFromErrors(out.zero_errors, out.one_errors, ThresholdGrid());
  return out;
}

void WriteErrorDistCsv(const PredictedErrors& pred, const VectorXd& a_true,
                       const std::string& path) {
  CsvWriter csv(path, {"sample_id", "coord_type", "error_value"});
  for (Eigen::Index c = 0; c < pred.errors.rows(); ++c) {
    for (Eigen::Index i = 0; i < pred.errors.cols(); ++i) {
      csv.Add(static_cast<long long>(c))
          .Add(a_true(i) > 0.5 ? "one" : "zero")
          .Add(pred.errors(c, i))
          .EndRow();
    }
  }
}

void WritePmPfCsv(const PmPfCurve& curve, const std::string& path) {
  CsvWriter csv(path, {"threshold", "pm", "pf"});
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
    csv.Add(curve.thresholds[k]).Add(curve.pm[k]).Add(curve.pf[k]).EndRow();
  }
}

double KsDistance(std::vector<double> a, std::vector<double> b) {
  Require(!a.empty() && !b.empty(), "KS distance needs non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double worst = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    const double fa = static_cast<double>(i) / a.size();
    const double fb = static_cast<double>(j) / b.size();
    worst = std::max(worst, std::abs(fa - fb));
  }
  return worst;
}

}  // namespace covdet
