#include "covdet/solver_core.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace covdet {

namespace {

// Denominators 1 + d xi below this trigger a from-scratch refresh of the cell,
// since Sherman-Morrison loses accuracy in proportion to 1/denominator.
constexpr double kTinyDenominator = 1e-6;

double RealQuadForm(const Complex& value, double scale, const char* what) {
  if (std::abs(value.imag()) > 1e-8 * std::max(std::abs(value.real()), scale)) {
    throw NumericalError(std::string("complex residue in ") + what +
                         "; cached inverse is corrupted");
  }
  return std::max(value.real(), 0.0);
}

MatrixXcd InvertHpd(const MatrixXcd& sigma) {
  Eigen::LLT<MatrixXcd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("model covariance is not positive definite");
  }
  MatrixXcd inv = llt.solve(MatrixXcd::Identity(sigma.rows(), sigma.cols()));
  return 0.5 * (inv + inv.adjoint());
}

}  // namespace

DetectionProblem MakeProblem(const SystemInstance& instance,
                             const SampleCovariances& covs) {
  DetectionProblem p;
  p.S = instance.S;
  p.gains = instance.gains;
  p.sigma2 = instance.sigma2;
  p.sample_covs = covs.mats;
  p.num_antennas = covs.num_antennas;
  p.cell_of.resize(instance.num_devices());
  for (int i = 0; i < instance.num_devices(); ++i) p.cell_of[i] = instance.index.CellOf(i);
  ValidateProblem(p);
  return p;
}

void ValidateProblem(const DetectionProblem& p) {
  Require(p.sigma2 > 0.0, "noise variance must be positive");
  Require(p.gains.cols() == p.S.cols(), "gain and sequence dimensions differ");
  Require(static_cast<int>(p.sample_covs.size()) == p.num_cells(),
          "need one sample covariance per cell");
  for (const auto& c : p.sample_covs) {
    Require(c.rows() == p.length() && c.cols() == p.length(),
            "sample covariance has the wrong size");
  }
  Require(static_cast<int>(p.cell_of.size()) == p.num_devices(),
          "cell_of must list every device");
  Require((p.gains.array() >= 0.0).all(), "gains must be nonnegative");
}

MatrixXcd ModelCovariance(const DetectionProblem& problem, int b,
                          const VectorXd& a) {
  const int L = problem.length();
  std::vector<int> support;
  for (int i = 0; i < problem.num_devices(); ++i) {
    if (a(i) != 0.0 && problem.gains(b, i) != 0.0) support.push_back(i);
  }
  MatrixXcd cols(L, support.size());
  VectorXd w(support.size());
  for (std::size_t t = 0; t < support.size(); ++t) {
    cols.col(t) = problem.S.col(support[t]);
    w(t) = problem.gains(b, support[t]) * a(support[t]);
  }
  MatrixXcd sigma = MatrixXcd::Zero(L, L);
  if (!support.empty()) sigma.noalias() = cols * w.asDiagonal() * cols.adjoint();
  sigma.diagonal().array() += problem.sigma2;
  return 0.5 * (sigma + sigma.adjoint());
}

SolverState::SolverState(const DetectionProblem& problem)
    : SolverState(problem, VectorXd::Zero(problem.num_devices())) {}

SolverState::SolverState(const DetectionProblem& problem, const VectorXd& a0)
    : problem_(&problem), a_(a0) {
  Require(a0.size() == problem.num_devices(), "initial activity has wrong length");
  Require((a0.array() >= 0.0).all() && (a0.array() <= 1.0).all(),
          "initial activity must lie in [0, 1]");
  inv_sigmas_.resize(problem.num_cells());
  Refresh();
}

void SolverState::RefreshCell(int b) {
  inv_sigmas_[b] = InvertHpd(ModelCovariance(*problem_, b, a_));
}

void SolverState::Refresh() {
  for (int b = 0; b < problem_->num_cells(); ++b) RefreshCell(b);
  updates_since_refresh_ = 0;
  ++total_refreshes_;
}

void SolverState::SetActivity(const VectorXd& a) {
  Require(a.size() == a_.size(), "activity has wrong length");
  a_ = a;
  Refresh();
}

void SolverState::ApplyUpdate(int i, double d, const CoordWork* work) {
  if (d == 0.0) return;
  const double target = a_(i) + d;
  if (target < -1e-12 || target > 1.0 + 1e-12) {
    throw NumericalError("coordinate update leaves [0, 1]");
  }
  CoordWork local;
  if (work == nullptr) {
    local = ComputeCoordWork(*this, i);
    work = &local;
  }
  a_(i) = std::clamp(target, 0.0, 1.0);
  for (int j = 0; j < problem_->num_cells(); ++j) {
    const double xi = work->coeffs.xi(j);
    if (xi == 0.0) continue;
    const double denom = 1.0 + d * xi;
    if (!(denom > 0.0)) throw NumericalError("infeasible rank-one step");
    if (denom < kTinyDenominator) {
      RefreshCell(j);
      continue;
    }
    const double coef = d * problem_->gains(j, i) / denom;
    const VectorXcd& y = work->y[j];
    inv_sigmas_[j].noalias() -= coef * (y * y.adjoint());
  }
  const int interval = refresh_interval_ > 0 ? refresh_interval_ : problem_->num_devices();
  if (++updates_since_refresh_ >= interval) Refresh();
}

double SolverState::CacheError() const {
  double worst = 0.0;
  const int L = problem_->length();
  for (int b = 0; b < problem_->num_cells(); ++b) {
    const MatrixXcd prod = ModelCovariance(*problem_, b, a_) * inv_sigmas_[b];
    worst = std::max(worst, (prod - MatrixXcd::Identity(L, L)).norm());
  }
  return worst;
}

double Objective(const DetectionProblem& problem, const VectorXd& a) {
  double total = 0.0;
  for (int b = 0; b < problem.num_cells(); ++b) {
    Eigen::LLT<MatrixXcd> llt(ModelCovariance(problem, b, a));
    if (llt.info() != Eigen::Success) {
      throw NumericalError("model covariance is not positive definite");
    }
    const MatrixXcd& factor = llt.matrixLLT();
    double log_det = 0.0;
    for (int l = 0; l < factor.rows(); ++l) log_det += 2.0 * std::log(factor(l, l).real());
    const MatrixXcd solved = llt.solve(problem.sample_covs[b]);
    total += log_det + solved.trace().real();
  }
  return total;
}

double Objective(const SolverState& state) { return Objective(state.problem(), state.a()); }

CoordWork ComputeCoordWork(const SolverState& state, int i) {
  const DetectionProblem& p = state.problem();
  const int B = p.num_cells();
  CoordWork work;
  work.coeffs.xi.resize(B);
  work.coeffs.zeta.resize(B);
  work.y.resize(B);
  const auto s = p.S.col(i);
  for (int j = 0; j < B; ++j) {
    const double g = p.gains(j, i);
    VectorXcd& y = work.y[j];
    y.noalias() = state.inv_sigmas()[j] * s;
    work.coeffs.xi(j) = g * RealQuadForm(s.dot(y), y.norm() * s.norm(), "xi");
    const VectorXcd sy = p.sample_covs[j] * y;
    work.coeffs.zeta(j) =
        g * RealQuadForm(y.dot(sy), y.norm() * sy.norm(), "zeta");
  }
  return work;
}

CoordCoeffs CoordCoefficients(const SolverState& state, int i) {
  return ComputeCoordWork(state, i).coeffs;
}

double GradientCoordinate(const SolverState& state, int i) {
  const CoordCoeffs c = CoordCoefficients(state, i);
  return (c.xi - c.zeta).sum();
}

VectorXd FullGradient(const SolverState& state) {
  const DetectionProblem& p = state.problem();
  VectorXd grad = VectorXd::Zero(p.num_devices());
  for (int b = 0; b < p.num_cells(); ++b) {
    const MatrixXcd Y = state.inv_sigmas()[b] * p.S;
    const MatrixXcd Z = p.sample_covs[b] * Y;
    for (int i = 0; i < p.num_devices(); ++i) {
      const double xi = p.S.col(i).dot(Y.col(i)).real();
      const double zeta = Y.col(i).dot(Z.col(i)).real();
      grad(i) += p.gains(b, i) * (xi - zeta);
    }
  }
  return grad;
}

VectorXd OptimalityViolation(const VectorXd& a, const VectorXd& gradient) {
  return ((a - gradient).cwiseMax(0.0).cwiseMin(1.0) - a).cwiseAbs();
}

VectorXd OptimalityViolation(const SolverState& state) {
  return OptimalityViolation(state.a(), FullGradient(state));
}

}  // namespace covdet
