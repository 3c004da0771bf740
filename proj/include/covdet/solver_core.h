#ifndef COVDET_SOLVER_CORE_H_
#define COVDET_SOLVER_CORE_H_

#include <vector>

#include "covdet/common.h"
#include "covdet/system_model.h"

namespace covdet {

// Everything a detector is allowed to see: sequences, large-scale fading,
// noise level and the sample covariances.
struct DetectionProblem {
  MatrixXcd S;                         // L x BN
  MatrixXd gains;                      // B x BN
  double sigma2 = 1.0;
  std::vector<MatrixXcd> sample_covs;  // B matrices, L x L
  int num_antennas = 0;
  std::vector<int> cell_of;            // owning cell of each device

  int num_cells() const { return static_cast<int>(gains.rows()); }
  int num_devices() const { return static_cast<int>(S.cols()); }
  int length() const { return static_cast<int>(S.rows()); }
};

DetectionProblem MakeProblem(const SystemInstance& instance,
                             const SampleCovariances& covs);

void ValidateProblem(const DetectionProblem& problem);

// Per-coordinate scalars xi_j = g_j s^H inv_j s and zeta_j = g_j y^H Shat_j y
// with y = inv_j s, one entry per cell j.
struct CoordCoeffs {
  VectorXd xi;
  VectorXd zeta;
};

// Coefficients together with the vectors y_j = inv_j s, which the rank-one
// update reuses.
struct CoordWork {
  CoordCoeffs coeffs;
  std::vector<VectorXcd> y;
};

// Current activity estimate plus cached inverses of the model covariances.
// The cache is refreshed from scratch every `refresh_interval` rank-one
// updates, whenever an update has a near-singular denominator, and on demand.
class SolverState {
 public:
  explicit SolverState(const DetectionProblem& problem);
  SolverState(const DetectionProblem& problem, const VectorXd& a0);

  const DetectionProblem& problem() const { return *problem_; }
  const VectorXd& a() const { return a_; }
  const std::vector<MatrixXcd>& inv_sigmas() const { return inv_sigmas_; }
  int updates_since_refresh() const { return updates_since_refresh_; }
  long long total_refreshes() const { return total_refreshes_; }

  void set_refresh_interval(int interval) { refresh_interval_ = interval; }
  int refresh_interval() const { return refresh_interval_; }

  // Rebuilds every inverse by Cholesky factorization of Sigma_b(a).
  void Refresh();

  // Moves coordinate i by d and updates every cached inverse by
  // Sherman-Morrison. `work` may carry precomputed y vectors for i.
  void ApplyUpdate(int i, double d, const CoordWork* work = nullptr);

  // Replaces the activity vector and refreshes.
  void SetActivity(const VectorXd& a);

  // max_b ||Sigma_b(a) inv_b - I||_F.
  double CacheError() const;

 private:
  void RefreshCell(int b);

  const DetectionProblem* problem_;
  VectorXd a_;
  std::vector<MatrixXcd> inv_sigmas_;
  int updates_since_refresh_ = 0;
  int refresh_interval_ = 0;  // 0 picks BN
  long long total_refreshes_ = 0;
};

// Sigma_b(a) for the given problem.
MatrixXcd ModelCovariance(const DetectionProblem& problem, int b,
                          const VectorXd& a);

// F(a) = sum_b log det Sigma_b + tr(Sigma_b^{-1} Shat_b), evaluated from
// fresh Cholesky factors.
double Objective(const DetectionProblem& problem, const VectorXd& a);
double Objective(const SolverState& state);

CoordWork ComputeCoordWork(const SolverState& state, int i);
CoordCoeffs CoordCoefficients(const SolverState& state, int i);

double GradientCoordinate(const SolverState& state, int i);

// Full gradient from the cached inverses, batched over devices per cell.
VectorXd FullGradient(const SolverState& state);

// |clamp_[0,1](a - grad) - a| coordinate-wise.
VectorXd OptimalityViolation(const VectorXd& a, const VectorXd& gradient);
VectorXd OptimalityViolation(const SolverState& state);

inline void RankOneUpdate(SolverState& state, int i, double d) {
  state.ApplyUpdate(i, d);
}

}  // namespace covdet

#endif  // COVDET_SOLVER_CORE_H_
