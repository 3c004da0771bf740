#ifndef COVDET_MLE_SOLVERS_H_
#define COVDET_MLE_SOLVERS_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "covdet/common.h"
#include "covdet/solver_core.h"

namespace covdet {

enum class SubproblemMode { kExact, kInexact };

struct SolverConfig {
  SubproblemMode mode = SubproblemMode::kExact;
  bool active_set = false;
  double epsilon = 1e-3;
  int max_sweeps = 1000;
  double mu0_floor = 1e-2;
  double beta = 2.0;
  double omega_decay = 5.0;
  std::uint64_t seed = 0;
  // Evaluate F at every sweep boundary (excluded from wall time).
  bool record_objective = true;

  void Validate() const;
};

// Short names: "cd", "icd", "as-cd", "as-icd".
std::string SolverName(const SolverConfig& config);
SolverConfig SolverFromName(const std::string& name);

struct Solution {
  VectorXd a_hat;
  double final_objective = 0.0;
  int sweeps = 0;
  long long coord_updates_total = 0;
  long long nonzero_steps = 0;
  // Index 0 of every trace describes the starting point; index k > 0 the
  // state after sweep (or active-set iteration) k.
  std::vector<long long> coord_updates_per_sweep;
  std::vector<int> active_set_sizes;
  std::vector<double> v_inf_trace;
  std::vector<double> objective_trace;
  std::vector<double> elapsed_trace;
  double wall_time = 0.0;
  bool converged = false;
};

// Called after every coordinate update with solver time so far.
using ProgressCallback = std::function<void(double elapsed_s, const VectorXd& a)>;

// phi(d) = sum_j log(1 + d xi_j) - d zeta_j / (1 + d xi_j), the change in F
// along a coordinate.
double SubproblemObjective(const CoordCoeffs& coeffs, double d);
double SubproblemDerivative(const CoordCoeffs& coeffs, double d);

// Coefficients (ascending) of the cleared-denominator derivative polynomial.
std::vector<double> SubproblemPolynomial(const CoordCoeffs& coeffs);

double SolveSubproblemExact(const CoordCoeffs& coeffs, double a_i);

// Surrogate minimized by the inexact update for a given mu.
double SurrogateObjective(const CoordCoeffs& coeffs, int own_cell, double mu, double d);

// Sufficient-decrease test on the interference cells.
bool SufficientDecrease(const CoordCoeffs& coeffs, int own_cell, double mu, double d);

double InitMu(const CoordCoeffs& coeffs, int own_cell, double mu0_floor);

struct InexactStep {
  double d = 0.0;
  double mu = 0.0;
  int backtracks = 0;
};

InexactStep SolveSubproblemInexact(const CoordCoeffs& coeffs, int own_cell,
                                   double a_i, const SolverConfig& config);
double SolveSubproblemInexact(const SolverState& state, int i,
                              const SolverConfig& config);

Solution RunCd(SolverState& state, const SolverConfig& config,
               const ProgressCallback& progress = nullptr);

std::vector<int> SelectActiveSet(const VectorXd& violation, double omega);

double OmegaSchedule(int k, double v_inf, double epsilon, double decay);

Solution RunActiveSetCd(SolverState& state, const SolverConfig& config,
                        const ProgressCallback& progress = nullptr);

// Runs the configured solver from a = 0.
Solution Solve(const DetectionProblem& problem, const SolverConfig& config,
               const ProgressCallback& progress = nullptr);

VectorXd ThresholdEstimate(const VectorXd& a_hat, double ell_th);

void WriteSolutionCsv(const Solution& solution, const std::string& path);
void WriteTraceCsv(const Solution& solution, const std::string& path);

}  // namespace covdet

#endif  // COVDET_MLE_SOLVERS_H_
