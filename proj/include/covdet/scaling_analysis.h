#ifndef COVDET_SCALING_ANALYSIS_H_
#define COVDET_SCALING_ANALYSIS_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "covdet/common.h"
#include "covdet/system_model.h"

namespace covdet {

struct KronMatrix {
  MatrixXcd full;     // L^2 x BN, columns conj(s) kron s
  MatrixXcd offdiag;  // L(L-1) x BN, the off-diagonal entries of s s^H
};

KronMatrix BuildKronMatrix(const MatrixXcd& S);

// Real L^2 x BN matrix holding, per column, the diagonal of s s^H followed by
// sqrt(2) Re and sqrt(2) Im of the strictly upper entries. It has the same
// real null space as [Re; Im] of the full Kronecker matrix and preserves the
// Euclidean norm of each column.
MatrixXd HermitianRealRows(const MatrixXcd& S);

enum class ConsistencyMethod {
  // Restricts the sign-constrained search to the numerical null space.
  kNullSpace,
  // Minimizes the l1 norm of the stacked residual with slack variables.
  kSlackLp,
};

struct ConsistencyOptions {
  ConsistencyMethod method = ConsistencyMethod::kNullSpace;
  double threshold = 1e-6;
  double rank_tol = 1e-9;
};

struct ConsistencyVerdict {
  bool consistent = true;
  std::optional<VectorXd> witness;  // unit l1 norm when present
  double lp_residual = 0.0;
  int null_dim = 0;
  std::string method;
};

// Tests whether the null space of the gain-weighted Kronecker system meets
// the sign cone of a_true only at zero.
ConsistencyVerdict CheckConsistency(const MatrixXcd& S, const MatrixXd& gains,
                                    const VectorXd& a_true,
                                    const ConsistencyOptions& options = {});

struct WitnessReport {
  bool sign_ok = false;
  double max_residual = 0.0;  // max_b ||Stilde G_b x||_inf / ||x||_1
  double max_sum_ratio = 0.0; // max_b |1^T G_b x| / ||G_b x||_1
};

WitnessReport InspectWitness(const MatrixXcd& S, const MatrixXd& gains,
                             const VectorXd& a_true, const VectorXd& x);

struct PhaseCell {
  int length = 0;
  int active = 0;
  int num_cells = 0;
  SequenceType seq_type = SequenceType::kQpsk;
  int trials = 0;
  int successes = 0;

  double fraction() const { return trials ? static_cast<double>(successes) / trials : 0.0; }
};

struct PhaseConfig {
  int devices = 50;
  int num_cells = 1;
  std::vector<int> lengths;
  std::vector<int> actives;
  int trials = 100;
  SequenceType seq_type = SequenceType::kQpsk;
  LayoutKind layout = LayoutKind::kHex;
  double radius = 500.0;
  std::uint64_t seed = 0;
  int workers = 0;
};

// Success frequency of the consistency test over (L, K) cells. Cell order is
// L-major, then K.
std::vector<PhaseCell> PhaseDiagram(const PhaseConfig& config);

void WritePhaseCsv(const std::vector<PhaseCell>& cells, const std::string& path);

struct NspResult {
  bool holds = true;
  double worst = 0.0;  // largest ||v_S||_1 - rho ||v_Sc||_1 over the unit box
  int null_dim = 0;
};

// Exhaustive stable-NSP check for tiny systems.
NspResult NspCheckSmall(const KronMatrix& kron, int s_order, double rho,
                        double tol = 1e-9);

// Orthonormal basis of the real null space of [Re; Im] kron.full.
MatrixXd RealNullSpace(const KronMatrix& kron, double rank_tol = 1e-9);

struct InterferenceReport {
  std::vector<double> lhs;  // per BS: sum over other cells of the max gain
  double bound = 0.0;
};

// Closed-form interference constant for path-loss exponent gamma.
double InterferenceConstant(double gamma, double p0, double d0, double radius);

InterferenceReport InterferenceBound(const CellLayout& layout, const DeviceIndex& index,
                                     double gamma, double p0, double d0,
                                     const std::vector<Point>& positions);

}  // namespace covdet

#endif  // COVDET_SCALING_ANALYSIS_H_
