#ifndef COVDET_ERROR_ANALYSIS_H_
#define COVDET_ERROR_ANALYSIS_H_

#include <string>
#include <vector>

#include "covdet/common.h"
#include "covdet/metrics.h"
#include "covdet/rng.h"

namespace covdet {

struct FisherMatrix {
  MatrixXd J;
  int num_antennas = 0;
  VectorXd eigenvalues;   // ascending
  MatrixXd eigenvectors;  // columns match eigenvalues
  double rank_tol = 1e-10;

  double lambda_max() const { return eigenvalues.size() ? eigenvalues.maxCoeff() : 0.0; }
  // Number of eigenvalues above rank_tol * lambda_max.
  int Rank() const;
  MatrixXd PseudoInverse() const;
};

// J(a) = M sum_b |Q_b|^2 (elementwise), Q_b = G_b^{1/2} S^H Sigma_b^{-1} S G_b^{1/2}.
FisherMatrix FisherInformation(const MatrixXcd& S, const MatrixXd& gains,
                               const VectorXd& a, double sigma2, int num_antennas,
                               double rank_tol = 1e-10);

// Builds the decomposition for an arbitrary symmetric PSD J.
FisherMatrix MakeFisherMatrix(const MatrixXd& J, int num_antennas, double rank_tol = 1e-10);

// Rows are draws from N(0, M J^+).
MatrixXd SampleErrorVectors(const FisherMatrix& fisher, int count, Rng& rng);

struct QpOptions {
  double rel_tol = 1e-10;
  int max_iterations = 20000;
  int polish_every = 50;
};

struct QpResult {
  VectorXd eta;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  bool polished = false;  // optimum certified on its active face
  bool monotone = true;   // objective never increased between accepted iterates
};

// Minimizes (1/M)(x - eta)^T J (x - eta) over the cone eta_i >= 0 for
// inactive i and eta_i <= 0 for active i.
QpResult ProjectOntoConeQp(const VectorXd& x, const FisherMatrix& fisher,
                           const VectorXd& a_true, const QpOptions& options = {});

double ConeQpObjective(const VectorXd& x, const VectorXd& eta, const FisherMatrix& fisher);

// ||clamp_C(eta - grad q(eta)) - eta||_inf.
double ConeQpResidual(const VectorXd& x, const VectorXd& eta, const FisherMatrix& fisher,
                      const VectorXd& a_true);

struct PredictedErrors {
  MatrixXd errors;  // count x BN, already scaled by 1/sqrt(M)
  std::vector<double> zero_errors;
  std::vector<double> one_errors;
  PmPfCurve curve;
  bool consistent = true;
  int unconverged = 0;
};

PredictedErrors PredictedErrorDistribution(const MatrixXcd& S, const MatrixXd& gains,
                                           const VectorXd& a_true, double sigma2,
                                           int num_antennas, int count, const Rng& rng,
                                           int workers = 1);

// Pooled PM(l) = P(1 + e < l) over one-entries and PF(l) = P(e >= l) over
// zero-entries.
PmPfCurve PmPfFromErrors(const std::vector<double>& zero_errors,
                         const std::vector<double>& one_errors,
                         const std::vector<double>& grid);

void WriteErrorDistCsv(const PredictedErrors& pred, const VectorXd& a_true,
                       const std::string& path);
void WritePmPfCsv(const PmPfCurve& curve, const std::string& path);

// Two-sample Kolmogorov-Smirnov distance.
double KsDistance(std::vector<double> a, std::vector<double> b);

}  // namespace covdet

#endif  // COVDET_ERROR_ANALYSIS_H_
