#ifndef COVDET_LINEAR_PROGRAM_H_
#define COVDET_LINEAR_PROGRAM_H_

#include "covdet/common.h"

namespace covdet {

// minimize c^T x  s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  x >= 0.
// Empty matrices (zero rows) are allowed for either constraint block.
struct LinearProgram {
  VectorXd c;
  MatrixXd a_ub;
  VectorXd b_ub;
  MatrixXd a_eq;
  VectorXd b_eq;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct LpResult {
  LpStatus status = LpStatus::kIterationLimit;
  VectorXd x;
  double objective = 0.0;
  // Sum of artificial variables at the end of phase one; zero (up to
  // tolerance) exactly when the constraints are feasible.
  double infeasibility = 0.0;
  int iterations = 0;
};

struct SimplexOptions {
  double tolerance = 1e-9;
  // Phase-one optimum above this declares the problem infeasible.
  double feasibility_tolerance = 1e-7;
  int max_iterations = 50000;
  // Stop after phase one (pure feasibility question). Phase one then also
  // ends as soon as its objective is within feasibility_tolerance.
  bool feasibility_only = false;
};

// Dense two-phase tableau simplex with Dantzig pricing and a lexicographic
// ratio test, which rules out cycling on degenerate problems.
LpResult SolveLinearProgram(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace covdet

#endif  // COVDET_LINEAR_PROGRAM_H_
