#include "covdet/linear_program.h"

#include <cmath>
#include <limits>
#include <vector>

namespace covdet {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tableau {
 public:
  Tableau(const LinearProgram& lp, const SimplexOptions& options)
      : options_(options) {
    n_ = static_cast<int>(lp.c.size());
    const int m_ub = static_cast<int>(lp.a_ub.rows());
    const int m_eq = static_cast<int>(lp.a_eq.rows());
    Require(m_ub == 0 || lp.a_ub.cols() == n_, "A_ub has wrong column count");
    Require(m_eq == 0 || lp.a_eq.cols() == n_, "A_eq has wrong column count");
    Require(lp.b_ub.size() == m_ub && lp.b_eq.size() == m_eq, "rhs sizes mismatch");
    m_ = m_ub + m_eq;
    int num_art = 0;
    for (int i = 0; i < m_ub; ++i) num_art += lp.b_ub(i) < 0.0 ? 1 : 0;
    num_art += m_eq;
    slack0_ = n_;
    art0_ = n_ + m_ub;
    cols_ = art0_ + num_art;
    t_ = RowMatrix::Zero(m_ + 1, cols_ + 1);
    basis_.assign(m_, -1);
    initial_.assign(m_, -1);
    int art = art0_;
    for (int i = 0; i < m_ub; ++i) {
      const double sign = lp.b_ub(i) < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(n_) = sign * lp.a_ub.row(i);
      t_(i, slack0_ + i) = sign;
      t_(i, cols_) = sign * lp.b_ub(i);
      initial_[i] = sign > 0.0 ? slack0_ + i : art;
      if (sign > 0.0) {
        basis_[i] = slack0_ + i;
      } else {
        t_(i, art) = 1.0;
        basis_[i] = art++;
      }
    }
    for (int k = 0; k < m_eq; ++k) {
      const int i = m_ub + k;
      initial_[i] = art;
      const double sign = lp.b_eq(k) < 0.0 ? -1.0 : 1.0;
      t_.row(i).head(n_) = sign * lp.a_eq.row(k);
      t_(i, cols_) = sign * lp.b_eq(k);
      t_(i, art) = 1.0;
      basis_[i] = art++;
    }
    c_ = lp.c;
  }

  LpResult Run() {
    LpResult result;
    // Phase one: minimize the sum of artificials.
    VectorXd cost = VectorXd::Zero(cols_);
    cost.segment(art0_, cols_ - art0_).setOnes();
    SetObjective(cost);
    LpStatus status = Iterate(/*allow_artificial=*/true, result.iterations);
    result.infeasibility = -t_(m_, cols_);
    if (status == LpStatus::kIterationLimit) {
      result.status = status;
      return result;
    }
    if (result.infeasibility > options_.feasibility_tolerance) {
      result.status = LpStatus::kInfeasible;
      result.x = Solution();
      return result;
    }
    DriveOutArtificials();
    if (options_.feasibility_only) {
      result.status = LpStatus::kOptimal;
      result.x = Solution();
      result.objective = c_.dot(result.x);
      return result;
    }
    cost.setZero();
    cost.head(n_) = c_;
    SetObjective(cost);
    result.status = Iterate(/*allow_artificial=*/false, result.iterations);
    result.x = Solution();
    result.objective = c_.dot(result.x);
    return result;
  }

 private:
  void SetObjective(const VectorXd& cost) {
    t_.row(m_).setZero();
    t_.row(m_).head(cols_) = cost.transpose();
    for (int i = 0; i < m_; ++i) {
      const double cb = cost(basis_[i]);
      if (cb != 0.0) t_.row(m_) -= cb * t_.row(i);
    }
  }

  void Pivot(int row, int col) {
    t_.row(row) /= t_(row, col);
    for (int i = 0; i <= m_; ++i) {
      if (i == row) continue;
      const double f = t_(i, col);
      if (f != 0.0) t_.row(i) -= f * t_.row(row);
    }
    t_.col(col).setZero();
    t_(row, col) = 1.0;
    basis_[row] = col;
  }

  // True when row i beats row k in the lexicographic ratio test for `col`:
  // rows of [rhs, B^-1] scaled by the pivot entry are compared in order.
  bool LexLess(int i, int k, int col) const {
    const double ai = t_(i, col);
    const double ak = t_(k, col);
    const double ri = std::max(t_(i, cols_), 0.0) / ai;
    const double rk = std::max(t_(k, cols_), 0.0) / ak;
    const double tol = 1e-12;
    if (ri < rk - tol * (1.0 + rk)) return true;
    if (ri > rk + tol * (1.0 + rk)) return false;
    for (int c : initial_) {
      const double vi = t_(i, c) / ai;
      const double vk = t_(k, c) / ak;
      if (vi < vk - tol * (1.0 + std::abs(vk))) return true;
      if (vi > vk + tol * (1.0 + std::abs(vk))) return false;
    }
    return i < k;
  }

  LpStatus Iterate(bool allow_artificial, int& iterations) {
    const double tol = options_.tolerance;
    const int limit = allow_artificial ? cols_ : art0_;
    // A feasibility question is settled once phase one is below tolerance:
    // the optimum can only be lower. Pivoting on further is noise-driven.
    const bool stop_when_feasible = allow_artificial && options_.feasibility_only;
    while (iterations < options_.max_iterations) {
      if (stop_when_feasible && -t_(m_, cols_) <= options_.feasibility_tolerance) {
        return LpStatus::kOptimal;
      }
      int enter = -1;
      double best = -tol;
      for (int j = 0; j < limit; ++j) {
        const double r = t_(m_, j);
        if (r < best) {
          enter = j;
          best = r;
        }
      }
      if (enter < 0) return LpStatus::kOptimal;
      int leave = -1;
      for (int i = 0; i < m_; ++i) {
        if (t_(i, enter) <= tol) continue;
        if (leave < 0 || LexLess(i, leave, enter)) leave = i;
      }
      if (leave < 0) return LpStatus::kUnbounded;
      Pivot(leave, enter);
      ++iterations;
    }
    return LpStatus::kIterationLimit;
  }

  void DriveOutArtificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < art0_) continue;
      int best = -1;
      double best_abs = options_.tolerance;
      for (int j = 0; j < art0_; ++j) {
        if (std::abs(t_(i, j)) > best_abs) {
          best = j;
          best_abs = std::abs(t_(i, j));
        }
      }
      // A row without such a column is redundant and stays inert.
      if (best >= 0) Pivot(i, best);
    }
  }

  VectorXd Solution() const {
    VectorXd x = VectorXd::Zero(n_);
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_) x(basis_[i]) = std::max(t_(i, cols_), 0.0);
    }
    return x;
  }

  SimplexOptions options_;
  int n_ = 0;
  int m_ = 0;
  int slack0_ = 0;
  int art0_ = 0;
  int cols_ = 0;
  RowMatrix t_;
  std::vector<int> basis_;
  std::vector<int> initial_;  // column of the starting basic variable per row
  VectorXd c_;
};

}  // namespace

LpResult SolveLinearProgram(const LinearProgram& lp, const SimplexOptions& options) {
  Tableau tableau(lp, options);
  return tableau.Run();
}

}  // namespace covdet
