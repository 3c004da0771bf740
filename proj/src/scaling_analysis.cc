#include "covdet/scaling_analysis.h"

#include <algorithm>
#include <cmath>
#include <functional>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "covdet/csv.h"
#include "covdet/linear_program.h"
#include "covdet/parallel.h"

namespace covdet {

KronMatrix BuildKronMatrix(const MatrixXcd& S) {
  const int L = static_cast<int>(S.rows());
  Require(L >= 2, "sequence length must be at least 2");
  const int n = static_cast<int>(S.cols());
  KronMatrix kron;
  kron.full.resize(L * L, n);
  kron.offdiag.resize(L * (L - 1), n);
  for (int i = 0; i < n; ++i) {
    int off = 0;
    for (int p = 0; p < L; ++p) {
      for (int q = 0; q < L; ++q) {
        const Complex v = std::conj(S(p, i)) * S(q, i);
        kron.full(p * L + q, i) = v;
        if (p != q) kron.offdiag(off++, i) = v;
      }
    }
  }
  return kron;
}

MatrixXd HermitianRealRows(const MatrixXcd& S) {
  const int L = static_cast<int>(S.rows());
  const int n = static_cast<int>(S.cols());
  const double r2 = std::sqrt(2.0);
  MatrixXd out(L * L, n);
  for (int i = 0; i < n; ++i) {
    int row = 0;
    for (int p = 0; p < L; ++p) out(row++, i) = std::norm(S(p, i));
    for (int p = 0; p < L; ++p) {
      for (int q = p + 1; q < L; ++q) {
        const Complex v = std::conj(S(p, i)) * S(q, i);
        out(row++, i) = r2 * v.real();
        out(row++, i) = r2 * v.imag();
      }
    }
  }
  return out;
}

namespace {

// Column i of the stacked system, in coordinates z_i = scale_i x_i, where
// scale_i is the largest gain of device i.
MatrixXd StackedSystem(const MatrixXcd& S, const MatrixXd& gains, VectorXd& scale) {
  const int B = static_cast<int>(gains.rows());
  const int n = static_cast<int>(S.cols());
  const MatrixXd rows = HermitianRealRows(S);
  const int r = static_cast<int>(rows.rows());
  scale = gains.colwise().maxCoeff().transpose();
  MatrixXd stacked(B * r, n);
  for (int i = 0; i < n; ++i) {
    Require(scale(i) > 0.0, "every device needs a positive gain");
    for (int b = 0; b < B; ++b) {
      stacked.block(b * r, i, r, 1) = rows.col(i) * (gains(b, i) / scale(i));
    }
  }
  return stacked;
}

VectorXd SignPattern(const VectorXd& a_true) {
  return (a_true.array() > 0.5).select(VectorXd::Constant(a_true.size(), -1.0),
                                       VectorXd::Ones(a_true.size()));
}

// The LP only meets its constraints to the feasibility tolerance. A
// minimum-norm correction on the support of y restores M diag(sign) y = 0 to
// working precision; it is kept only if y stays nonnegative.
VectorXd PolishCone(const MatrixXd& stacked, const VectorXd& sign, const VectorXd& y) {
  std::vector<int> support;
  for (int i = 0; i < y.size(); ++i) {
    if (y(i) > 0.0) support.push_back(i);
  }
  const int p = static_cast<int>(support.size());
  const int r = static_cast<int>(stacked.rows());
  if (p == 0) return y;
  MatrixXd a(r + 1, p);
  VectorXd yp(p);
  for (int k = 0; k < p; ++k) {
    a.block(0, k, r, 1) = stacked.col(support[k]) * sign(support[k]);
    a(r, k) = 1.0;
    yp(k) = y(support[k]);
  }
  VectorXd rhs = -(a * yp);
  rhs(r) = 1.0 - yp.sum();
  const VectorXd step = Eigen::CompleteOrthogonalDecomposition<MatrixXd>(a).solve(rhs);
  const VectorXd polished = yp + step;
  if ((polished.array() < 0.0).any()) return y;
  if ((a * polished - VectorXd::Unit(r + 1, r)).norm() >= (a * yp - VectorXd::Unit(r + 1, r)).norm()) {
    return y;
  }
  VectorXd out = VectorXd::Zero(y.size());
  for (int k = 0; k < p; ++k) out(support[k]) = polished(k);
  return out;
}

VectorXd WitnessFromCone(const VectorXd& sign, const VectorXd& y, const VectorXd& scale) {
  VectorXd x = sign.cwiseProduct(y).cwiseQuotient(scale);
  const double norm = x.lpNorm<1>();
  if (norm > 0.0) x /= norm;
  return x;
}

}  // namespace

ConsistencyVerdict CheckConsistency(const MatrixXcd& S, const MatrixXd& gains,
                                    const VectorXd& a_true,
                                    const ConsistencyOptions& options) {
  const int n = static_cast<int>(S.cols());
  Require(gains.cols() == n && a_true.size() == n, "instance dimensions differ");
  VectorXd scale;
  const MatrixXd stacked = StackedSystem(S, gains, scale);
  const VectorXd sign = SignPattern(a_true);
  ConsistencyVerdict verdict;

  if (options.method == ConsistencyMethod::kNullSpace) {
    verdict.method = "nullspace";
    Eigen::BDCSVD<MatrixXd> svd(stacked, Eigen::ComputeThinV);
    const VectorXd& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    int rank = 0;
    while (rank < sv.size() && sv(rank) > options.rank_tol * smax) ++rank;
    verdict.null_dim = n - rank;
    if (verdict.null_dim == 0) {
      // Injective system: ||M z||_1 >= sigma_min ||z||_2 >= sigma_min / sqrt(n).
      verdict.consistent = true;
      verdict.lp_residual = sv(n - 1) / std::sqrt(static_cast<double>(n));
      return verdict;
    }
    // z = diag(sign) y with y >= 0, 1^T y = 1 and z orthogonal to the row space.
    LinearProgram lp;
    lp.c = VectorXd::Zero(n);
    lp.a_eq.resize(rank + 1, n);
    lp.a_eq.topRows(rank) = svd.matrixV().leftCols(rank).transpose() * sign.asDiagonal();
    lp.a_eq.row(rank).setOnes();
    lp.b_eq = VectorXd::Zero(rank + 1);
    lp.b_eq(rank) = 1.0;
    SimplexOptions so;
    so.feasibility_only = true;
    so.feasibility_tolerance = options.threshold;
    const LpResult res = SolveLinearProgram(lp, so);
    if (res.status == LpStatus::kIterationLimit) {
      throw NumericalError("consistency LP did not converge");
    }
    verdict.lp_residual = res.infeasibility;
    verdict.consistent = res.status == LpStatus::kInfeasible;
    if (!verdict.consistent) verdict.witness = WitnessFromCone(sign, PolishCone(stacked, sign, res.x), scale);
    return verdict;
  }

  // Slack form: min sum_r w_r (e+_r + e-_r)  s.t.  M diag(sign) y - e+ + e- = 0,
  // 1^T y = 1, with w_r undoing the sqrt(2) row weights so that the objective
  // equals the l1 norm of [Re; Im] of the full residual.
  verdict.method = "slack";
  const int rows = static_cast<int>(stacked.rows());
  const int L = static_cast<int>(S.rows());
  VectorXd weight(rows);
  for (int r = 0; r < rows; ++r) weight(r) = (r % (L * L)) < L ? 1.0 : std::sqrt(2.0);
  LinearProgram lp;
  lp.c = VectorXd::Zero(n + 2 * rows);
  lp.c.segment(n, rows) = weight;
  lp.c.segment(n + rows, rows) = weight;
  lp.a_eq = MatrixXd::Zero(rows + 1, n + 2 * rows);
  lp.a_eq.topLeftCorner(rows, n) = stacked * sign.asDiagonal();
  lp.a_eq.block(0, n, rows, rows) = -MatrixXd::Identity(rows, rows);
  lp.a_eq.block(0, n + rows, rows, rows) = MatrixXd::Identity(rows, rows);
  lp.a_eq.block(rows, 0, 1, n).setOnes();
  lp.b_eq = VectorXd::Zero(rows + 1);
  lp.b_eq(rows) = 1.0;
  const LpResult res = SolveLinearProgram(lp);
  if (res.status != LpStatus::kOptimal) throw NumericalError("slack LP did not converge");
  verdict.lp_residual = res.objective;
  verdict.consistent = res.objective > options.threshold;
  if (!verdict.consistent) verdict.witness =
        WitnessFromCone(sign, PolishCone(stacked, sign, res.x.head(n)), scale);
  return verdict;
}

WitnessReport InspectWitness(const MatrixXcd& S, const MatrixXd& gains,
                             const VectorXd& a_true, const VectorXd& x) {
  WitnessReport report;
  const VectorXd sign = SignPattern(a_true);
  report.sign_ok = ((sign.array() * x.array()) >= 0.0).all() && x.lpNorm<1>() > 0.0;
  const KronMatrix kron = BuildKronMatrix(S);
  const double x1 = x.lpNorm<1>();
  for (int b = 0; b < gains.rows(); ++b) {
    const VectorXd gx = gains.row(b).transpose().cwiseProduct(x);
    const VectorXcd res = kron.full * gx.cast<Complex>();
    report.max_residual = std::max(report.max_residual, res.cwiseAbs().maxCoeff() / x1);
    const double g1 = gx.lpNorm<1>();
    if (g1 > 0.0) {
      report.max_sum_ratio = std::max(report.max_sum_ratio, std::abs(gx.sum()) / g1);
    }
  }
  return report;
}

std::vector<PhaseCell> PhaseDiagram(const PhaseConfig& config) {
  Require(!config.lengths.empty() && !config.actives.empty(), "phase grids are empty");
  Require(config.trials >= 1, "trials must be at least 1");
  std::vector<PhaseCell> cells;
  for (int L : config.lengths) {
    for (int K : config.actives) {
      Require(K >= 0 && K <= config.devices, "K must lie in [0, N]");
      cells.push_back({L, K, config.num_cells, config.seq_type, config.trials, 0});
    }
  }
  const int total = static_cast<int>(cells.size()) * config.trials;
  std::vector<char> success(total, 0);
  const Rng root(config.seed);
  ParallelFor(total, config.workers, [&](int job) {
    const PhaseCell& cell = cells[job / config.trials];
    const int trial = job % config.trials;
    InstanceConfig ic;
    ic.layout = config.layout;
    ic.num_cells = config.num_cells;
    ic.radius = config.radius;
    ic.devices_per_cell = {config.devices};
    ic.active_per_cell = {cell.active};
    ic.length = cell.length;
    ic.seq_type = config.seq_type;
    const std::uint64_t key = (static_cast<std::uint64_t>(cell.length) << 40) ^
                              (static_cast<std::uint64_t>(cell.active) << 20) ^
                              static_cast<std::uint64_t>(trial);
    const SystemInstance inst = GenerateInstance(ic, root.Split(key).seed());
    success[job] = CheckConsistency(inst.S, inst.gains, inst.a_true).consistent;
  });
  for (int job = 0; job < total; ++job) cells[job / config.trials].successes += success[job];
  return cells;
}

void WritePhaseCsv(const std::vector<PhaseCell>& cells, const std::string& path) {
  CsvWriter csv(path, {"L", "K", "B", "seq_type", "trials", "successes"});
  for (const auto& c : cells) {
    csv.Add(c.length).Add(c.active).Add(c.num_cells).Add(SequenceTypeName(c.seq_type))
        .Add(c.trials).Add(c.successes).EndRow();
  }
}

MatrixXd RealNullSpace(const KronMatrix& kron, double rank_tol) {
  const int n = static_cast<int>(kron.full.cols());
  MatrixXd stacked(2 * kron.full.rows(), n);
  stacked << kron.full.real(), kron.full.imag();
  Eigen::JacobiSVD<MatrixXd> svd(stacked, Eigen::ComputeFullV);
  const VectorXd& sv = svd.singularValues();
  const double smax = sv.size() ? sv(0) : 0.0;
  int rank = 0;
  while (rank < sv.size() && sv(rank) > rank_tol * smax) ++rank;
  return svd.matrixV().rightCols(n - rank);
}

namespace {

void ForEachSubset(int n, int max_size, const std::function<void(const std::vector<int>&)>& f) {
  std::vector<int> subset;
  std::function<void(int)> rec = [&](int start) {
    if (!subset.empty()) f(subset);
    if (static_cast<int>(subset.size()) == max_size) return;
    for (int i = start; i < n; ++i) {
      subset.push_back(i);
      rec(i + 1);
      subset.pop_back();
    }
  };
  rec(0);
}

}  // namespace

NspResult NspCheckSmall(const KronMatrix& kron, int s_order, double rho, double tol) {
  const int n = static_cast<int>(kron.full.cols());
  Require(n <= 16, "NSP check limited to at most 16 columns");
  Require(s_order >= 1 && s_order <= 4, "NSP order must lie in [1, 4]");
  Require(rho > 0.0, "rho must be positive");
  const MatrixXd Z = RealNullSpace(kron);
  NspResult result;
  result.null_dim = static_cast<int>(Z.cols());
  Require(result.null_dim <= 3, "null space too large for exhaustive NSP check");
  if (result.null_dim == 0) return result;
  const int r = result.null_dim;
  ForEachSubset(n, s_order, [&](const std::vector<int>& support) {
    std::vector<char> in_support(n, 0);
    for (int i : support) in_support[i] = 1;
    std::vector<int> rest;
    for (int i = 0; i < n; ++i) {
      if (!in_support[i]) rest.push_back(i);
    }
    const int k = static_cast<int>(support.size());
    const int m = static_cast<int>(rest.size());
    // Variables: w+ (r), w- (r), t (m).
    LinearProgram lp;
    lp.c = VectorXd::Zero(2 * r + m);
    lp.a_ub = MatrixXd::Zero(2 * r + 2 * m, 2 * r + m);
    lp.b_ub = VectorXd::Zero(2 * r + 2 * m);
    for (int j = 0; j < 2 * r; ++j) {
      lp.a_ub(j, j) = 1.0;
      lp.b_ub(j) = 1.0;
    }
    for (int t = 0; t < m; ++t) {
      const auto zi = Z.row(rest[t]);
      lp.a_ub.block(2 * r + 2 * t, 0, 1, r) = zi;
      lp.a_ub.block(2 * r + 2 * t, r, 1, r) = -zi;
      lp.a_ub(2 * r + 2 * t, 2 * r + t) = -1.0;
      lp.a_ub.block(2 * r + 2 * t + 1, 0, 1, r) = -zi;
      lp.a_ub.block(2 * r + 2 * t + 1, r, 1, r) = zi;
      lp.a_ub(2 * r + 2 * t + 1, 2 * r + t) = -1.0;
    }
    lp.c.tail(m).setConstant(rho);
    // w -> -w maps pattern to its negation, so fix the first sign.
    for (int pattern = 0; pattern < (1 << (k - 1)); ++pattern) {
      RowVectorXd gain = RowVectorXd::Zero(r);
      for (int q = 0; q < k; ++q) {
        const double sigma = (q > 0 && (pattern >> (q - 1)) & 1) ? -1.0 : 1.0;
        gain += sigma * Z.row(support[q]);
      }
      lp.c.head(r) = -gain.transpose();
      lp.c.segment(r, r) = gain.transpose();
      const LpResult res = SolveLinearProgram(lp);
      if (res.status != LpStatus::kOptimal) throw NumericalError("NSP LP failed");
      result.worst = std::max(result.worst, -res.objective);
    }
  });
  result.holds = result.worst <= tol;
  return result;
}

double InterferenceConstant(double gamma, double p0, double d0, double radius) {
  Require(gamma > 2.0, "interference bound needs gamma > 2");
  constexpr double kPi = 3.141592653589793;
  return std::pow(2.0, gamma + 3.0) * p0 * std::pow(d0 / radius, gamma) *
         (kPi / (2.0 * (gamma - 2.0)) + 2.0 * gamma / (gamma - 1.0) +
          std::pow(2.0, -gamma / 2.0));
}

InterferenceReport InterferenceBound(const CellLayout& layout, const DeviceIndex& index,
                                     double gamma, double p0, double d0,
                                     const std::vector<Point>& positions) {
  InterferenceReport report;
  report.bound = InterferenceConstant(gamma, p0, d0, layout.radius);
  Require(static_cast<int>(positions.size()) == index.num_devices(),
          "positions and device index disagree");
  for (int b = 0; b < layout.num_cells; ++b) {
    double total = 0.0;
    for (int j = 0; j < layout.num_cells; ++j) {
      if (j == b) continue;
      double best = 0.0;
      for (int n = 0; n < index.devices_in(j); ++n) {
        const double d = Distance(layout.bs_positions[b], positions[index.Offset(j) + n]);
        best = std::max(best, p0 * std::pow(d0 / d, gamma));
      }
      total += best;
    }
    report.lhs.push_back(total);
  }
  return report;
}

}  // namespace covdet
