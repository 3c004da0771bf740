#include "covdet/mle_solvers.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "covdet/csv.h"
#include "covdet/polynomial.h"
#include "covdet/rng.h"

namespace covdet {

void SolverConfig::Validate() const {
  Require(epsilon > 0.0, "epsilon must be positive");
  Require(beta > 1.0, "beta must exceed 1");
  Require(mu0_floor > 0.0, "mu0_floor must be positive");
  Require(omega_decay > 1.0, "omega_decay must exceed 1");
  Require(max_sweeps >= 1, "max_sweeps must be at least 1");
}

std::string SolverName(const SolverConfig& config) {
  std::string name = config.mode == SubproblemMode::kExact ? "cd" : "icd";
  return config.active_set ? "as-" + name : name;
}

SolverConfig SolverFromName(const std::string& name) {
  SolverConfig config;
  std::string base = name;
  if (base.rfind("as-", 0) == 0) {
    config.active_set = true;
    base = base.substr(3);
  }
  if (base == "cd") {
    config.mode = SubproblemMode::kExact;
  } else if (base == "icd") {
    config.mode = SubproblemMode::kInexact;
  } else {
    throw ConfigError("unknown solver: " + name);
  }
  return config;
}

namespace {

// (log(1 + x) - x) / x^2 without cancellation near 0.
double LogRemainder(double x) {
  if (std::abs(x) < 1e-3) {
    return -0.5 + x * (1.0 / 3.0 + x * (-0.25 + x * (0.2 - x / 6.0)));
  }
  return (std::log1p(x) - x) / (x * x);
}

// log(1 + d xi) - d zeta / (1 + d xi) written as
// x^2 (LogRemainder(x) + 1 / (1 + x)) + d (xi - zeta) / (1 + x), x = d xi, so
// that steps far below the scale of xi still compare correctly.
double CellPhi(double xi, double zeta, double d) {
  const double x = d * xi;
  return x * x * (LogRemainder(x) + 1.0 / (1.0 + x)) + d * (xi - zeta) / (1.0 + x);
}

}  // namespace

double SubproblemObjective(const CoordCoeffs& coeffs, double d) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < coeffs.xi.size(); ++j) {
    total += CellPhi(coeffs.xi(j), coeffs.zeta(j), d);
  }
  return total;
}

double SubproblemDerivative(const CoordCoeffs& coeffs, double d) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < coeffs.xi.size(); ++j) {
    const double u = 1.0 + d * coeffs.xi(j);
    total += (coeffs.xi(j) * u - coeffs.zeta(j)) / (u * u);
  }
  return total;
}

namespace {

double SubproblemSecondDerivative(const CoordCoeffs& coeffs, double d) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < coeffs.xi.size(); ++j) {
    const double xi = coeffs.xi(j);
    const double u = 1.0 + d * xi;
    total += xi * (2.0 * coeffs.zeta(j) - xi * u) / (u * u * u);
  }
  return total;
}

// Newton iterations on phi' restricted to [lo, hi]; returns the start point
// when Newton does not improve |phi'|.
double PolishRoot(const CoordCoeffs& coeffs, double d, double lo, double hi) {
  double best = std::clamp(d, lo, hi);
  double best_abs = std::abs(SubproblemDerivative(coeffs, best));
  double x = best;
  for (int it = 0; it < 8 && best_abs > 0.0; ++it) {
    const double h = SubproblemSecondDerivative(coeffs, x);
    if (h == 0.0 || !std::isfinite(h)) break;
    x -= SubproblemDerivative(coeffs, x) / h;
    if (!(x >= lo && x <= hi)) break;
    const double value = std::abs(SubproblemDerivative(coeffs, x));
    if (!(value < best_abs)) break;
    best = x;
    best_abs = value;
  }
  return best;
}

// Minimizes f over candidate points; near-ties go to the smallest |d|.
template <typename F>
double PickCandidate(const std::vector<double>& candidates, F&& f) {
  std::vector<double> values(candidates.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    values[k] = f(candidates[k]);
    if (values[k] < best) best = values[k];
  }
  // Relative ties only: the decrease from a useful step can be far smaller
  // than 1 when xi is large.
  double chosen = 0.0;
  double chosen_abs = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double tol = 1e-12 * (std::abs(values[k]) + std::abs(best));
    if (values[k] <= best + tol && std::abs(candidates[k]) < chosen_abs) {
      chosen = candidates[k];
      chosen_abs = std::abs(candidates[k]);
    }
  }
  return chosen;
}

// True when phi'(0) is indistinguishable from rounding in xi and zeta.
bool FlatAtZero(const CoordCoeffs& coeffs) {
  const double scale = coeffs.xi.cwiseAbs().sum() + coeffs.zeta.cwiseAbs().sum();
  return std::abs((coeffs.xi - coeffs.zeta).sum()) <= 1e-14 * scale;
}

}  // namespace

std::vector<double> SubproblemPolynomial(const CoordCoeffs& coeffs) {
  const int B = static_cast<int>(coeffs.xi.size());
  std::vector<int> cells;
  for (int j = 0; j < B; ++j) {
    if (coeffs.xi(j) != 0.0 || coeffs.zeta(j) != 0.0) cells.push_back(j);
  }
  const int n = static_cast<int>(cells.size());
  if (n == 0) return {0.0};
  std::vector<std::vector<double>> squares(n);
  for (int t = 0; t < n; ++t) {
    const double xi = coeffs.xi(cells[t]);
    squares[t] = {1.0, 2.0 * xi, xi * xi};
  }
  // prefix[t] = prod_{k<t} squares[k], suffix[t] = prod_{k>=t} squares[k].
  std::vector<std::vector<double>> prefix(n + 1), suffix(n + 1);
  prefix[0] = {1.0};
  suffix[n] = {1.0};
  for (int t = 0; t < n; ++t) prefix[t + 1] = PolyMultiply(prefix[t], squares[t]);
  for (int t = n - 1; t >= 0; --t) suffix[t] = PolyMultiply(suffix[t + 1], squares[t]);
  std::vector<double> total(2 * n, 0.0);
  for (int t = 0; t < n; ++t) {
    const double xi = coeffs.xi(cells[t]);
    const std::vector<double> linear = {xi - coeffs.zeta(cells[t]), xi * xi};
    const auto term = PolyMultiply(linear, PolyMultiply(prefix[t], suffix[t + 1]));
    for (std::size_t k = 0; k < term.size(); ++k) total[k] += term[k];
  }
  return total;
}

double SolveSubproblemExact(const CoordCoeffs& coeffs, double a_i) {
  const double lo = -a_i;
  const double hi = 1.0 - a_i;
  if (FlatAtZero(coeffs)) return 0.0;
  std::vector<double> candidates = {lo, hi, 0.0};
  const std::vector<double> poly = SubproblemPolynomial(coeffs);
  for (const Complex& root : PolyRoots(poly)) {
    const double re = root.real();
    const double im = std::abs(root.imag());
    const double span = 1.0 + std::abs(re);
    if (im < 1e-8 * span) {
      if (re >= lo && re <= hi) candidates.push_back(PolishRoot(coeffs, re, lo, hi));
    } else if (im < 1e-4 * span && re >= lo - 1e-4 && re <= hi + 1e-4) {
      // Ill-conditioned real roots can surface as a tight complex pair.
      candidates.push_back(PolishRoot(coeffs, re, lo, hi));
    }
  }
  return PickCandidate(candidates,
                       [&](double d) { return SubproblemObjective(coeffs, d); });
}

double SurrogateObjective(const CoordCoeffs& coeffs, int own_cell, double mu, double d) {
  const double xi = coeffs.xi(own_cell);
  const double zeta = coeffs.zeta(own_cell);
  double c = (coeffs.xi - coeffs.zeta).sum() - (xi - zeta);
  return CellPhi(xi, zeta, d) + c * d + 0.5 * mu * d * d;
}

bool SufficientDecrease(const CoordCoeffs& coeffs, int own_cell, double mu, double d) {
  if (d == 0.0) return true;
  // Both sides are O(d^2); compare them after dividing by d^2.
  double lhs = 0.0;
  double magnitude = 0.0;
  for (Eigen::Index j = 0; j < coeffs.xi.size(); ++j) {
    if (j == own_cell) continue;
    const double xi = coeffs.xi(j);
    const double x = d * xi;
    const double t1 = xi * xi * LogRemainder(x);
    const double t2 = coeffs.zeta(j) * xi / (1.0 + x);
    lhs += t1 + t2;
    magnitude += std::abs(t1) + std::abs(t2);
  }
  return lhs <= 0.5 * mu + 1e-12 * magnitude;
}

double InitMu(const CoordCoeffs& coeffs, int own_cell, double mu0_floor) {
  double mu = 0.0;
  for (Eigen::Index j = 0; j < coeffs.xi.size(); ++j) {
    if (j == own_cell) continue;
    mu += coeffs.xi(j) * (2.0 * coeffs.zeta(j) - coeffs.xi(j));
  }
  return mu > 0.0 ? mu : mu0_floor;
}

InexactStep SolveSubproblemInexact(const CoordCoeffs& coeffs, int own_cell,
                                   double a_i, const SolverConfig& config) {
  const double lo = -a_i;
  const double hi = 1.0 - a_i;
  const double xi = coeffs.xi(own_cell);
  const double zeta = coeffs.zeta(own_cell);
  const double c = (coeffs.xi - coeffs.zeta).sum() - (xi - zeta);
  const double mu0 = InitMu(coeffs, own_cell, config.mu0_floor);
  constexpr double kMaxGrowth = 1e12;
  InexactStep step;
  step.mu = mu0;
  if (FlatAtZero(coeffs)) return step;
  for (;;) {
    const double mu = step.mu;
    std::vector<double> candidates = {lo, hi, 0.0};
    for (double r : CubicRealRoots(xi * xi * mu, xi * xi * c + 2.0 * xi * mu,
                                   mu + 2.0 * xi * c + xi * xi, c + xi - zeta)) {
      if (r >= lo && r <= hi) candidates.push_back(r);
    }
    step.d = PickCandidate(candidates, [&](double d) {
      return SurrogateObjective(coeffs, own_cell, mu, d);
    });
    if (SufficientDecrease(coeffs, own_cell, mu, step.d)) return step;
    step.mu *= config.beta;
    ++step.backtracks;
    if (step.mu > kMaxGrowth * mu0) {
      throw NumericalError("sufficient decrease not reached; gradient is inconsistent");
    }
  }
}

double SolveSubproblemInexact(const SolverState& state, int i,
                              const SolverConfig& config) {
  return SolveSubproblemInexact(CoordCoefficients(state, i),
                                state.problem().cell_of[i], state.a()(i), config)
      .d;
}

std::vector<int> SelectActiveSet(const VectorXd& violation, double omega) {
  Require(omega >= 0.0, "omega must be nonnegative");
  std::vector<int> active;
  for (Eigen::Index i = 0; i < violation.size(); ++i) {
    if (violation(i) >= omega) active.push_back(static_cast<int>(i));
  }
  return active;
}

double OmegaSchedule(int k, double v_inf, double epsilon, double decay) {
  Require(k >= 0, "iteration index must be nonnegative");
  return std::max(std::pow(decay, -static_cast<double>(k) - 1.0) * v_inf, epsilon);
}

namespace {

using Clock = std::chrono::steady_clock;

// Tracks solver time, excluding bookkeeping that the caller pauses for.
class Stopwatch {
 public:
  Stopwatch() : start_(Clock::now()) {}
  double Elapsed() const {
    return std::chrono::duration<double>(Clock::now() - start_).count() - paused_;
  }
  template <typename F>
  void Paused(F&& f) {
    const auto t0 = Clock::now();
    f();
    paused_ += std::chrono::duration<double>(Clock::now() - t0).count();
  }

 private:
  Clock::time_point start_;
  double paused_ = 0.0;
};

class CoordinateUpdater {
 public:
  CoordinateUpdater(SolverState& state, const SolverConfig& config)
      : state_(state), config_(config) {}

  // Returns true when the coordinate moved.
  bool Update(int i) {
    const CoordWork work = ComputeCoordWork(state_, i);
    const double a_i = state_.a()(i);
    double d = 0.0;
    if (config_.mode == SubproblemMode::kExact) {
      d = SolveSubproblemExact(work.coeffs, a_i);
    } else {
      d = SolveSubproblemInexact(work.coeffs, state_.problem().cell_of[i], a_i, config_).d;
    }
    if (d == 0.0) return false;
    state_.ApplyUpdate(i, d, &work);
    return true;
  }

 private:
  SolverState& state_;
  const SolverConfig& config_;
};

void Record(Solution& sol, SolverState& state, const SolverConfig& config,
            Stopwatch& watch, double v_inf, long long updates, int active_size) {
  sol.v_inf_trace.push_back(v_inf);
  sol.coord_updates_per_sweep.push_back(updates);
  sol.active_set_sizes.push_back(active_size);
  sol.elapsed_trace.push_back(watch.Elapsed());
  if (config.record_objective) {
    watch.Paused([&] { sol.objective_trace.push_back(Objective(state)); });
  }
}

void Finish(Solution& sol, SolverState& state, Stopwatch& watch) {
  sol.wall_time = watch.Elapsed();
  sol.a_hat = state.a();
  sol.final_objective = sol.objective_trace.empty() ? Objective(state)
                                                    : sol.objective_trace.back();
}

}  // namespace

Solution RunCd(SolverState& state, const SolverConfig& config,
               const ProgressCallback& progress) {
  config.Validate();
  Stopwatch watch;
  Rng rng = Rng(config.seed).Split(Stream::kSolver);
  CoordinateUpdater updater(state, config);
  Solution sol;
  state.Refresh();
  Record(sol, state, config, watch, OptimalityViolation(state).lpNorm<Eigen::Infinity>(),
         0, 0);
  const int n = state.problem().num_devices();
  while (sol.sweeps < config.max_sweeps) {
    long long updates = 0;
    for (int i : rng.Permutation(n)) {
      if (updater.Update(i)) ++sol.nonzero_steps;
      ++updates;
      if (progress) watch.Paused([&] { progress(watch.Elapsed(), state.a()); });
    }
    state.Refresh();
    ++sol.sweeps;
    sol.coord_updates_total += updates;
    const double v_inf = OptimalityViolation(state).lpNorm<Eigen::Infinity>();
    Record(sol, state, config, watch, v_inf, updates, n);
    if (v_inf <= config.epsilon) {
      sol.converged = true;
      break;
    }
  }
  Finish(sol, state, watch);
  return sol;
}

Solution RunActiveSetCd(SolverState& state, const SolverConfig& config,
                        const ProgressCallback& progress) {
  config.Validate();
  Stopwatch watch;
  Rng rng = Rng(config.seed).Split(Stream::kSolver);
  CoordinateUpdater updater(state, config);
  Solution sol;
  state.Refresh();
  VectorXd violation = OptimalityViolation(state);
  double v_inf = violation.lpNorm<Eigen::Infinity>();
  Record(sol, state, config, watch, v_inf, 0, 0);
  for (int k = 0;; ++k) {
    if (v_inf <= config.epsilon) {
      sol.converged = true;
      break;
    }
    if (sol.sweeps >= config.max_sweeps) break;
    const double omega = OmegaSchedule(k, v_inf, config.epsilon, config.omega_decay);
    std::vector<int> active = SelectActiveSet(violation, omega);
    std::shuffle(active.begin(), active.end(), rng.engine());
    for (int i : active) {
      if (updater.Update(i)) ++sol.nonzero_steps;
      if (progress) watch.Paused([&] { progress(watch.Elapsed(), state.a()); });
    }
    state.Refresh();
    ++sol.sweeps;
    sol.coord_updates_total += static_cast<long long>(active.size());
    violation = OptimalityViolation(state);
    v_inf = violation.lpNorm<Eigen::Infinity>();
    Record(sol, state, config, watch, v_inf, static_cast<long long>(active.size()),
           static_cast<int>(active.size()));
  }
  Finish(sol, state, watch);
  return sol;
}

Solution Solve(const DetectionProblem& problem, const SolverConfig& config,
               const ProgressCallback& progress) {
  SolverState state(problem);
  return config.active_set ? RunActiveSetCd(state, config, progress)
                           : RunCd(state, config, progress);
}

VectorXd ThresholdEstimate(const VectorXd& a_hat, double ell_th) {
  Require(ell_th > 0.0 && ell_th < 1.0, "threshold must lie in (0, 1)");
  return (a_hat.array() >= ell_th).cast<double>();
}

void WriteSolutionCsv(const Solution& solution, const std::string& path) {
  CsvWriter csv(path, {"index", "a_hat"});
  for (Eigen::Index i = 0; i < solution.a_hat.size(); ++i) {
    csv.Add(static_cast<long long>(i)).Add(solution.a_hat(i)).EndRow();
  }
}

void WriteTraceCsv(const Solution& solution, const std::string& path) {
  CsvWriter csv(path, {"sweep", "objective", "v_inf", "active_set_size",
                       "cumulative_updates", "elapsed_s"});
  long long cumulative = 0;
  for (std::size_t k = 0; k < solution.v_inf_trace.size(); ++k) {
    cumulative += solution.coord_updates_per_sweep[k];
    csv.Add(static_cast<long long>(k))
        .Add(k < solution.objective_trace.size() ? solution.objective_trace[k]
                                                 : std::nan(""))
        .Add(solution.v_inf_trace[k])
        .Add(solution.active_set_sizes[k])
        .Add(cumulative)
        .Add(solution.elapsed_trace[k])
        .EndRow();
  }
}

}  // namespace covdet
