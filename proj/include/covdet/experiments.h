#ifndef COVDET_EXPERIMENTS_H_
#define COVDET_EXPERIMENTS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "covdet/common.h"
#include "covdet/error_analysis.h"
#include "covdet/metrics.h"
#include "covdet/mle_solvers.h"
#include "covdet/system_model.h"
#include "covdet/toml_lite.h"

namespace covdet {

struct ExperimentConfig {
  std::string scenario = "custom";
  std::uint64_t seed = 0;
  int trials = 10;
  int workers = 1;
  std::string out_dir = "out";

  InstanceConfig instance;
  std::vector<int> antennas{64};
  std::vector<SequenceType> seq_types{SequenceType::kQpsk};

  // Optional outer sweeps for mc and bench; empty means "use the instance
  // value". Device sweeps keep the active count of the instance.
  std::vector<int> sweep_cells;
  std::vector<int> sweep_devices;
  std::vector<int> sweep_lengths;

  std::vector<std::string> solvers{"cd"};
  SolverConfig solver;  // tolerances shared by every named solver

  double threshold_low = 1e-4;
  int threshold_points = 400;

  std::vector<int> phase_lengths{6, 8, 10, 12, 14};
  std::vector<int> phase_actives{0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50};

  int error_samples = 10000;

  double checkpoint_start_s = 1e-3;
  double checkpoint_factor = 1.5;
  bool bench_single_worker = true;

  std::vector<double> norm_factors{0.5, 1.0, 2.0};
  int norm_realizations = 20;

  double bound_gamma = 3.76;
  double bound_p0_db = -128.1;
  double bound_d0_m = 1000.0;

  std::vector<double> Thresholds() const;
  // Solver settings for a registered name, carrying the shared tolerances.
  SolverConfig SolverFor(const std::string& name) const;
  void Validate() const;
};

// Registered desk-scale presets, named after the figure or table they mirror.
std::vector<std::string> PresetNames();
ExperimentConfig PresetConfig(const std::string& name);

// Overrides the fields present in `doc`. Keys under [run] are metadata and
// ignored; any other unknown key is a ConfigError.
ExperimentConfig ApplyToml(const TomlDocument& doc, ExperimentConfig base);
TomlDocument ConfigToToml(const ExperimentConfig& config);

// Seed of trial t; every experiment derives its randomness from it.
std::uint64_t TrialSeed(std::uint64_t seed, int trial);

// One point of the (seq_type x cells x devices x length) sweep.
struct ScenarioPoint {
  int index = 0;
  InstanceConfig instance;
};

std::vector<ScenarioPoint> ExpandScenarios(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Monte Carlo

struct SolverRun {
  int scenario = 0;
  int antennas = 0;
  std::string solver;
  VectorXd a_hat;
  double wall_time = 0.0;
  int sweeps = 0;
  long long coord_updates = 0;
  double v_inf = 0.0;
  bool converged = false;
  PmPfCurve curve;
  EqualError eep;
  bool failed = false;
  std::string error;
};

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> digests;  // per scenario point
  std::vector<VectorXd> a_true;      // per scenario point
  std::vector<SolverRun> runs;       // scenario-major, then antennas, then solver
};

struct AggregateGroup {
  int scenario = 0;
  int antennas = 0;
  std::string solver;
  int trials_used = 0;
  int failures = 0;
  std::vector<double> pm_mean;  // per threshold, NaN trials skipped
  std::vector<double> pf_mean;
  double eep_mean = 0.0;
  double eep_stderr = 0.0;
  EqualError eep_of_mean_curve;
  double converged_fraction = 0.0;
  double sweeps_mean = 0.0;
  double time_mean = 0.0;
  double time_q50 = 0.0;
  double time_q90 = 0.0;
};

struct MonteCarloResult {
  std::vector<ScenarioPoint> scenarios;
  std::vector<double> thresholds;
  std::vector<TrialRecord> records;
  std::vector<AggregateGroup> groups;
};

MonteCarloResult RunMonteCarlo(const ExperimentConfig& config);

// Aggregates computed from records alone (the fold used by RunMonteCarlo).
std::vector<AggregateGroup> AggregateRecords(const std::vector<TrialRecord>& records,
                                             const std::vector<double>& thresholds);

// Files: scenarios.csv, trials.csv, pmpf_trials.csv, estimates.csv,
// aggregate_pmpf.csv, summary.csv (all deterministic) and timing.csv,
// timing_summary.csv (wall-clock).
void WriteMonteCarlo(const MonteCarloResult& result, const std::string& dir);

// ---------------------------------------------------------------------------
// Benchmark

struct Checkpoint {
  double elapsed = 0.0;
  long long updates = 0;
  double eep = 0.0;
};

struct BenchRun {
  int scenario = 0;
  int trial = 0;
  std::string solver;
  std::vector<Checkpoint> trajectory;  // last entry is the final iterate
  std::vector<int> active_set_sizes;
  std::vector<long long> updates_per_iteration;
  long long coord_updates_total = 0;
  int sweeps = 0;
  double wall_time = 0.0;
  bool converged = false;
  double final_eep = 0.0;
};

struct BenchResult {
  std::vector<ScenarioPoint> scenarios;
  std::vector<BenchRun> runs;  // scenario-major, then trial, then solver
};

// Runs every solver on `trials` instances per scenario at antennas[0],
// snapshotting a at geometric wall-clock checkpoints.
BenchResult BenchmarkSolvers(const ExperimentConfig& config);

// Files: bench_trajectory.csv, bench_summary.csv, bench_active_sets.csv.
void WriteBenchmark(const BenchResult& result, const std::string& dir);

// ---------------------------------------------------------------------------
// Predicted vs empirical error distribution

struct ErrorDistResult {
  int antennas = 0;
  std::string digest;
  VectorXd a_true;
  PredictedErrors predicted;
  std::vector<double> empirical_zero;
  std::vector<double> empirical_one;
  PmPfCurve empirical_curve;
  double ks_zero = 0.0;
  double ks_one = 0.0;
  int solver_failures = 0;
};

// One instance (trial 0 of the first scenario), `trials` channel and noise
// draws solved with solvers[0], against error_samples predicted draws.
std::vector<ErrorDistResult> RunErrorDistribution(const ExperimentConfig& config);

void WriteErrorDistribution(const std::vector<ErrorDistResult>& results,
                            const std::string& dir);

// ---------------------------------------------------------------------------
// Sequence rescaling

struct NormRescaleRow {
  int realization = 0;
  int device = 0;
  bool active = false;
  double factor = 1.0;
  double a_hat = 0.0;
};

// For each realization, fixes the channel and noise draw, picks the inactive
// device with the largest baseline estimate and one random active device,
// rescales each one's sequence by every factor and re-solves.
std::vector<NormRescaleRow> NormRescaleExperiment(const SystemInstance& instance,
                                                  int antennas,
                                                  const std::vector<double>& factors,
                                                  int realizations,
                                                  const SolverConfig& solver,
                                                  const Rng& rng, int workers = 1);

// Mean estimate at `factor` over mean estimate at factor 1, per device kind.
double NormRescaleRatio(const std::vector<NormRescaleRow>& rows, bool active, double factor);

void WriteNormRescale(const std::vector<NormRescaleRow>& rows, const std::string& dir);

// ---------------------------------------------------------------------------
// Interference bound

struct BoundRow {
  int cells = 0;
  int trial = 0;
  int bs = 0;
  double lhs = 0.0;
  double bound = 0.0;
};

// Random placements on the configured layout for every cell count, one per
// trial seed, checked against the closed-form constant.
std::vector<BoundRow> RunBoundCheck(const ExperimentConfig& config,
                                    const std::vector<int>& cell_counts);

void WriteBoundCheck(const std::vector<BoundRow>& rows, const std::string& path);

}  // namespace covdet

#endif  // COVDET_EXPERIMENTS_H_
