// Command-line front end for instance generation, detection and the
// experiment drivers. Every subcommand writes CSV files plus run.toml (the
// resolved configuration) into the output directory.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "covdet/csv.h"
#include "covdet/error_analysis.h"
#include "covdet/experiments.h"
#include "covdet/metrics.h"
#include "covdet/mle_solvers.h"
#include "covdet/scaling_analysis.h"
#include "covdet/snapshot.h"
#include "covdet/system_model.h"
#include "covdet/toml_lite.h"

namespace {

using namespace covdet;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct GlobalFlags {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<int> workers;
};

struct SubcommandFlags {
  std::optional<int> trials;
  std::optional<int> antennas;
  std::optional<std::string> solver;
  std::string instance_dir;
  std::optional<int> samples;
  std::optional<int> realizations;
  std::vector<int> bound_cells{7, 19, 37};
  // phase
  std::optional<int> n;
  std::optional<int> b;
  std::vector<int> l_grid;
  std::vector<int> k_grid;
  std::optional<std::string> seq_type;
  std::string phase_out;
};

ExperimentConfig Resolve(const GlobalFlags& g, const SubcommandFlags& s) {
  ExperimentConfig c = g.preset.empty() ? ExperimentConfig{} : PresetConfig(g.preset);
  if (!g.config_path.empty()) c = ApplyToml(TomlDocument::Load(g.config_path), c);
  if (g.seed) c.seed = *g.seed;
  if (g.out_dir) c.out_dir = *g.out_dir;
  if (g.workers) c.workers = *g.workers;
  if (s.trials) c.trials = *s.trials;
  if (s.antennas) c.antennas = {*s.antennas};
  if (s.solver) c.solvers = {*s.solver};
  if (s.samples) c.error_samples = *s.samples;
  if (s.realizations) c.norm_realizations = *s.realizations;
  if (s.n) c.instance.devices_per_cell = {*s.n};
  if (s.b) c.instance.num_cells = *s.b;
  if (!s.l_grid.empty()) c.phase_lengths = s.l_grid;
  if (!s.k_grid.empty()) c.phase_actives = s.k_grid;
  if (s.seq_type) {
    c.seq_types = {ParseSequenceType(*s.seq_type)};
    c.instance.seq_type = c.seq_types.front();
  }
  c.Validate();
  return c;
}

void WriteRunToml(const ExperimentConfig& c, const std::string& command) {
  std::filesystem::create_directories(c.out_dir);
  TomlDocument doc = ConfigToToml(c);
  doc.Set("run.command", command);
#ifdef __VERSION__
  doc.Set("run.compiler", std::string(__VERSION__));
#endif
  doc.Set("run.hardware_threads", static_cast<int>(std::thread::hardware_concurrency()));
  doc.Set("run.timing", "solver execution only; instance generation and metrics excluded");
  doc.Save(c.out_dir + "/run.toml");
}

int CmdSimulate(const ExperimentConfig& c) {
  const auto scenarios = ExpandScenarios(c);
  for (const auto& sp : scenarios) {
    for (int t = 0; t < c.trials; ++t) {
      char name[64];
      std::snprintf(name, sizeof(name), "/instance_s%02d_t%04d", sp.index, t);
      const SystemInstance inst = GenerateInstance(sp.instance, TrialSeed(c.seed, t));
      SaveInstance(inst, c.out_dir + name);
    }
  }
  std::cout << "wrote " << scenarios.size() * c.trials << " instance(s) to " << c.out_dir << "\n";
  return kExitOk;
}

int CmdDetect(const ExperimentConfig& c, const std::string& instance_dir) {
  const SystemInstance inst = instance_dir.empty()
                                  ? GenerateInstance(ExpandScenarios(c).front().instance,
                                                     TrialSeed(c.seed, 0))
                                  : LoadInstance(instance_dir);
  const int m = c.antennas.front();
  const SampleCovariances covs =
      SimulateReceived(inst, m, Rng(inst.seed).Split(Stream::kChannels).Split(m));
  SolverConfig sc = c.SolverFor(c.solvers.front());
  sc.seed = Rng(inst.seed).Split(Stream::kSolver).seed();
  const Solution sol = Solve(MakeProblem(inst, covs), sc);
  WriteSolutionCsv(sol, c.out_dir + "/solution.csv");
  WriteTraceCsv(sol, c.out_dir + "/trace.csv");
  const PmPfCurve curve = ComputePmPfCurve(sol.a_hat, inst.a_true, c.Thresholds());
  WritePmPfCsv(curve, c.out_dir + "/pmpf.csv");
  const EqualError eep = EqualErrorFromCurve(curve);
  CsvWriter summary(c.out_dir + "/detect_summary.csv",
                    {"digest", "solver", "antennas", "sweeps", "coord_updates", "v_inf",
                     "converged", "objective", "eep", "eep_threshold", "wall_time_s"});
  summary.Add(InstanceDigest(inst)).Add(c.solvers.front()).Add(m).Add(sol.sweeps);
  summary.Add(sol.coord_updates_total).Add(sol.v_inf_trace.back()).Add(sol.converged ? 1 : 0);
  summary.Add(sol.final_objective).Add(eep.value).Add(eep.threshold).Add(sol.wall_time).EndRow();
  std::cout << c.solvers.front() << ": sweeps=" << sol.sweeps
            << " converged=" << (sol.converged ? "yes" : "no") << " eep=" << eep.value
            << " time=" << sol.wall_time << "s\n";
  return kExitOk;
}

int CmdPhase(const ExperimentConfig& c, const std::string& out) {
  PhaseConfig pc;
  pc.devices = c.instance.devices_per_cell.front();
  pc.num_cells = c.instance.num_cells;
  pc.lengths = c.phase_lengths;
  pc.actives = c.phase_actives;
  pc.trials = c.trials;
  pc.seq_type = c.seq_types.front();
  pc.layout = c.instance.layout;
  pc.radius = c.instance.radius;
  pc.seed = c.seed;
  pc.workers = c.workers;
  const auto cells = PhaseDiagram(pc);
  const std::string path = out.empty() ? c.out_dir + "/phase.csv" : out;
  WritePhaseCsv(cells, path);
  std::cout << "wrote " << cells.size() << " phase cells to " << path << "\n";
  return kExitOk;
}

int CmdErrorDist(const ExperimentConfig& c) {
  const auto results = RunErrorDistribution(c);
  WriteErrorDistribution(results, c.out_dir);
  for (const auto& r : results) {
    std::cout << "M=" << r.antennas << " ks_zero=" << r.ks_zero << " ks_one=" << r.ks_one
              << "\n";
  }
  return kExitOk;
}

int CmdMonteCarlo(const ExperimentConfig& c) {
  const MonteCarloResult result = RunMonteCarlo(c);
  WriteMonteCarlo(result, c.out_dir);
  for (const auto& g : result.groups) {
    std::cout << "scenario " << g.scenario << " M=" << g.antennas << " " << g.solver
              << ": eep=" << g.eep_mean << " +- " << g.eep_stderr << " (" << g.trials_used
              << " trials, " << g.failures << " failed)\n";
  }
  return kExitOk;
}

int CmdBench(const ExperimentConfig& c) {
  const BenchResult result = BenchmarkSolvers(c);
  WriteBenchmark(result, c.out_dir);
  std::cout << "wrote " << result.runs.size() << " solver runs to " << c.out_dir << "\n";
  return kExitOk;
}

int CmdCheckBound(const ExperimentConfig& c, const std::vector<int>& cells) {
  const auto rows = RunBoundCheck(c, cells);
  WriteBoundCheck(rows, c.out_dir + "/bound.csv");
  int violations = 0;
  for (const auto& r : rows) violations += r.lhs > r.bound;
  std::cout << rows.size() << " base-station checks, " << violations << " above the bound\n";
  return kExitOk;
}

int CmdNormExp(const ExperimentConfig& c) {
  const SystemInstance inst =
      GenerateInstance(ExpandScenarios(c).front().instance, TrialSeed(c.seed, 0));
  SolverConfig sc = c.SolverFor(c.solvers.front());
  sc.seed = Rng(c.seed).Split(Stream::kSolver).seed();
  const auto rows = NormRescaleExperiment(inst, c.antennas.front(), c.norm_factors,
                                          c.norm_realizations, sc,
                                          Rng(c.seed).Split(Stream::kChannels), c.workers);
  WriteNormRescale(rows, c.out_dir);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Device activity detection by covariance-based maximum likelihood"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  SubcommandFlags s;
  app.add_option("--config", g.config_path, "TOML run configuration")->check(CLI::ExistingFile);
  app.add_option("--preset", g.preset, "Registered preset")
      ->check(CLI::IsMember(PresetNames()));
  app.add_option("--seed", g.seed, "Root seed");
  app.add_option("--out-dir", g.out_dir, "Output directory");
  app.add_option("--workers", g.workers, "Worker threads (0 = all cores)");

  auto* simulate = app.add_subcommand("simulate", "Write instance fixtures");
  simulate->add_option("--trials", s.trials, "Number of instances");

  auto* detect = app.add_subcommand("detect", "Run one solver on one instance");
  detect->add_option("--instance", s.instance_dir, "Fixture directory from `simulate`")
      ->check(CLI::ExistingDirectory);
  detect->add_option("--solver", s.solver, "cd, icd, as-cd or as-icd");
  detect->add_option("--antennas", s.antennas, "Number of BS antennas");

  auto* phase = app.add_subcommand("phase", "Consistency phase diagram");
  phase->add_option("--n", s.n, "Devices per cell");
  phase->add_option("--b", s.b, "Number of cells");
  phase->add_option("--l-grid", s.l_grid, "Sequence lengths")->delimiter(',');
  phase->add_option("--k-grid", s.k_grid, "Active devices per cell")->delimiter(',');
  phase->add_option("--trials", s.trials, "Trials per (L, K) cell");
  phase->add_option("--seq-type", s.seq_type, "I, II or III");
  phase->add_option("--out", s.phase_out, "Output CSV path");

  auto* errordist = app.add_subcommand("errordist", "Predicted vs empirical estimation error");
  errordist->add_option("--trials", s.trials, "Solver trials");
  errordist->add_option("--samples", s.samples, "Predicted samples");

  auto* mc = app.add_subcommand("mc", "Monte-Carlo detection performance");
  mc->add_option("--trials", s.trials, "Trials");

  auto* bench = app.add_subcommand("bench", "Solver timing and error trajectories");
  bench->add_option("--trials", s.trials, "Trials per scenario");

  auto* bound = app.add_subcommand("check-bound", "Check inter-cell interference bound");
  bound->add_option("--trials", s.trials, "Placements per layout");
  bound->add_option("--cells", s.bound_cells, "Cell counts")->delimiter(',');

  auto* norm = app.add_subcommand("norm-exp", "Sequence rescaling experiment");
  norm->add_option("--realizations", s.realizations, "Channel and noise realizations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const ExperimentConfig c = Resolve(g, s);
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    WriteRunToml(c, name);
    if (name == "simulate") return CmdSimulate(c);
    if (name == "detect") return CmdDetect(c, s.instance_dir);
    if (name == "phase") return CmdPhase(c, s.phase_out);
    if (name == "errordist") return CmdErrorDist(c);
    if (name == "mc") return CmdMonteCarlo(c);
    if (name == "bench") return CmdBench(c);
    if (name == "check-bound") return CmdCheckBound(c, s.bound_cells);
    if (name == "norm-exp") return CmdNormExp(c);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
