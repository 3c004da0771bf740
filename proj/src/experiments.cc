#include "covdet/experiments.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <set>

#include "covdet/csv.h"
#include "covdet/parallel.h"
#include "covdet/rng.h"
#include "covdet/scaling_analysis.h"
#include "covdet/snapshot.h"

namespace covdet {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Rng ChannelRng(std::uint64_t trial_seed, int antennas) {
  return Rng(trial_seed).Split(Stream::kChannels).Split(static_cast<std::uint64_t>(antennas));
}

double Quantile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - lo) * (v[hi] - v[lo]);
}

// ---- TOML helpers -------------------------------------------------------

std::vector<int> IntList(const TomlValue& v) {
  std::vector<int> out;
  if (v.is_array()) {
    for (const auto& x : v.AsArray()) out.push_back(static_cast<int>(x.AsInt()));
  } else {
    out.push_back(static_cast<int>(v.AsInt()));
  }
  return out;
}

std::vector<double> DoubleList(const TomlValue& v) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& x : v.AsArray()) out.push_back(x.AsDouble());
  } else {
    out.push_back(v.AsDouble());
  }
  return out;
}

std::vector<std::string> StringList(const TomlValue& v) {
  std::vector<std::string> out;
  if (v.is_array()) {
    for (const auto& x : v.AsArray()) out.push_back(x.AsString());
  } else {
    out.push_back(v.AsString());
  }
  return out;
}

TomlValue ToToml(const std::vector<int>& v) {
  TomlValue::Array out(v.begin(), v.end());
  return TomlValue(std::move(out));
}

TomlValue ToToml(const std::vector<double>& v) {
  TomlValue::Array out(v.begin(), v.end());
  return TomlValue(std::move(out));
}

TomlValue ToToml(const std::vector<std::string>& v) {
  TomlValue::Array out(v.begin(), v.end());
  return TomlValue(std::move(out));
}

int ToInt(const TomlValue& v) { return static_cast<int>(v.AsInt()); }

// Free text in a cell: the reader does not handle quoting.
std::string CsvSafe(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '"' || c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

}  // namespace

// ---- Config ---------------------------------------------------------------

std::vector<double> ExperimentConfig::Thresholds() const {
  return ThresholdGrid(threshold_low, threshold_points);
}

SolverConfig ExperimentConfig::SolverFor(const std::string& name) const {
  SolverConfig named = SolverFromName(name);
  SolverConfig out = solver;
  out.mode = named.mode;
  out.active_set = named.active_set;
  return out;
}

void ExperimentConfig::Validate() const {
  Require(trials >= 1, "trials must be at least 1");
  Require(workers >= 0, "workers must be non-negative (0 = all cores)");
  Require(instance.num_cells >= 1, "cells must be at least 1");
  Require(instance.radius > 0.0, "radius must be positive");
  Require(instance.length >= 1, "sequence length must be at least 1");
  for (int n : instance.devices_per_cell) Require(n >= 1, "devices per cell must be positive");
  for (int k : instance.active_per_cell) Require(k >= 0, "active counts must be non-negative");
  Require(!antennas.empty(), "at least one antenna count is required");
  for (int m : antennas) Require(m >= 1, "antenna counts must be positive");
  Require(!seq_types.empty(), "at least one sequence type is required");
  for (int b : sweep_cells) Require(b >= 1, "swept cell counts must be positive");
  for (int n : sweep_devices) Require(n >= 1, "swept device counts must be positive");
  for (int l : sweep_lengths) Require(l >= 1, "swept lengths must be positive");
  Require(!solvers.empty(), "at least one solver is required");
  for (const auto& name : solvers) SolverFromName(name);
  solver.Validate();
  ThresholdGrid(threshold_low, threshold_points);
  for (int l : phase_lengths) Require(l >= 1, "phase lengths must be positive");
  for (int k : phase_actives) Require(k >= 0, "phase active counts must be non-negative");
  Require(error_samples >= 1, "error samples must be at least 1");
  Require(checkpoint_start_s > 0.0, "checkpoint start must be positive");
  Require(checkpoint_factor > 1.0, "checkpoint factor must exceed 1");
  for (double f : norm_factors) Require(f > 0.0, "scale factors must be positive");
  Require(norm_realizations >= 1, "norm realizations must be at least 1");
  Require(bound_gamma > 2.0, "path-loss exponent must exceed 2");
  Require(bound_d0_m > 0.0, "reference distance must be positive");
  const int cells = instance.num_cells;
  const auto n = PerCell(instance.devices_per_cell, cells);
  const auto k = PerCell(instance.active_per_cell, cells);
  for (int b = 0; b < cells; ++b) Require(k[b] <= n[b], "more active devices than devices");
}

std::vector<std::string> PresetNames() {
  return {"fig1", "fig2",  "fig3",  "fig4",  "fig5", "fig6", "fig7a", "fig7b",
          "fig7c", "fig8a", "fig8b", "fig8c", "fig9", "fig10", "fig11", "table3"};
}

ExperimentConfig PresetConfig(const std::string& name) {
  ExperimentConfig c;
  c.scenario = name;
  c.out_dir = "out/" + name;
  c.workers = 0;
  InstanceConfig& ic = c.instance;
  // Shared by the detection-quality presets: 3 hex cells of 40 devices.
  auto small_system = [&] {
    ic.num_cells = 3;
    ic.devices_per_cell = {40};
    ic.active_per_cell = {5};
    ic.length = 12;
  };
  // Timing presets: device counts are 0.3x the full-scale scenarios, L = 30
  // and M = 64 instead of 50 and 128.
  auto timing_system = [&](LayoutKind layout, int cells, std::vector<int> n,
                           std::vector<int> k) {
    ic.layout = layout;
    ic.num_cells = cells;
    ic.devices_per_cell = std::move(n);
    ic.active_per_cell = std::move(k);
    ic.length = 30;
    c.antennas = {64};
    c.solvers = {"cd", "icd", "as-cd", "as-icd"};
    c.trials = 20;
  };
  auto edges = [](int center, int edge, int cells) {
    std::vector<int> v(cells, edge);
    v[0] = center;
    return v;
  };

  if (name == "fig1") {
    // Consistency phase diagram, single cell; set system.cells = 3 for the
    // multi-cell curve.
    ic.num_cells = 1;
    ic.devices_per_cell = {50};
    c.trials = 100;
  } else if (name == "fig2" || name == "fig3") {
    // 3 cells, N = 40, K = 5, L = 12 instead of 7, 200, 20, 20.
    small_system();
    ic.seq_type = SequenceType::kSphere;
    c.seq_types = {SequenceType::kSphere};
    c.antennas = name == "fig2" ? std::vector<int>{256} : std::vector<int>{64, 128, 256};
    // The prediction describes the MLE itself; see the table3 note.
    c.solvers = {"cd"};
    c.trials = 500;
  } else if (name == "fig4") {
    ic.num_cells = 3;
    ic.devices_per_cell = {60};
    ic.active_per_cell = {6};
    ic.length = 12;
    c.antennas = {128};
    c.seq_types = {SequenceType::kQpsk, SequenceType::kSphere, SequenceType::kGaussian};
    c.solvers = {"as-icd"};
    c.trials = 200;
  } else if (name == "fig5") {
    ic.num_cells = 3;
    ic.devices_per_cell = {60};
    ic.active_per_cell = {6};
    ic.length = 12;
    c.antennas = {32, 64, 128, 256};
    c.seq_types = {SequenceType::kQpsk, SequenceType::kSphere, SequenceType::kGaussian};
    c.solvers = {"as-icd"};
    c.trials = 100;
  } else if (name == "fig6") {
    ic.num_cells = 3;
    ic.devices_per_cell = {60};
    ic.active_per_cell = {6};
    c.sweep_lengths = {8, 10, 12, 14, 16};
    c.antennas = {128};
    c.seq_types = {SequenceType::kQpsk, SequenceType::kSphere, SequenceType::kGaussian};
    c.solvers = {"as-icd"};
    c.trials = 100;
  } else if (name == "fig7a") {
    timing_system(LayoutKind::kHex, 7, {300}, {15});
  } else if (name == "fig7b") {
    timing_system(LayoutKind::kHex, 7, edges(480, 270, 7), edges(24, 14, 7));
  } else if (name == "fig7c") {
    timing_system(LayoutKind::kHex, 7, edges(120, 330, 7), edges(6, 16, 7));
  } else if (name == "fig8a") {
    timing_system(LayoutKind::kSquare, 9, {300}, {15});
  } else if (name == "fig8b") {
    timing_system(LayoutKind::kSquare, 9, edges(540, 270, 9), edges(27, 14, 9));
  } else if (name == "fig8c") {
    timing_system(LayoutKind::kSquare, 9, edges(60, 330, 9), edges(3, 16, 9));
  } else if (name == "fig9") {
    // Running time versus B at N = 60, K = 6, L = 20, M = 128.
    ic.devices_per_cell = {60};
    ic.active_per_cell = {6};
    ic.length = 20;
    c.sweep_cells = {1, 3, 7, 12};
    c.antennas = {128};
    c.solvers = {"cd", "icd", "as-cd", "as-icd"};
    c.trials = 10;
  } else if (name == "fig10") {
    // Running time versus N at B = 7, K = 6, L = 20, M = 128.
    ic.num_cells = 7;
    ic.active_per_cell = {6};
    ic.length = 20;
    c.sweep_devices = {60, 120, 240};
    c.antennas = {128};
    c.solvers = {"cd", "icd", "as-cd", "as-icd"};
    c.trials = 10;
  } else if (name == "fig11") {
    // Coordinate updates per iteration on the fig7a system.
    timing_system(LayoutKind::kHex, 7, {300}, {15});
    c.solvers = {"cd", "as-cd", "as-icd"};
    c.trials = 5;
  } else if (name == "table3") {
    small_system();
    ic.seq_type = SequenceType::kSphere;
    c.seq_types = {SequenceType::kSphere};
    c.antennas = {256};
    // The active-set variants never revisit a coordinate whose violation is
    // below epsilon, and for an inactive device that violation is capped by
    // a itself. Strong inactive devices can therefore keep a < epsilon with
    // a large gradient, which distorts small estimates. Vanilla CD sweeps
    // every coordinate and lands on the MLE.
    c.solvers = {"cd"};
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  ic.seq_type = c.seq_types.front();
  return c;
}

ExperimentConfig ApplyToml(const TomlDocument& doc, ExperimentConfig c) {
  InstanceConfig& ic = c.instance;
  for (const auto& [key, v] : doc.entries()) {
    if (key == "scenario") c.scenario = v.AsString();
    else if (key == "seed") {
      Require(v.AsInt() >= 0, "seed must be non-negative");
      c.seed = static_cast<std::uint64_t>(v.AsInt());
    } else if (key == "trials") c.trials = ToInt(v);
    else if (key == "workers") c.workers = ToInt(v);
    else if (key == "out_dir") c.out_dir = v.AsString();
    else if (key == "system.layout") ic.layout = ParseLayoutKind(v.AsString());
    else if (key == "system.cells") ic.num_cells = ToInt(v);
    else if (key == "system.radius_m") ic.radius = v.AsDouble();
    else if (key == "system.devices_per_cell") ic.devices_per_cell = IntList(v);
    else if (key == "system.active_per_cell") ic.active_per_cell = IntList(v);
    else if (key == "system.length") ic.length = ToInt(v);
    else if (key == "system.antennas") c.antennas = IntList(v);
    else if (key == "system.seq_type") {
      c.seq_types.clear();
      for (const auto& s : StringList(v)) c.seq_types.push_back(ParseSequenceType(s));
      Require(!c.seq_types.empty(), "seq_type list is empty");
      ic.seq_type = c.seq_types.front();
    } else if (key == "system.min_dist_m") ic.min_dist_m = v.AsDouble();
    else if (key == "system.tx_dbm") ic.tx_dbm = v.AsDouble();
    else if (key == "system.noise_dbm_hz") ic.noise_dbm_per_hz = v.AsDouble();
    else if (key == "system.bandwidth_hz") ic.bandwidth_hz = v.AsDouble();
    else if (key == "system.sigma2") ic.sigma2 = v.AsDouble();
    else if (key == "sweep.cells") c.sweep_cells = IntList(v);
    else if (key == "sweep.devices") c.sweep_devices = IntList(v);
    else if (key == "sweep.lengths") c.sweep_lengths = IntList(v);
    else if (key == "solver.names") c.solvers = StringList(v);
    else if (key == "solver.epsilon") c.solver.epsilon = v.AsDouble();
    else if (key == "solver.max_sweeps") c.solver.max_sweeps = ToInt(v);
    else if (key == "solver.mu0_floor") c.solver.mu0_floor = v.AsDouble();
    else if (key == "solver.beta") c.solver.beta = v.AsDouble();
    else if (key == "solver.omega_decay") c.solver.omega_decay = v.AsDouble();
    else if (key == "solver.record_objective") c.solver.record_objective = v.AsBool();
    else if (key == "metrics.threshold_low") c.threshold_low = v.AsDouble();
    else if (key == "metrics.threshold_points") c.threshold_points = ToInt(v);
    else if (key == "phase.lengths") c.phase_lengths = IntList(v);
    else if (key == "phase.actives") c.phase_actives = IntList(v);
    else if (key == "errordist.samples") c.error_samples = ToInt(v);
    else if (key == "bench.checkpoint_start_s") c.checkpoint_start_s = v.AsDouble();
    else if (key == "bench.checkpoint_factor") c.checkpoint_factor = v.AsDouble();
    else if (key == "bench.single_worker") c.bench_single_worker = v.AsBool();
    else if (key == "norm.factors") c.norm_factors = DoubleList(v);
    else if (key == "norm.realizations") c.norm_realizations = ToInt(v);
    else if (key == "bound.gamma") c.bound_gamma = v.AsDouble();
    else if (key == "bound.p0_db") c.bound_p0_db = v.AsDouble();
    else if (key == "bound.d0_m") c.bound_d0_m = v.AsDouble();
    else if (key.rfind("run.", 0) != 0) throw ConfigError("unknown config key '" + key + "'");
  }
  return c;
}

TomlDocument ConfigToToml(const ExperimentConfig& c) {
  const InstanceConfig& ic = c.instance;
  TomlDocument doc;
  doc.Set("scenario", c.scenario);
  // Seeds above 2^63 do not fit a TOML integer.
  doc.Set("seed", static_cast<long long>(c.seed));
  doc.Set("trials", c.trials);
  doc.Set("workers", c.workers);
  doc.Set("out_dir", c.out_dir);
  doc.Set("system.layout", LayoutKindName(ic.layout));
  doc.Set("system.cells", ic.num_cells);
  doc.Set("system.radius_m", ic.radius);
  doc.Set("system.devices_per_cell", ToToml(ic.devices_per_cell));
  doc.Set("system.active_per_cell", ToToml(ic.active_per_cell));
  doc.Set("system.length", ic.length);
  doc.Set("system.antennas", ToToml(c.antennas));
  std::vector<std::string> types;
  for (auto t : c.seq_types) types.push_back(SequenceTypeName(t));
  doc.Set("system.seq_type", ToToml(types));
  doc.Set("system.min_dist_m", ic.min_dist_m);
  doc.Set("system.tx_dbm", ic.tx_dbm);
  doc.Set("system.noise_dbm_hz", ic.noise_dbm_per_hz);
  doc.Set("system.bandwidth_hz", ic.bandwidth_hz);
  doc.Set("system.sigma2", ic.sigma2);
  doc.Set("sweep.cells", ToToml(c.sweep_cells));
  doc.Set("sweep.devices", ToToml(c.sweep_devices));
  doc.Set("sweep.lengths", ToToml(c.sweep_lengths));
  doc.Set("solver.names", ToToml(c.solvers));
  doc.Set("solver.epsilon", c.solver.epsilon);
  doc.Set("solver.max_sweeps", c.solver.max_sweeps);
  doc.Set("solver.mu0_floor", c.solver.mu0_floor);
  doc.Set("solver.beta", c.solver.beta);
  doc.Set("solver.omega_decay", c.solver.omega_decay);
  doc.Set("solver.record_objective", c.solver.record_objective);
  doc.Set("metrics.threshold_low", c.threshold_low);
  doc.Set("metrics.threshold_points", c.threshold_points);
  doc.Set("phase.lengths", ToToml(c.phase_lengths));
  doc.Set("phase.actives", ToToml(c.phase_actives));
  doc.Set("errordist.samples", c.error_samples);
  doc.Set("bench.checkpoint_start_s", c.checkpoint_start_s);
  doc.Set("bench.checkpoint_factor", c.checkpoint_factor);
  doc.Set("bench.single_worker", c.bench_single_worker);
  doc.Set("norm.factors", ToToml(c.norm_factors));
  doc.Set("norm.realizations", c.norm_realizations);
  doc.Set("bound.gamma", c.bound_gamma);
  doc.Set("bound.p0_db", c.bound_p0_db);
  doc.Set("bound.d0_m", c.bound_d0_m);
  return doc;
}

std::uint64_t TrialSeed(std::uint64_t seed, int trial) {
  return Rng(seed).Split(Stream::kTrial).Split(static_cast<std::uint64_t>(trial)).seed();
}

std::vector<ScenarioPoint> ExpandScenarios(const ExperimentConfig& config) {
  const InstanceConfig& base = config.instance;
  const std::vector<int> cells =
      config.sweep_cells.empty() ? std::vector<int>{base.num_cells} : config.sweep_cells;
  const std::vector<int> lengths =
      config.sweep_lengths.empty() ? std::vector<int>{base.length} : config.sweep_lengths;
  std::vector<ScenarioPoint> out;
  for (SequenceType type : config.seq_types) {
    for (int b : cells) {
      const std::size_t n_count = config.sweep_devices.empty() ? 1 : config.sweep_devices.size();
      for (std::size_t d = 0; d < n_count; ++d) {
        for (int length : lengths) {
          ScenarioPoint p;
          p.index = static_cast<int>(out.size());
          p.instance = base;
          p.instance.seq_type = type;
          p.instance.num_cells = b;
          p.instance.length = length;
          if (!config.sweep_devices.empty()) p.instance.devices_per_cell = {config.sweep_devices[d]};
          p.instance.devices_per_cell = PerCell(p.instance.devices_per_cell, b);
          p.instance.active_per_cell = PerCell(p.instance.active_per_cell, b);
          out.push_back(std::move(p));
        }
      }
    }
  }
  return out;
}

// ---- Monte Carlo --------------------------------------------------------------

MonteCarloResult RunMonteCarlo(const ExperimentConfig& config) {
  config.Validate();
  MonteCarloResult result;
  result.scenarios = ExpandScenarios(config);
  result.thresholds = config.Thresholds();
  result.records.resize(config.trials);
  ParallelFor(config.trials, config.workers, [&](int t) {
    TrialRecord& rec = result.records[t];
    rec.trial = t;
    rec.seed = TrialSeed(config.seed, t);
    for (const ScenarioPoint& sp : result.scenarios) {
      const SystemInstance inst = GenerateInstance(sp.instance, rec.seed);
      rec.digests.push_back(InstanceDigest(inst));
      rec.a_true.push_back(inst.a_true);
      for (int m : config.antennas) {
        const SampleCovariances covs = SimulateReceived(inst, m, ChannelRng(rec.seed, m));
        const DetectionProblem problem = MakeProblem(inst, covs);
        for (const auto& name : config.solvers) {
          SolverRun run;
          run.scenario = sp.index;
          run.antennas = m;
          run.solver = name;
          SolverConfig sc = config.SolverFor(name);
          sc.seed = Rng(rec.seed).Split(Stream::kSolver).seed();
          try {
            const Solution sol = Solve(problem, sc);
            run.a_hat = sol.a_hat;
            run.wall_time = sol.wall_time;
            run.sweeps = sol.sweeps;
            run.coord_updates = sol.coord_updates_total;
            run.v_inf = sol.v_inf_trace.empty() ? kNaN : sol.v_inf_trace.back();
            run.converged = sol.converged;
            run.curve = ComputePmPfCurve(sol.a_hat, inst.a_true, result.thresholds);
            run.eep = EqualErrorFromCurve(run.curve);
          } catch (const NumericalError& e) {
            run.failed = true;
            run.error = e.what();
          }
          rec.runs.push_back(std::move(run));
        }
      }
    }
  });
  result.groups = AggregateRecords(result.records, result.thresholds);
  return result;
}

std::vector<AggregateGroup> AggregateRecords(const std::vector<TrialRecord>& records,
                                             const std::vector<double>& thresholds) {
  std::vector<AggregateGroup> groups;
  if (records.empty()) return groups;
  const std::size_t num_groups = records.front().runs.size();
  const std::size_t nt = thresholds.size();
  for (std::size_t g = 0; g < num_groups; ++g) {
    AggregateGroup agg;
    const SolverRun& first = records.front().runs[g];
    agg.scenario = first.scenario;
    agg.antennas = first.antennas;
    agg.solver = first.solver;
    std::vector<double> pm_sum(nt, 0.0), pf_sum(nt, 0.0);
    std::vector<int> pm_n(nt, 0), pf_n(nt, 0);
    std::vector<double> eeps, times;
    double sweeps = 0.0;
    int converged = 0;
    for (const TrialRecord& rec : records) {
      const SolverRun& run = rec.runs[g];
      if (run.failed) {
        ++agg.failures;
        continue;
      }
      ++agg.trials_used;
      for (std::size_t k = 0; k < nt; ++k) {
        if (!std::isnan(run.curve.pm[k])) {
          pm_sum[k] += run.curve.pm[k];
          ++pm_n[k];
        }
        if (!std::isnan(run.curve.pf[k])) {
          pf_sum[k] += run.curve.pf[k];
          ++pf_n[k];
        }
      }
      eeps.push_back(run.eep.value);
      times.push_back(run.wall_time);
      sweeps += run.sweeps;
      converged += run.converged;
    }
    agg.pm_mean.resize(nt);
    agg.pf_mean.resize(nt);
    for (std::size_t k = 0; k < nt; ++k) {
      agg.pm_mean[k] = pm_n[k] ? pm_sum[k] / pm_n[k] : kNaN;
      agg.pf_mean[k] = pf_n[k] ? pf_sum[k] / pf_n[k] : kNaN;
    }
    const double n = static_cast<double>(eeps.size());
    if (n > 0) {
      agg.eep_mean = std::accumulate(eeps.begin(), eeps.end(), 0.0) / n;
      double ss = 0.0;
      for (double e : eeps) ss += (e - agg.eep_mean) * (e - agg.eep_mean);
      agg.eep_stderr = n > 1 ? std::sqrt(ss / (n - 1) / n) : 0.0;
      agg.sweeps_mean = sweeps / n;
      agg.converged_fraction = converged / n;
      agg.time_mean = std::accumulate(times.begin(), times.end(), 0.0) / n;
    } else {
      agg.eep_mean = agg.eep_stderr = agg.sweeps_mean = agg.time_mean = kNaN;
    }
    agg.time_q50 = Quantile(times, 0.5);
    agg.time_q90 = Quantile(times, 0.9);
    PmPfCurve mean_curve{thresholds, agg.pm_mean, agg.pf_mean};
    agg.eep_of_mean_curve = EqualErrorFromCurve(mean_curve);
    groups.push_back(std::move(agg));
  }
  return groups;
}

namespace {

void WriteScenarios(const std::vector<ScenarioPoint>& scenarios, const std::string& path) {
  CsvWriter csv(path, {"scenario", "seq_type", "layout", "cells", "devices_per_cell",
                       "active_per_cell", "length"});
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + std::to_string(v[i]);
    return s;
  };
  for (const auto& sp : scenarios) {
    csv.Add(sp.index)
        .Add(SequenceTypeName(sp.instance.seq_type))
        .Add(LayoutKindName(sp.instance.layout))
        .Add(sp.instance.num_cells)
        .Add(join(sp.instance.devices_per_cell))
        .Add(join(sp.instance.active_per_cell))
        .Add(sp.instance.length)
        .EndRow();
  }
}

}  // namespace

void WriteMonteCarlo(const MonteCarloResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  WriteScenarios(result.scenarios, dir + "/scenarios.csv");
  {
    CsvWriter csv(dir + "/trials.csv",
                  {"trial", "seed", "scenario", "digest", "antennas", "solver", "failed",
                   "sweeps", "coord_updates", "v_inf", "converged", "eep", "eep_threshold",
                   "eep_crossed", "error"});
    for (const auto& rec : result.records) {
      for (const auto& run : rec.runs) {
        csv.Add(rec.trial)
            .Add(std::to_string(rec.seed))
            .Add(run.scenario)
            .Add(rec.digests[run.scenario])
            .Add(run.antennas)
            .Add(run.solver)
            .Add(run.failed ? 1 : 0)
            .Add(run.sweeps)
            .Add(run.coord_updates)
            .Add(run.failed ? kNaN : run.v_inf)
            .Add(run.converged ? 1 : 0)
            .Add(run.failed ? kNaN : run.eep.value)
            .Add(run.failed ? kNaN : run.eep.threshold)
            .Add(run.eep.crossed ? 1 : 0)
            .Add(CsvSafe(run.error))
            .EndRow();
      }
    }
  }
  {
    CsvWriter csv(dir + "/pmpf_trials.csv",
                  {"trial", "scenario", "antennas", "solver", "k", "threshold", "pm", "pf"});
    for (const auto& rec : result.records) {
      for (const auto& run : rec.runs) {
        if (run.failed) continue;
        for (std::size_t k = 0; k < result.thresholds.size(); ++k) {
          csv.Add(rec.trial)
              .Add(run.scenario)
              .Add(run.antennas)
              .Add(run.solver)
              .Add(static_cast<long long>(k))
              .Add(result.thresholds[k])
              .Add(run.curve.pm[k])
              .Add(run.curve.pf[k])
              .EndRow();
        }
      }
    }
  }
  {
    CsvWriter csv(dir + "/estimates.csv",
                  {"trial", "scenario", "antennas", "solver", "device", "a_true", "a_hat"});
    for (const auto& rec : result.records) {
      for (const auto& run : rec.runs) {
        if (run.failed) continue;
        const VectorXd& truth = rec.a_true[run.scenario];
        for (Eigen::Index i = 0; i < truth.size(); ++i) {
          csv.Add(rec.trial)
              .Add(run.scenario)
              .Add(run.antennas)
              .Add(run.solver)
              .Add(static_cast<long long>(i))
              .Add(truth(i))
              .Add(run.a_hat(i))
              .EndRow();
        }
      }
    }
  }
  {
    CsvWriter csv(dir + "/aggregate_pmpf.csv",
                  {"scenario", "antennas", "solver", "k", "threshold", "pm_mean", "pf_mean"});
    for (const auto& g : result.groups) {
      for (std::size_t k = 0; k < result.thresholds.size(); ++k) {
        csv.Add(g.scenario)
            .Add(g.antennas)
            .Add(g.solver)
            .Add(static_cast<long long>(k))
            .Add(result.thresholds[k])
            .Add(g.pm_mean[k])
            .Add(g.pf_mean[k])
            .EndRow();
      }
    }
  }
  {
    CsvWriter csv(dir + "/summary.csv",
                  {"scenario", "antennas", "solver", "trials_used", "failures", "eep_mean",
                   "eep_stderr", "eep_of_mean_curve", "eep_of_mean_curve_threshold",
                   "converged_fraction", "sweeps_mean"});
    for (const auto& g : result.groups) {
      csv.Add(g.scenario)
          .Add(g.antennas)
          .Add(g.solver)
          .Add(g.trials_used)
          .Add(g.failures)
          .Add(g.eep_mean)
          .Add(g.eep_stderr)
          .Add(g.eep_of_mean_curve.value)
          .Add(g.eep_of_mean_curve.threshold)
          .Add(g.converged_fraction)
          .Add(g.sweeps_mean)
          .EndRow();
    }
  }
  {
    CsvWriter csv(dir + "/timing.csv", {"trial", "scenario", "antennas", "solver", "wall_time_s"});
    for (const auto& rec : result.records) {
      for (const auto& run : rec.runs) {
        csv.Add(rec.trial).Add(run.scenario).Add(run.antennas).Add(run.solver);
        csv.Add(run.failed ? kNaN : run.wall_time).EndRow();
      }
    }
  }
  {
    CsvWriter csv(dir + "/timing_summary.csv",
                  {"scenario", "antennas", "solver", "time_mean_s", "time_q50_s", "time_q90_s"});
    for (const auto& g : result.groups) {
      csv.Add(g.scenario).Add(g.antennas).Add(g.solver);
      csv.Add(g.time_mean).Add(g.time_q50).Add(g.time_q90).EndRow();
    }
  }
}

// ---- Benchmark ----------------------------------------------------------------

BenchResult BenchmarkSolvers(const ExperimentConfig& config) {
  config.Validate();
  BenchResult result;
  result.scenarios = ExpandScenarios(config);
  const auto thresholds = config.Thresholds();
  const int num_solvers = static_cast<int>(config.solvers.size());
  const int m = config.antennas.front();
  const int workers = config.bench_single_worker ? 1 : config.workers;
  for (const ScenarioPoint& sp : result.scenarios) {
    std::vector<BenchRun> runs(static_cast<std::size_t>(config.trials) * num_solvers);
    ParallelFor(config.trials, workers, [&](int t) {
      const std::uint64_t seed = TrialSeed(config.seed, t);
      const SystemInstance inst = GenerateInstance(sp.instance, seed);
      const DetectionProblem problem =
          MakeProblem(inst, SimulateReceived(inst, m, ChannelRng(seed, m)));
      for (int s = 0; s < num_solvers; ++s) {
        BenchRun& run = runs[static_cast<std::size_t>(t) * num_solvers + s];
        run.scenario = sp.index;
        run.trial = t;
        run.solver = config.solvers[s];
        SolverConfig sc = config.SolverFor(run.solver);
        sc.seed = Rng(seed).Split(Stream::kSolver).seed();
        struct Snap {
          double elapsed;
          long long updates;
          VectorXd a;
        };
        std::vector<Snap> snaps;
        long long updates = 0;
        double next = config.checkpoint_start_s;
        const auto progress = [&](double elapsed, const VectorXd& a) {
          ++updates;
          while (elapsed >= next) {
            snaps.push_back({next, updates, a});
            next *= config.checkpoint_factor;
          }
        };
        const Solution sol = Solve(problem, sc, progress);
        for (const Snap& snap : snaps) {
          run.trajectory.push_back(
              {snap.elapsed, snap.updates,
               EqualErrorProbability(snap.a, inst.a_true, thresholds).value});
        }
        run.final_eep = EqualErrorProbability(sol.a_hat, inst.a_true, thresholds).value;
        run.trajectory.push_back({sol.wall_time, sol.coord_updates_total, run.final_eep});
        run.active_set_sizes = sol.active_set_sizes;
        run.updates_per_iteration = sol.coord_updates_per_sweep;
        run.coord_updates_total = sol.coord_updates_total;
        run.sweeps = sol.sweeps;
        run.wall_time = sol.wall_time;
        run.converged = sol.converged;
      }
    });
    for (auto& r : runs) result.runs.push_back(std::move(r));
  }
  return result;
}

void WriteBenchmark(const BenchResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  WriteScenarios(result.scenarios, dir + "/scenarios.csv");
  {
    CsvWriter csv(dir + "/bench_trajectory.csv",
                  {"scenario", "trial", "solver", "checkpoint", "elapsed_s", "coord_updates",
                   "eep", "final"});
    for (const auto& run : result.runs) {
      for (std::size_t k = 0; k < run.trajectory.size(); ++k) {
        const Checkpoint& c = run.trajectory[k];
        csv.Add(run.scenario).Add(run.trial).Add(run.solver).Add(static_cast<long long>(k));
        csv.Add(c.elapsed).Add(c.updates).Add(c.eep);
        csv.Add(k + 1 == run.trajectory.size() ? 1 : 0).EndRow();
      }
    }
  }
  {
    CsvWriter csv(dir + "/bench_summary.csv",
                  {"scenario", "trial", "solver", "wall_time_s", "converged", "sweeps",
                   "coord_updates", "final_eep"});
    for (const auto& run : result.runs) {
      csv.Add(run.scenario).Add(run.trial).Add(run.solver).Add(run.wall_time);
      csv.Add(run.converged ? 1 : 0).Add(run.sweeps).Add(run.coord_updates_total);
      csv.Add(run.final_eep).EndRow();
    }
  }
  {
    CsvWriter csv(dir + "/bench_active_sets.csv",
                  {"scenario", "trial", "solver", "iteration", "active_set_size",
                   "coord_updates"});
    for (const auto& run : result.runs) {
      for (std::size_t k = 1; k < run.updates_per_iteration.size(); ++k) {
        const int size = k < run.active_set_sizes.size() ? run.active_set_sizes[k] : -1;
        csv.Add(run.scenario).Add(run.trial).Add(run.solver).Add(static_cast<long long>(k));
        csv.Add(size).Add(run.updates_per_iteration[k]).EndRow();
      }
    }
  }
}

// ---- Error distribution --------------------------------------------------------

std::vector<ErrorDistResult> RunErrorDistribution(const ExperimentConfig& config) {
  config.Validate();
  const auto scenarios = ExpandScenarios(config);
  const auto thresholds = config.Thresholds();
  const SystemInstance inst = GenerateInstance(scenarios.front().instance, TrialSeed(config.seed, 0));
  SolverConfig sc = config.SolverFor(config.solvers.front());
  sc.seed = Rng(config.seed).Split(Stream::kSolver).seed();
  std::vector<ErrorDistResult> out;
  for (int m : config.antennas) {
    ErrorDistResult r;
    r.antennas = m;
    r.digest = InstanceDigest(inst);
    r.a_true = inst.a_true;
    r.predicted = PredictedErrorDistribution(inst.S, inst.gains, inst.a_true, inst.sigma2, m,
                                             config.error_samples,
                                             Rng(config.seed).Split(Stream::kPredicted),
                                             config.workers);
    std::vector<VectorXd> estimates(config.trials);
    std::vector<char> failed(config.trials, 0);
    ParallelFor(config.trials, config.workers, [&](int t) {
      const SampleCovariances covs =
          SimulateReceived(inst, m, ChannelRng(TrialSeed(config.seed, t), m));
      try {
        estimates[t] = Solve(MakeProblem(inst, covs), sc).a_hat;
      } catch (const NumericalError&) {
        failed[t] = 1;
      }
    });
    for (int t = 0; t < config.trials; ++t) {
      if (failed[t]) {
        ++r.solver_failures;
        continue;
      }
      for (Eigen::Index i = 0; i < inst.a_true.size(); ++i) {
        const double e = estimates[t](i) - inst.a_true(i);
        (inst.a_true(i) > 0.5 ? r.empirical_one : r.empirical_zero).push_back(e);
      }
    }
    r.empirical_curve = PmPfFromErrors(r.empirical_zero, r.empirical_one, thresholds);
    r.ks_zero = KsDistance(r.empirical_zero, r.predicted.zero_errors);
    r.ks_one = KsDistance(r.empirical_one, r.predicted.one_errors);
    if (r.predicted.curve.thresholds != thresholds) {
      r.predicted.curve = PmPfFromErrors(r.predicted.zero_errors, r.predicted.one_errors,
                                         thresholds);
    }
    out.push_back(std::move(r));
  }
  return out;
}

void WriteErrorDistribution(const std::vector<ErrorDistResult>& results,
                            const std::string& dir) {
  std::filesystem::create_directories(dir);
  CsvWriter summary(dir + "/errordist_summary.csv",
                    {"antennas", "digest", "ks_zero", "ks_one", "empirical_zero_count",
                     "empirical_one_count", "predicted_samples", "predicted_unconverged",
                     "consistent", "solver_failures"});
  CsvWriter curves(dir + "/errordist_pmpf.csv",
                   {"antennas", "threshold", "pm_predicted", "pf_predicted", "pm_empirical",
                    "pf_empirical"});
  CsvWriter emp(dir + "/errordist_empirical.csv", {"antennas", "truth", "error"});
  for (const auto& r : results) {
    summary.Add(r.antennas).Add(r.digest).Add(r.ks_zero).Add(r.ks_one);
    summary.Add(static_cast<long long>(r.empirical_zero.size()));
    summary.Add(static_cast<long long>(r.empirical_one.size()));
    summary.Add(static_cast<long long>(r.predicted.errors.rows()));
    summary.Add(r.predicted.unconverged).Add(r.predicted.consistent ? 1 : 0);
    summary.Add(r.solver_failures).EndRow();
    for (std::size_t k = 0; k < r.empirical_curve.thresholds.size(); ++k) {
      curves.Add(r.antennas).Add(r.empirical_curve.thresholds[k]);
      curves.Add(r.predicted.curve.pm[k]).Add(r.predicted.curve.pf[k]);
      curves.Add(r.empirical_curve.pm[k]).Add(r.empirical_curve.pf[k]).EndRow();
    }
    for (double e : r.empirical_zero) emp.Add(r.antennas).Add(0).Add(e).EndRow();
    for (double e : r.empirical_one) emp.Add(r.antennas).Add(1).Add(e).EndRow();
    WriteErrorDistCsv(r.predicted, r.a_true,
                      dir + "/errordist_predicted_M" + std::to_string(r.antennas) + ".csv");
  }
}

// ---- Norm rescaling ------------------------------------------------------------

std::vector<NormRescaleRow> NormRescaleExperiment(const SystemInstance& instance,
                                                  int antennas,
                                                  const std::vector<double>& factors,
                                                  int realizations,
                                                  const SolverConfig& solver,
                                                  const Rng& rng, int workers) {
  for (double f : factors) Require(f > 0.0, "scale factors must be positive");
  Require(realizations >= 1, "realizations must be at least 1");
  std::vector<int> active, inactive;
  for (int i = 0; i < instance.num_devices(); ++i) {
    (instance.a_true(i) > 0.5 ? active : inactive).push_back(i);
  }
  std::vector<std::vector<NormRescaleRow>> per(realizations);
  ParallelFor(realizations, workers, [&](int r) {
    const Rng draw = rng.Split(static_cast<std::uint64_t>(r));
    const auto solve = [&](const SystemInstance& inst) {
      return Solve(MakeProblem(inst, SimulateReceived(inst, antennas, draw)), solver).a_hat;
    };
    std::vector<std::pair<int, bool>> devices;
    if (!inactive.empty()) {
      const VectorXd base = solve(instance);
      int best = inactive.front();
      for (int i : inactive) {
        if (base(i) > base(best)) best = i;
      }
      devices.emplace_back(best, false);
    }
    if (!active.empty()) {
      Rng pick = draw.Split(Stream::kActivity);
      devices.emplace_back(active[pick.UniformInt(0, static_cast<int>(active.size()) - 1)], true);
    }
    for (const auto& [device, is_active] : devices) {
      for (double f : factors) {
        SystemInstance scaled = instance;
        scaled.S.col(device) *= f;
        per[r].push_back({r, device, is_active, f, solve(scaled)(device)});
      }
    }
  });
  std::vector<NormRescaleRow> rows;
  for (auto& v : per) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

double NormRescaleRatio(const std::vector<NormRescaleRow>& rows, bool active, double factor) {
  double num = 0.0, den = 0.0;
  int n_num = 0, n_den = 0;
  for (const auto& row : rows) {
    if (row.active != active) continue;
    if (row.factor == factor) {
      num += row.a_hat;
      ++n_num;
    }
    if (row.factor == 1.0) {
      den += row.a_hat;
      ++n_den;
    }
  }
  Require(n_num > 0 && n_den > 0, "ratio needs rows at the factor and at 1.0");
  return (num / n_num) / (den / n_den);
}

void WriteNormRescale(const std::vector<NormRescaleRow>& rows, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter csv(dir + "/norm_rescale.csv",
                  {"realization", "device", "active", "factor", "a_hat"});
    for (const auto& row : rows) {
      csv.Add(row.realization).Add(row.device).Add(row.active ? 1 : 0);
      csv.Add(row.factor).Add(row.a_hat).EndRow();
    }
  }
  std::set<double> factors;
  for (const auto& row : rows) factors.insert(row.factor);
  CsvWriter csv(dir + "/norm_rescale_summary.csv",
                {"active", "factor", "mean_a_hat", "ratio_to_unscaled"});
  for (bool active : {false, true}) {
    for (double f : factors) {
      double sum = 0.0;
      int n = 0;
      for (const auto& row : rows) {
        if (row.active == active && row.factor == f) {
          sum += row.a_hat;
          ++n;
        }
      }
      if (n == 0) continue;
      const bool has_base = factors.count(1.0) > 0;
      csv.Add(active ? 1 : 0).Add(f).Add(sum / n);
      csv.Add(has_base ? NormRescaleRatio(rows, active, f) : kNaN).EndRow();
    }
  }
}

// ---- Interference bound ----------------------------------------------------

std::vector<BoundRow> RunBoundCheck(const ExperimentConfig& config,
                                    const std::vector<int>& cell_counts) {
  config.Validate();
  const double p0 = std::pow(10.0, config.bound_p0_db / 10.0);
  std::vector<BoundRow> rows;
  for (int cells : cell_counts) {
    Require(cells >= 1, "cell counts must be positive");
    const CellLayout layout = BuildCellLayout(config.instance.layout, cells, config.instance.radius);
    const std::vector<int> per_cell = PerCell(config.instance.devices_per_cell, cells);
    const DeviceIndex index(per_cell);
    std::vector<std::vector<BoundRow>> per(config.trials);
    ParallelFor(config.trials, config.workers, [&](int t) {
      Rng rng = Rng(TrialSeed(config.seed, t)).Split(Stream::kPositions);
      const auto positions = PlaceDevices(layout, per_cell, config.instance.min_dist_m, rng);
      const InterferenceReport r = InterferenceBound(layout, index, config.bound_gamma, p0,
                                                     config.bound_d0_m, positions);
      for (std::size_t b = 0; b < r.lhs.size(); ++b) {
        per[t].push_back({cells, t, static_cast<int>(b), r.lhs[b], r.bound});
      }
    });
    for (auto& v : per) rows.insert(rows.end(), v.begin(), v.end());
  }
  return rows;
}

void WriteBoundCheck(const std::vector<BoundRow>& rows, const std::string& path) {
  CsvWriter csv(path, {"cells", "trial", "bs", "lhs", "bound", "holds"});
  for (const auto& r : rows) {
    csv.Add(r.cells).Add(r.trial).Add(r.bs).Add(r.lhs).Add(r.bound);
    csv.Add(r.lhs <= r.bound ? 1 : 0).EndRow();
  }
}

}  // namespace covdet
