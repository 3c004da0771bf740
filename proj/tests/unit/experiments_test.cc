#include "covdet/experiments.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "covdet/csv.h"
#include "covdet/snapshot.h"

namespace covdet {
namespace {

std::string Slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string FreshDir(const std::string& name) {
  const std::string dir = ::testing::TempDir() + "/covdet_" + name;
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig SmallConfig() {
  ExperimentConfig c;
  c.seed = 11;
  c.trials = 4;
  c.instance.num_cells = 2;
  c.instance.devices_per_cell = {12};
  c.instance.active_per_cell = {2};
  c.instance.length = 6;
  c.antennas = {16, 32};
  c.solvers = {"cd", "as-icd"};
  c.seq_types = {SequenceType::kQpsk, SequenceType::kSphere};
  return c;
}

TEST(ExperimentConfigTest, PresetsValidate) {
  for (const auto& name : PresetNames()) {
    EXPECT_NO_THROW(PresetConfig(name).Validate()) << name;
  }
  EXPECT_THROW(PresetConfig("fig99"), ConfigError);
}

TEST(ExperimentConfigTest, ValidationRejectsBadFields) {
  auto expect_bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    EXPECT_THROW(c.Validate(), ConfigError);
  };
  expect_bad([](ExperimentConfig& c) { c.trials = 0; });
  expect_bad([](ExperimentConfig& c) { c.antennas = {0}; });
  expect_bad([](ExperimentConfig& c) { c.solvers = {"newton"}; });
  expect_bad([](ExperimentConfig& c) { c.instance.active_per_cell = {50}; });
  expect_bad([](ExperimentConfig& c) { c.instance.length = 0; });
  expect_bad([](ExperimentConfig& c) { c.checkpoint_factor = 1.0; });
  expect_bad([](ExperimentConfig& c) { c.threshold_points = 3; });
}

TEST(ExperimentConfigTest, TomlOverridesAndEchoRoundTrip) {
  const TomlDocument doc = TomlDocument::Parse(R"(
seed = 9
[system]
cells = 3
devices_per_cell = 30
seq_type = ["II", "III"]
[solver]
names = ["icd"]
epsilon = 1e-4
[run]
command = "mc"
)");
  const ExperimentConfig c = ApplyToml(doc, ExperimentConfig{});
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.instance.num_cells, 3);
  EXPECT_EQ(c.instance.devices_per_cell, std::vector<int>{30});
  ASSERT_EQ(c.seq_types.size(), 2u);
  EXPECT_EQ(c.seq_types[1], SequenceType::kGaussian);
  EXPECT_EQ(c.SolverFor("icd").epsilon, 1e-4);
  EXPECT_EQ(c.SolverFor("as-cd").mode, SubproblemMode::kExact);

  // The echo reloads to the same configuration.
  const TomlDocument echo = ConfigToToml(c);
  const ExperimentConfig again = ApplyToml(TomlDocument::Parse(echo.Dump()), ExperimentConfig{});
  EXPECT_EQ(ConfigToToml(again).Dump(), echo.Dump());

  EXPECT_THROW(ApplyToml(TomlDocument::Parse("sytem.cells = 3"), ExperimentConfig{}),
               ConfigError);
  EXPECT_THROW(ApplyToml(TomlDocument::Parse("[system]\ncells = \"3\""), ExperimentConfig{}),
               ConfigError);
}

TEST(ScenarioTest, ExpandsSweepsInOrder) {
  ExperimentConfig c;
  c.seq_types = {SequenceType::kQpsk, SequenceType::kSphere};
  c.sweep_cells = {1, 3};
  c.sweep_lengths = {8, 10, 12};
  const auto points = ExpandScenarios(c);
  ASSERT_EQ(points.size(), 12u);
  EXPECT_EQ(points[0].instance.seq_type, SequenceType::kQpsk);
  EXPECT_EQ(points[11].instance.seq_type, SequenceType::kSphere);
  EXPECT_EQ(points[3].instance.num_cells, 3);
  EXPECT_EQ(points[3].instance.devices_per_cell.size(), 3u);
  EXPECT_EQ(points[4].instance.length, 10);
  for (std::size_t i = 0; i < points.size(); ++i) EXPECT_EQ(points[i].index, static_cast<int>(i));
}

TEST(SnapshotTest, RoundTripIsExact) {
  InstanceConfig ic;
  ic.num_cells = 3;
  ic.devices_per_cell = {5, 7, 6};
  ic.active_per_cell = {1, 2, 0};
  ic.length = 4;
  ic.seq_type = SequenceType::kGaussian;
  const SystemInstance inst = GenerateInstance(ic, 0xfedcba9876543210ULL);
  const std::string dir = FreshDir("snapshot");
  SaveInstance(inst, dir);
  const SystemInstance back = LoadInstance(dir);
  EXPECT_EQ(back.S, inst.S);
  EXPECT_EQ(back.gains, inst.gains);
  EXPECT_EQ(back.a_true, inst.a_true);
  EXPECT_EQ(back.sigma2, inst.sigma2);
  EXPECT_EQ(back.seed, inst.seed);
  EXPECT_EQ(back.index.devices_per_cell(), inst.index.devices_per_cell());
  EXPECT_EQ(back.device_positions.size(), inst.device_positions.size());
  EXPECT_EQ(InstanceDigest(back), InstanceDigest(inst));

  // A tampered gain no longer matches the stored digest.
  MatrixXd g = ReadMatrixCsv(dir + "/G.csv");
  g(0, 0) *= 1.0 + 1e-15;
  WriteMatrixCsv(g, dir + "/G.csv");
  EXPECT_THROW(LoadInstance(dir), ConfigError);
}

TEST(MonteCarloTest, SmokeRecordsAreComplete) {
  ExperimentConfig c = SmallConfig();
  c.trials = 1;
  const MonteCarloResult r = RunMonteCarlo(c);
  ASSERT_EQ(r.records.size(), 1u);
  ASSERT_EQ(r.scenarios.size(), 2u);
  const TrialRecord& rec = r.records[0];
  EXPECT_EQ(rec.runs.size(), 2u * 2u * 2u);
  EXPECT_EQ(rec.digests.size(), 2u);
  for (const SolverRun& run : rec.runs) {
    EXPECT_FALSE(run.failed);
    EXPECT_EQ(run.a_hat.size(), 24);
    EXPECT_EQ(run.curve.pm.size(), r.thresholds.size());
    EXPECT_GE(run.sweeps, 1);
    EXPECT_GE(run.eep.value, 0.0);
    EXPECT_LE(run.eep.value, 1.0);
  }
  EXPECT_EQ(r.groups.size(), rec.runs.size());
}

TEST(MonteCarloTest, OutputsAreByteIdenticalAcrossRunsAndWorkers) {
  ExperimentConfig c = SmallConfig();
  const std::string d1 = FreshDir("mc1"), d2 = FreshDir("mc2");
  WriteMonteCarlo(RunMonteCarlo(c), d1);
  c.workers = 3;
  WriteMonteCarlo(RunMonteCarlo(c), d2);
  for (const char* f : {"scenarios.csv", "trials.csv", "pmpf_trials.csv", "estimates.csv",
                        "aggregate_pmpf.csv", "summary.csv"}) {
    const std::string a = Slurp(d1 + "/" + f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, Slurp(d2 + "/" + f)) << f;
  }
  // Wall-clock files exist but are not part of the byte-identity contract.
  EXPECT_TRUE(std::filesystem::exists(d1 + "/timing.csv"));
}

TEST(MonteCarloTest, AggregatesMatchPersistedTrialCurves) {
  const ExperimentConfig c = SmallConfig();
  const std::string dir = FreshDir("mc_agg");
  WriteMonteCarlo(RunMonteCarlo(c), dir);

  using Key = std::tuple<int, int, std::string, int>;
  std::map<Key, std::pair<double, int>> pm, pf;
  const CsvTable trials = ReadCsv(dir + "/pmpf_trials.csv");
  const int cs = trials.Column("scenario"), cm = trials.Column("antennas"),
            cv = trials.Column("solver"), ck = trials.Column("k"), cpm = trials.Column("pm"),
            cpf = trials.Column("pf");
  for (const auto& row : trials.rows) {
    const Key key{std::stoi(row[cs]), std::stoi(row[cm]), row[cv], std::stoi(row[ck])};
    const double vpm = ParseDouble(row[cpm]), vpf = ParseDouble(row[cpf]);
    if (!std::isnan(vpm)) {
      pm[key].first += vpm;
      ++pm[key].second;
    }
    if (!std::isnan(vpf)) {
      pf[key].first += vpf;
      ++pf[key].second;
    }
  }
  const CsvTable agg = ReadCsv(dir + "/aggregate_pmpf.csv");
  ASSERT_EQ(agg.rows.size(), pm.size());
  const int apm = agg.Column("pm_mean"), apf = agg.Column("pf_mean");
  std::map<std::tuple<int, int, std::string>, std::vector<std::pair<double, double>>> curves;
  for (const auto& row : agg.rows) {
    const Key key{std::stoi(row[0]), std::stoi(row[1]), row[2], std::stoi(row[3])};
    const double m_pm = pm[key].first / pm[key].second;
    const double m_pf = pf[key].first / pf[key].second;
    EXPECT_NEAR(ParseDouble(row[apm]), m_pm, 1e-15);
    EXPECT_NEAR(ParseDouble(row[apf]), m_pf, 1e-15);
    curves[{std::get<0>(key), std::get<1>(key), std::get<2>(key)}].emplace_back(m_pm, m_pf);
  }
  // Ascending thresholds: mean PM never decreases and mean PF never increases.
  for (const auto& [group, curve] : curves) {
    for (std::size_t k = 1; k < curve.size(); ++k) {
      EXPECT_GE(curve[k].first, curve[k - 1].first);
      EXPECT_LE(curve[k].second, curve[k - 1].second);
    }
  }
}

TEST(BenchmarkTest, SameSolverTwiceGivesSameIterates) {
  ExperimentConfig c = SmallConfig();
  c.seq_types = {SequenceType::kQpsk};
  c.antennas = {32};
  c.trials = 2;
  c.solvers = {"as-icd", "as-icd", "cd"};
  const BenchResult r = BenchmarkSolvers(c);
  ASSERT_EQ(r.runs.size(), 6u);
  for (int t = 0; t < 2; ++t) {
    const BenchRun& a = r.runs[3 * t];
    const BenchRun& b = r.runs[3 * t + 1];
    EXPECT_EQ(a.updates_per_iteration, b.updates_per_iteration);
    EXPECT_EQ(a.active_set_sizes, b.active_set_sizes);
    EXPECT_EQ(a.final_eep, b.final_eep);
    EXPECT_EQ(a.coord_updates_total, b.coord_updates_total);
  }
  for (const BenchRun& run : r.runs) {
    ASSERT_FALSE(run.trajectory.empty());
    for (std::size_t k = 1; k < run.trajectory.size(); ++k) {
      EXPECT_GE(run.trajectory[k].elapsed, run.trajectory[k - 1].elapsed * (1 - 1e-12));
      EXPECT_GE(run.trajectory[k].updates, run.trajectory[k - 1].updates);
    }
    EXPECT_EQ(run.trajectory.back().updates, run.coord_updates_total);
    EXPECT_EQ(run.trajectory.back().eep, run.final_eep);
  }
  const std::string dir = FreshDir("bench");
  WriteBenchmark(r, dir);
  EXPECT_EQ(ReadCsv(dir + "/bench_summary.csv").rows.size(), 6u);
}

TEST(BenchmarkTest, CheckpointsFollowGeometricGrid) {
  ExperimentConfig c = SmallConfig();
  c.seq_types = {SequenceType::kQpsk};
  c.trials = 1;
  c.solvers = {"cd"};
  c.checkpoint_start_s = 1e-6;
  const BenchResult r = BenchmarkSolvers(c);
  const auto& traj = r.runs[0].trajectory;
  ASSERT_GE(traj.size(), 2u);
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    EXPECT_NEAR(traj[k].elapsed, 1e-6 * std::pow(1.5, static_cast<double>(k)),
                1e-12 * traj[k].elapsed);
  }
}

TEST(NormRescaleTest, UnitFactorReproducesBaselineAndScalingIsInverseSquare) {
  InstanceConfig ic;
  ic.num_cells = 1;
  ic.devices_per_cell = {20};
  ic.active_per_cell = {3};
  ic.length = 5;
  ic.seq_type = SequenceType::kSphere;
  ic.sigma2 = 1.0;
  SystemInstance inst = GenerateInstance(ic, 5);
  inst.gains.setOnes();
  SolverConfig sc = SolverFromName("cd");
  sc.epsilon = 1e-9;
  const Rng rng(77);
  const auto rows = NormRescaleExperiment(inst, 16, {0.5, 1.0, 2.0}, 3, sc, rng);
  ASSERT_EQ(rows.size(), 3u * 2u * 3u);
  for (int r = 0; r < 3; ++r) {
    const Rng draw = rng.Split(static_cast<std::uint64_t>(r));
    const VectorXd base =
        Solve(MakeProblem(inst, SimulateReceived(inst, 16, draw)), sc).a_hat;
    for (const auto& row : rows) {
      if (row.realization == r && row.factor == 1.0) EXPECT_EQ(row.a_hat, base(row.device));
    }
  }
  // Unit gains and sigma2 = 1: inactive estimates are an exact reparametrization.
  int checked = 0;
  for (const auto& row : rows) {
    if (row.active || row.factor == 1.0) continue;
    for (const auto& ref : rows) {
      if (ref.realization == row.realization && !ref.active && ref.factor == 1.0 &&
          ref.a_hat > 1e-6 && ref.a_hat * 4 < 1.0) {
        EXPECT_NEAR(row.a_hat / ref.a_hat, 1.0 / (row.factor * row.factor), 1e-3);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 0);
  EXPECT_NO_THROW(NormRescaleRatio(rows, false, 0.5));
  EXPECT_THROW(NormRescaleRatio(rows, false, 3.0), ConfigError);
}

TEST(ErrorDistributionTest, SmokeShapes) {
  ExperimentConfig c = SmallConfig();
  c.seq_types = {SequenceType::kSphere};
  c.antennas = {64};
  c.trials = 5;
  c.error_samples = 200;
  const auto results = RunErrorDistribution(c);
  ASSERT_EQ(results.size(), 1u);
  const auto& r = results[0];
  const long long k = static_cast<long long>(r.a_true.sum());
  EXPECT_EQ(static_cast<long long>(r.empirical_one.size()), 5 * k);
  EXPECT_EQ(static_cast<long long>(r.empirical_zero.size()), 5 * (24 - k));
  EXPECT_GE(r.ks_zero, 0.0);
  EXPECT_LE(r.ks_zero, 1.0);
  EXPECT_EQ(r.predicted.curve.thresholds, c.Thresholds());
  const std::string dir = FreshDir("errordist");
  WriteErrorDistribution(results, dir);
  EXPECT_EQ(ReadCsv(dir + "/errordist_pmpf.csv").rows.size(), c.Thresholds().size());
}

TEST(BoundCheckTest, RowsPerBaseStation) {
  ExperimentConfig c;
  c.trials = 3;
  c.instance.devices_per_cell = {10};
  const auto rows = RunBoundCheck(c, {1, 7});
  EXPECT_EQ(rows.size(), 3u * (1 + 7));
  for (const auto& r : rows) EXPECT_LE(r.lhs, r.bound);
}

}  // namespace
}  // namespace covdet
