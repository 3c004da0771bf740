#include "covdet/system_model.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace covdet {

DeviceIndex::DeviceIndex(std::vector<int> devices_per_cell)
    : devices_per_cell_(std::move(devices_per_cell)) {
  offsets_.reserve(devices_per_cell_.size());
  for (std::size_t b = 0; b < devices_per_cell_.size(); ++b) {
    Require(devices_per_cell_[b] >= 0, "device count must be nonnegative");
    offsets_.push_back(total_);
    for (int n = 0; n < devices_per_cell_[b]; ++n) {
      cell_of_.push_back(static_cast<int>(b));
    }
    total_ += devices_per_cell_[b];
  }
}

double Distance(const Point& p, const Point& q) {
  return std::hypot(p.x - q.x, p.y - q.y);
}

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

// Axial hex coordinates ordered ring by ring. Ring k starts at (-k, k) and
// walks k steps along each of the six lattice directions.
std::vector<std::pair<int, int>> HexAxialCells(int count) {
  static const std::array<std::pair<int, int>, 6> kDirections = {
      std::pair{1, 0}, std::pair{1, -1}, std::pair{0, -1},
      std::pair{-1, 0}, std::pair{-1, 1}, std::pair{0, 1}};
  std::vector<std::pair<int, int>> cells;
  cells.emplace_back(0, 0);
  for (int ring = 1; static_cast<int>(cells.size()) < count; ++ring) {
    int q = -ring;
    int r = ring;
    for (const auto& [dq, dr] : kDirections) {
      for (int step = 0; step < ring; ++step) {
        if (static_cast<int>(cells.size()) >= count) break;
        cells.emplace_back(q, r);
        q += dq;
        r += dr;
      }
    }
  }
  cells.resize(count);
  return cells;
}

}  // namespace

CellLayout BuildCellLayout(LayoutKind kind, int num_cells, double radius) {
  Require(num_cells >= 1, "number of cells must be at least 1");
  Require(radius > 0.0, "cell radius must be positive");
  CellLayout layout;
  layout.kind = kind;
  layout.num_cells = num_cells;
  layout.radius = radius;
  if (kind == LayoutKind::kHex) {
    for (const auto& [q, r] : HexAxialCells(num_cells)) {
      layout.bs_positions.push_back(
          {1.5 * radius * q, kSqrt3 * radius * (r + 0.5 * q)});
    }
  } else {
    const int side = static_cast<int>(std::lround(std::sqrt(num_cells)));
    Require(side * side == num_cells,
            "square layout needs a perfect-square number of cells");
    const double center = 0.5 * (side - 1);
    for (int i = 0; i < side; ++i) {
      for (int j = 0; j < side; ++j) {
        layout.bs_positions.push_back(
            {2.0 * radius * (j - center), 2.0 * radius * (center - i)});
      }
    }
    // Keep the BS nearest the origin first so cell 0 is the central cell.
    std::stable_sort(layout.bs_positions.begin(), layout.bs_positions.end(),
                     [](const Point& p, const Point& q) {
                       return std::hypot(p.x, p.y) < std::hypot(q.x, q.y) - 1e-9;
                     });
  }
  return layout;
}

LayoutKind ParseLayoutKind(const std::string& name) {
  if (name == "hex") return LayoutKind::kHex;
  if (name == "square") return LayoutKind::kSquare;
  throw ConfigError("unsupported layout kind: " + name);
}

std::string LayoutKindName(LayoutKind kind) {
  return kind == LayoutKind::kHex ? "hex" : "square";
}

bool InsideCell(LayoutKind kind, double radius, const Point& p) {
  const double ax = std::abs(p.x);
  const double ay = std::abs(p.y);
  if (kind == LayoutKind::kSquare) return ax <= radius && ay <= radius;
  return ay <= 0.5 * kSqrt3 * radius && kSqrt3 * ax + ay <= kSqrt3 * radius;
}

std::vector<Point> PlaceDevices(const CellLayout& layout,
                                const std::vector<int>& devices_per_cell,
                                double min_dist_m, Rng& rng) {
  Require(min_dist_m >= 0.0 && min_dist_m < layout.radius,
          "min_dist_m must lie in [0, R)");
  Require(static_cast<int>(devices_per_cell.size()) == layout.num_cells,
          "devices_per_cell must have one entry per cell");
  constexpr int kMaxAttempts = 10000;
  const double R = layout.radius;
  const double half_height = layout.kind == LayoutKind::kHex ? 0.5 * kSqrt3 * R : R;
  std::vector<Point> positions;
  for (int b = 0; b < layout.num_cells; ++b) {
    const Point& bs = layout.bs_positions[b];
    for (int n = 0; n < devices_per_cell[b]; ++n) {
      int attempts = 0;
      while (true) {
        if (++attempts > kMaxAttempts) {
          throw NumericalError("device placement rejection sampling failed");
        }
        const Point local{rng.Uniform(-R, R), rng.Uniform(-half_height, half_height)};
        if (!InsideCell(layout.kind, R, local)) continue;
        if (std::hypot(local.x, local.y) < min_dist_m) continue;
        positions.push_back({bs.x + local.x, bs.y + local.y});
        break;
      }
    }
  }
  return positions;
}

double PathLossGain(double distance_km) {
  Require(distance_km > 0.0, "distance must be positive");
  return std::pow(10.0, -(128.1 + 37.6 * std::log10(distance_km)) / 10.0);
}

double NoiseVarianceFromBudget(double tx_dbm, double noise_dbm_per_hz,
                               double bandwidth_hz) {
  Require(bandwidth_hz > 0.0, "bandwidth must be positive");
  return std::pow(10.0,
                  (noise_dbm_per_hz + 10.0 * std::log10(bandwidth_hz) - tx_dbm) / 10.0);
}

SequenceType ParseSequenceType(const std::string& name) {
  if (name == "I" || name == "1" || name == "qpsk") return SequenceType::kQpsk;
  if (name == "II" || name == "2" || name == "sphere") return SequenceType::kSphere;
  if (name == "III" || name == "3" || name == "gaussian") return SequenceType::kGaussian;
  throw ConfigError("unknown sequence type: " + name);
}

std::string SequenceTypeName(SequenceType type) {
  switch (type) {
    case SequenceType::kQpsk: return "I";
    case SequenceType::kSphere: return "II";
    case SequenceType::kGaussian: return "III";
  }
  return "?";
}

MatrixXcd GenerateSequences(SequenceType type, int length, int num_devices,
                            Rng& rng) {
  Require(length >= 2, "sequence length must be at least 2");
  Require(num_devices >= 0, "device count must be nonnegative");
  const double h = std::sqrt(0.5);
  MatrixXcd S(length, num_devices);
  for (int col = 0; col < num_devices; ++col) {
    for (int l = 0; l < length; ++l) {
      if (type == SequenceType::kQpsk) {
        const std::uint64_t bits = rng.NextU64();
        S(l, col) = {(bits & 1) ? h : -h, (bits & 2) ? h : -h};
      } else {
        S(l, col) = rng.ComplexNormal();
      }
    }
    if (type == SequenceType::kSphere) {
      S.col(col) *= std::sqrt(static_cast<double>(length)) / S.col(col).norm();
    }
  }
  return S;
}

MatrixXd ComputeFading(const CellLayout& layout,
                       const std::vector<Point>& device_positions) {
  const int num_devices = static_cast<int>(device_positions.size());
  MatrixXd gains(layout.num_cells, num_devices);
  for (int b = 0; b < layout.num_cells; ++b) {
    for (int i = 0; i < num_devices; ++i) {
      const double d = Distance(layout.bs_positions[b], device_positions[i]);
      if (!(d > 0.0)) throw ConfigError("device coincides with a base station");
      gains(b, i) = PathLossGain(d / 1000.0);
    }
  }
  return gains;
}

VectorXd SampleActivity(const DeviceIndex& index,
                        const std::vector<int>& active_per_cell, Rng& rng) {
  Require(static_cast<int>(active_per_cell.size()) == index.num_cells(),
          "active_per_cell must have one entry per cell");
  VectorXd a = VectorXd::Zero(index.num_devices());
  for (int b = 0; b < index.num_cells(); ++b) {
    const int n = index.devices_in(b);
    const int k = active_per_cell[b];
    Require(k >= 0 && k <= n, "active count must lie in [0, N]");
    std::vector<int> perm = rng.Permutation(n);
    for (int t = 0; t < k; ++t) a(index.Offset(b) + perm[t]) = 1.0;
  }
  return a;
}

std::vector<int> PerCell(const std::vector<int>& values, int num_cells) {
  Require(!values.empty(), "per-cell vector is empty");
  if (values.size() == 1) return std::vector<int>(num_cells, values.front());
  Require(static_cast<int>(values.size()) == num_cells,
          "per-cell vector length must be 1 or B");
  return values;
}

SystemInstance GenerateInstance(const InstanceConfig& config, std::uint64_t seed) {
  Rng root(seed);
  SystemInstance inst;
  inst.seed = seed;
  inst.layout = BuildCellLayout(config.layout, config.num_cells, config.radius);
  inst.index = DeviceIndex(PerCell(config.devices_per_cell, config.num_cells));
  inst.active_per_cell = PerCell(config.active_per_cell, config.num_cells);
  inst.seq_type = config.seq_type;
  Rng pos_rng = root.Split(Stream::kPositions);
  inst.device_positions =
      PlaceDevices(inst.layout, inst.index.devices_per_cell(), config.min_dist_m, pos_rng);
  Rng seq_rng = root.Split(Stream::kSequences);
  inst.S = GenerateSequences(config.seq_type, config.length, inst.num_devices(), seq_rng);
  inst.gains = ComputeFading(inst.layout, inst.device_positions);
  inst.sigma2 = config.sigma2 > 0.0
                    ? config.sigma2
                    : NoiseVarianceFromBudget(config.tx_dbm, config.noise_dbm_per_hz,
                                              config.bandwidth_hz);
  Rng act_rng = root.Split(Stream::kActivity);
  inst.a_true = SampleActivity(inst.index, inst.active_per_cell, act_rng);
  return inst;
}

SampleCovariances SimulateReceived(const SystemInstance& instance,
                                   int num_antennas, const Rng& rng) {
  Require(num_antennas >= 1, "antenna count must be at least 1");
  Rng chan_rng = rng.Split(Stream::kChannels);
  Rng noise_rng = rng.Split(Stream::kNoise);
  const int L = instance.length();
  const int M = num_antennas;
  std::vector<int> active;
  for (int i = 0; i < instance.num_devices(); ++i) {
    if (instance.a_true(i) > 0.0) active.push_back(i);
  }
  const double noise_scale = std::sqrt(instance.sigma2);
  SampleCovariances out;
  out.num_antennas = M;
  for (int b = 0; b < instance.num_cells(); ++b) {
    MatrixXcd weighted(L, active.size());
    MatrixXcd H(active.size(), M);
    for (std::size_t t = 0; t < active.size(); ++t) {
      const int i = active[t];
      weighted.col(t) =
          instance.S.col(i) * std::sqrt(instance.gains(b, i) * instance.a_true(i));
      for (int m = 0; m < M; ++m) H(t, m) = chan_rng.ComplexNormal();
    }
    MatrixXcd Y(L, M);
    for (int l = 0; l < L; ++l) {
      for (int m = 0; m < M; ++m) Y(l, m) = noise_scale * noise_rng.ComplexNormal();
    }
    if (!active.empty()) Y.noalias() += weighted * H;
    MatrixXcd cov = (Y * Y.adjoint()) / static_cast<double>(M);
    out.mats.push_back(0.5 * (cov + cov.adjoint()));
  }
  return out;
}

MatrixXcd ModelCovariance(const MatrixXcd& S, const VectorXd& gains_row,
                          const VectorXd& a, double sigma2) {
  const VectorXd w = gains_row.cwiseProduct(a);
  MatrixXcd cov = S * w.asDiagonal() * S.adjoint();
  cov.diagonal().array() += sigma2;
  return 0.5 * (cov + cov.adjoint());
}

}  // namespace covdet
