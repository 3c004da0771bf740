#ifndef COVDET_SYSTEM_MODEL_H_
#define COVDET_SYSTEM_MODEL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "covdet/common.h"
#include "covdet/rng.h"

namespace covdet {

enum class LayoutKind { kHex, kSquare };

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double Distance(const Point& p, const Point& q);

struct CellLayout {
  LayoutKind kind = LayoutKind::kHex;
  int num_cells = 1;
  double radius = 500.0;  // meters
  std::vector<Point> bs_positions;
};

// Hex cells are flat-topped with circumradius R; base stations sit on the
// lattice x = 1.5 R q, y = sqrt(3) R (r + q/2) and are filled ring by ring
// around the origin. Square cells have side 2R on a centered m x m grid.
CellLayout BuildCellLayout(LayoutKind kind, int num_cells, double radius);

LayoutKind ParseLayoutKind(const std::string& name);
std::string LayoutKindName(LayoutKind kind);

// True when `p`, expressed relative to its own base station, lies in the cell.
bool InsideCell(LayoutKind kind, double radius, const Point& p);

// Uniform device positions, cell by cell. Devices closer than min_dist_m to
// their own base station are redrawn.
std::vector<Point> PlaceDevices(const CellLayout& layout,
                                const std::vector<int>& devices_per_cell,
                                double min_dist_m, Rng& rng);

double PathLossGain(double distance_km);

double NoiseVarianceFromBudget(double tx_dbm, double noise_dbm_per_hz,
                               double bandwidth_hz);

enum class SequenceType { kQpsk = 1, kSphere = 2, kGaussian = 3 };

SequenceType ParseSequenceType(const std::string& name);
std::string SequenceTypeName(SequenceType type);

// L x num_devices signature matrix. Types I and II have column norm sqrt(L).
MatrixXcd GenerateSequences(SequenceType type, int length, int num_devices,
                            Rng& rng);

// B x (total devices) matrix of linear gains, entry (b, i) = g from BS b to
// device i.
MatrixXd ComputeFading(const CellLayout& layout,
                       const std::vector<Point>& device_positions);

VectorXd SampleActivity(const DeviceIndex& index,
                        const std::vector<int>& active_per_cell, Rng& rng);

struct SystemInstance {
  CellLayout layout;
  DeviceIndex index;
  std::vector<int> active_per_cell;
  SequenceType seq_type = SequenceType::kQpsk;
  std::vector<Point> device_positions;
  MatrixXcd S;      // L x BN
  MatrixXd gains;   // B x BN
  double sigma2 = 1.0;
  VectorXd a_true;  // BN, binary
  std::uint64_t seed = 0;

  int num_cells() const { return layout.num_cells; }
  int num_devices() const { return index.num_devices(); }
  int length() const { return static_cast<int>(S.rows()); }
};

struct InstanceConfig {
  LayoutKind layout = LayoutKind::kHex;
  int num_cells = 1;
  double radius = 500.0;
  std::vector<int> devices_per_cell{40};  // one entry broadcasts to all cells
  std::vector<int> active_per_cell{5};
  int length = 16;
  SequenceType seq_type = SequenceType::kQpsk;
  double min_dist_m = 10.0;
  double tx_dbm = 23.0;
  double noise_dbm_per_hz = -169.0;
  double bandwidth_hz = 1e7;
  // When positive, overrides the link budget.
  double sigma2 = 0.0;
};

// Expands a possibly single-entry per-cell vector to num_cells entries.
std::vector<int> PerCell(const std::vector<int>& values, int num_cells);

SystemInstance GenerateInstance(const InstanceConfig& config, std::uint64_t seed);

struct SampleCovariances {
  std::vector<MatrixXcd> mats;
  int num_antennas = 0;
};

// Draws Rayleigh channels and noise from the (kChannels, kNoise) substreams of
// `rng` and returns the B sample covariances.
SampleCovariances SimulateReceived(const SystemInstance& instance,
                                   int num_antennas, const Rng& rng);

// Sigma_b = S diag(g_b .* a) S^H + sigma2 I.
MatrixXcd ModelCovariance(const MatrixXcd& S, const VectorXd& gains_row,
                          const VectorXd& a, double sigma2);

}  // namespace covdet

#endif  // COVDET_SYSTEM_MODEL_H_
