#ifndef COVDET_COMMON_H_
#define COVDET_COMMON_H_

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace covdet {

using Complex = std::complex<double>;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Raised when a caller-supplied configuration violates a precondition.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a numerical routine cannot produce a trustworthy result
// (non-PD covariance, infeasible rank-one step, solver breakdown).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void Require(bool condition, const std::string& message) {
  if (!condition) throw ConfigError(message);
}

// Index bookkeeping for devices laid out cell by cell: device i belongs to
// cell CellOf(i) and the block of cell b starts at Offset(b).
class DeviceIndex {
 public:
  DeviceIndex() = default;
  explicit DeviceIndex(std::vector<int> devices_per_cell);

  int num_cells() const { return static_cast<int>(devices_per_cell_.size()); }
  int num_devices() const { return total_; }
  int devices_in(int cell) const { return devices_per_cell_[cell]; }
  int Offset(int cell) const { return offsets_[cell]; }
  int CellOf(int device) const { return cell_of_[device]; }
  const std::vector<int>& devices_per_cell() const { return devices_per_cell_; }

 private:
  std::vector<int> devices_per_cell_;
  std::vector<int> offsets_;
  std::vector<int> cell_of_;
  int total_ = 0;
};

}  // namespace covdet

#endif  // COVDET_COMMON_H_
