#include "covdet/snapshot.h"

#include <cstdint>
#include <cstdio>
#include <filesystem>

#include "covdet/csv.h"
#include "covdet/toml_lite.h"

namespace covdet {
namespace {

class Fnv1a {
 public:
  void Bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ULL;
    }
  }
  void Double(double v) { Bytes(&v, sizeof(v)); }
  std::uint64_t value() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

TomlValue IntArray(const std::vector<int>& v) {
  TomlValue::Array out;
  for (int x : v) out.emplace_back(x);
  return TomlValue(std::move(out));
}

std::vector<int> ReadIntArray(const TomlValue& v) {
  std::vector<int> out;
  for (const auto& x : v.AsArray()) out.push_back(static_cast<int>(x.AsInt()));
  return out;
}

}  // namespace

std::string InstanceDigest(const SystemInstance& instance) {
  Fnv1a h;
  for (Eigen::Index c = 0; c < instance.S.cols(); ++c) {
    for (Eigen::Index r = 0; r < instance.S.rows(); ++r) {
      h.Double(instance.S(r, c).real());
      h.Double(instance.S(r, c).imag());
    }
  }
  for (Eigen::Index c = 0; c < instance.gains.cols(); ++c) {
    for (Eigen::Index r = 0; r < instance.gains.rows(); ++r) h.Double(instance.gains(r, c));
  }
  h.Double(instance.sigma2);
  for (Eigen::Index i = 0; i < instance.a_true.size(); ++i) h.Double(instance.a_true(i));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h.value()));
  return buf;
}

void SaveInstance(const SystemInstance& instance, const std::string& dir) {
  std::filesystem::create_directories(dir);
  TomlDocument meta;
  meta.Set("layout", LayoutKindName(instance.layout.kind));
  meta.Set("cells", instance.num_cells());
  meta.Set("radius_m", instance.layout.radius);
  meta.Set("devices_per_cell", IntArray(instance.index.devices_per_cell()));
  meta.Set("active_per_cell", IntArray(instance.active_per_cell));
  meta.Set("length", instance.length());
  meta.Set("seq_type", SequenceTypeName(instance.seq_type));
  meta.Set("sigma2", instance.sigma2);
  meta.Set("seed", std::to_string(instance.seed));
  meta.Set("digest", InstanceDigest(instance));
  meta.Save(dir + "/meta.toml");

  const int L = instance.length();
  const int n = instance.num_devices();
  MatrixXd s_ri(L, 2 * n);
  for (int i = 0; i < n; ++i) {
    s_ri.col(2 * i) = instance.S.col(i).real();
    s_ri.col(2 * i + 1) = instance.S.col(i).imag();
  }
  WriteMatrixCsv(s_ri, dir + "/S.csv");
  WriteMatrixCsv(instance.gains, dir + "/G.csv");
  WriteMatrixCsv(instance.a_true, dir + "/a_true.csv");
  CsvWriter pos(dir + "/positions.csv", {"x_m", "y_m"});
  for (const Point& p : instance.device_positions) pos.Add(p.x).Add(p.y).EndRow();
}

SystemInstance LoadInstance(const std::string& dir) {
  const TomlDocument meta = TomlDocument::Load(dir + "/meta.toml");
  SystemInstance inst;
  inst.layout = BuildCellLayout(ParseLayoutKind(meta.At("layout").AsString()),
                                static_cast<int>(meta.At("cells").AsInt()),
                                meta.At("radius_m").AsDouble());
  inst.index = DeviceIndex(ReadIntArray(meta.At("devices_per_cell")));
  inst.active_per_cell = ReadIntArray(meta.At("active_per_cell"));
  inst.seq_type = ParseSequenceType(meta.At("seq_type").AsString());
  inst.sigma2 = meta.At("sigma2").AsDouble();
  inst.seed = std::stoull(meta.At("seed").AsString());

  const int n = inst.num_devices();
  const int L = static_cast<int>(meta.At("length").AsInt());
  const MatrixXd s_ri = ReadMatrixCsv(dir + "/S.csv");
  Require(s_ri.rows() == L && s_ri.cols() == 2 * n, "S.csv has the wrong shape");
  inst.S.resize(L, n);
  for (int i = 0; i < n; ++i) {
    for (int r = 0; r < L; ++r) inst.S(r, i) = Complex(s_ri(r, 2 * i), s_ri(r, 2 * i + 1));
  }
  inst.gains = ReadMatrixCsv(dir + "/G.csv");
  Require(inst.gains.rows() == inst.num_cells() && inst.gains.cols() == n,
          "G.csv has the wrong shape");
  const MatrixXd a = ReadMatrixCsv(dir + "/a_true.csv");
  Require(a.rows() == n && a.cols() == 1, "a_true.csv has the wrong shape");
  inst.a_true = a.col(0);
  const CsvTable pos = ReadCsv(dir + "/positions.csv");
  Require(static_cast<int>(pos.rows.size()) == n, "positions.csv has the wrong length");
  const int cx = pos.Column("x_m");
  const int cy = pos.Column("y_m");
  for (const auto& row : pos.rows) {
    inst.device_positions.push_back({ParseDouble(row[cx]), ParseDouble(row[cy])});
  }
  if (InstanceDigest(inst) != meta.At("digest").AsString()) {
    throw ConfigError("instance digest mismatch in " + dir);
  }
  return inst;
}

}  // namespace covdet
