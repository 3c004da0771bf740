#include "covdet/csv.h"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace covdet {

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

double ParseDouble(const std::string& text) {
  if (text == "nan") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc() || result.ptr != last) {
    throw ConfigError("cannot parse number: '" + text + "'");
  }
  return value;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path, std::ios::binary), path_(path), columns_(header.size()) {
  if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& h : header) Add(h);
  EndRow();
}

CsvWriter& CsvWriter::Add(const std::string& cell) {
  row_.push_back(cell);
  return *this;
}

CsvWriter& CsvWriter::Add(double value) { return Add(FormatDouble(value)); }

CsvWriter& CsvWriter::Add(long long value) { return Add(std::to_string(value)); }

void CsvWriter::EndRow() {
  if (row_.size() != columns_) {
    throw std::logic_error("csv row width mismatch in " + path_);
  }
  for (std::size_t i = 0; i < row_.size(); ++i) {
    if (i) out_ << ',';
    out_ << row_[i];
  }
  out_ << '\n';
  row_.clear();
  if (!out_) throw std::runtime_error("write failed: " + path_);
}

int CsvTable::Column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  throw ConfigError("missing csv column: " + name);
}

namespace {

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable ReadCsv(const std::string& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first && has_header) {
      table.header = SplitLine(line);
    } else {
      table.rows.push_back(SplitLine(line));
    }
    first = false;
  }
  return table;
}

void WriteMatrixCsv(const MatrixXd& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ',';
      out << FormatDouble(m(r, c));
    }
    out << '\n';
  }
}

MatrixXd ReadMatrixCsv(const std::string& path) {
  const CsvTable table = ReadCsv(path, /*has_header=*/false);
  if (table.rows.empty()) return MatrixXd(0, 0);
  MatrixXd m(table.rows.size(), table.rows.front().size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r].size() != static_cast<std::size_t>(m.cols())) {
      throw ConfigError("ragged matrix csv: " + path);
    }
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = ParseDouble(table.rows[r][c]);
  }
  return m;
}

}  // namespace covdet
