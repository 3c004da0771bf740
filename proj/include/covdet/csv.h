#ifndef COVDET_CSV_H_
#define COVDET_CSV_H_

#include <fstream>
#include <string>
#include <vector>

#include "covdet/common.h"

namespace covdet {

// Shortest decimal string that parses back to the same double.
std::string FormatDouble(double value);

double ParseDouble(const std::string& text);

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  CsvWriter& Add(const std::string& cell);
  CsvWriter& Add(double value);
  CsvWriter& Add(long long value);
  CsvWriter& Add(int value) { return Add(static_cast<long long>(value)); }
  void EndRow();

 private:
  std::ofstream out_;
  std::string path_;
  std::vector<std::string> row_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int Column(const std::string& name) const;
};

CsvTable ReadCsv(const std::string& path, bool has_header = true);

void WriteMatrixCsv(const MatrixXd& m, const std::string& path);
MatrixXd ReadMatrixCsv(const std::string& path);

}  // namespace covdet

#endif  // COVDET_CSV_H_
