#ifndef COVDET_TOML_LITE_H_
#define COVDET_TOML_LITE_H_

#include <string>
#include <variant>
#include <vector>

#include "covdet/common.h"

namespace covdet {

// The subset of TOML used by run configs: [table] and [a.b] headers, bare or
// quoted keys, basic and literal strings, integers, floats (including inf and
// nan), booleans and arrays of those (arrays may span lines and nest).
// Inline tables, arrays of tables, dates and multi-line strings are rejected.
struct TomlValue {
  using Array = std::vector<TomlValue>;
  std::variant<bool, long long, double, std::string, Array> data;

  TomlValue() : data(false) {}
  TomlValue(bool v) : data(v) {}
  TomlValue(int v) : data(static_cast<long long>(v)) {}
  TomlValue(long long v) : data(v) {}
  TomlValue(double v) : data(v) {}
  TomlValue(const char* v) : data(std::string(v)) {}
  TomlValue(std::string v) : data(std::move(v)) {}
  TomlValue(Array v) : data(std::move(v)) {}

  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_int() const { return std::holds_alternative<long long>(data); }
  bool is_float() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  // Typed accessors throw ConfigError on a mismatch. AsDouble accepts ints.
  bool AsBool() const;
  long long AsInt() const;
  double AsDouble() const;
  const std::string& AsString() const;
  const Array& AsArray() const;

  bool operator==(const TomlValue& other) const { return data == other.data; }
};

// Flat, insertion-ordered map from dotted keys ("solver.epsilon") to values.
class TomlDocument {
 public:
  static TomlDocument Parse(const std::string& text);
  static TomlDocument Load(const std::string& path);

  bool Has(const std::string& key) const { return Find(key) != nullptr; }
  const TomlValue* Find(const std::string& key) const;
  const TomlValue& At(const std::string& key) const;

  // Inserts or replaces.
  void Set(const std::string& key, TomlValue value);

  const std::vector<std::pair<std::string, TomlValue>>& entries() const { return entries_; }

  // Root keys first, then one [table] block per prefix in first-seen order.
  std::string Dump() const;
  void Save(const std::string& path) const;

 private:
  std::vector<std::pair<std::string, TomlValue>> entries_;
};

std::string TomlFormat(const TomlValue& value);

}  // namespace covdet

#endif  // COVDET_TOML_LITE_H_
