#include "covdet/toml_lite.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "covdet/csv.h"

namespace covdet {

bool TomlValue::AsBool() const {
  if (!is_bool()) throw ConfigError("expected a boolean, got " + TomlFormat(*this));
  return std::get<bool>(data);
}

long long TomlValue::AsInt() const {
  if (!is_int()) throw ConfigError("expected an integer, got " + TomlFormat(*this));
  return std::get<long long>(data);
}

double TomlValue::AsDouble() const {
  if (is_int()) return static_cast<double>(std::get<long long>(data));
  if (!is_float()) throw ConfigError("expected a number, got " + TomlFormat(*this));
  return std::get<double>(data);
}

const std::string& TomlValue::AsString() const {
  if (!is_string()) throw ConfigError("expected a string, got " + TomlFormat(*this));
  return std::get<std::string>(data);
}

const TomlValue::Array& TomlValue::AsArray() const {
  if (!is_array()) throw ConfigError("expected an array, got " + TomlFormat(*this));
  return std::get<Array>(data);
}

namespace {

bool IsBareKeyChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class Parser {
 public:
  explicit Parser(const std::string& text) : text_(text) {}

  TomlDocument Run() {
    TomlDocument doc;
    std::string table;
    while (true) {
      SkipBlankLines();
      if (AtEnd()) break;
      if (Peek() == '[') {
        ++pos_;
        SkipSpaces();
        if (Peek() == '[') Fail("arrays of tables are not supported");
        table = ParseDottedKey();
        SkipSpaces();
        Expect(']');
      } else {
        const std::string key = ParseDottedKey();
        SkipSpaces();
        Expect('=');
        SkipSpaces();
        const std::string full = table.empty() ? key : table + "." + key;
        if (doc.Has(full)) Fail("duplicate key '" + full + "'");
        doc.Set(full, ParseValue());
      }
      EndOfLine();
    }
    return doc;
  }

 private:
  bool AtEnd() const { return pos_ >= text_.size(); }
  char Peek() const { return AtEnd() ? '\0' : text_[pos_]; }

  [[noreturn]] void Fail(const std::string& message) const {
    int line = 1;
    for (std::size_t i = 0; i < pos_ && i < text_.size(); ++i) line += text_[i] == '\n';
    throw ConfigError("toml line " + std::to_string(line) + ": " + message);
  }

  void Expect(char c) {
    if (Peek() != c) Fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void SkipSpaces() {
    while (Peek() == ' ' || Peek() == '\t') ++pos_;
  }

  void SkipComment() {
    if (Peek() != '#') return;
    while (!AtEnd() && Peek() != '\n') ++pos_;
  }

  // Whitespace, newlines and comments.
  void SkipBlankLines() {
    while (!AtEnd()) {
      const char c = Peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        ++pos_;
      } else if (c == '#') {
        SkipComment();
      } else {
        break;
      }
    }
  }

  void EndOfLine() {
    SkipSpaces();
    SkipComment();
    if (Peek() == '\r') ++pos_;
    if (!AtEnd() && Peek() != '\n') Fail("unexpected trailing characters");
  }

  std::string ParseKeyPart() {
    if (Peek() == '"' || Peek() == '\'') {
      std::string key = ParseString();
      if (key.find('.') != std::string::npos) Fail("quoted keys may not contain '.'");
      return key;
    }
    const std::size_t start = pos_;
    while (IsBareKeyChar(Peek())) ++pos_;
    if (pos_ == start) Fail("expected a key");
    return text_.substr(start, pos_ - start);
  }

  std::string ParseDottedKey() {
    std::string key = ParseKeyPart();
    SkipSpaces();
    while (Peek() == '.') {
      ++pos_;
      SkipSpaces();
      key += "." + ParseKeyPart();
      SkipSpaces();
    }
    return key;
  }

  std::string ParseString() {
    const char quote = Peek();
    ++pos_;
    if (Peek() == quote && pos_ + 1 < text_.size() && text_[pos_ + 1] == quote) {
      Fail("multi-line strings are not supported");
    }
    std::string out;
    while (true) {
      if (AtEnd() || Peek() == '\n') Fail("unterminated string");
      const char c = text_[pos_++];
      if (c == quote) break;
      if (c == '\\' && quote == '"') {
        if (AtEnd()) Fail("unterminated escape");
        const char e = text_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '"': out += '"'; break;
          case '\\': out += '\\'; break;
          default: Fail(std::string("unsupported escape \\") + e);
        }
      } else {
        out += c;
      }
    }
    return out;
  }

  TomlValue ParseArray() {
    Expect('[');
    TomlValue::Array items;
    while (true) {
      SkipBlankLines();
      if (Peek() == ']') {
        ++pos_;
        break;
      }
      items.push_back(ParseValue());
      SkipBlankLines();
      if (Peek() == ',') {
        ++pos_;
      } else if (Peek() != ']') {
        Fail("expected ',' or ']' in array");
      }
    }
    return TomlValue(std::move(items));
  }

  TomlValue ParseScalarToken() {
    const std::size_t start = pos_;
    while (!AtEnd()) {
      const char c = Peek();
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '+' || c == '-' ||
          c == '.') {
        ++pos_;
      } else {
        break;
      }
    }
    std::string token = text_.substr(start, pos_ - start);
    if (token.empty()) Fail("expected a value");
    if (token == "true") return TomlValue(true);
    if (token == "false") return TomlValue(false);
    std::string digits;
    for (char c : token) {
      if (c != '_') digits += c;
    }
    std::string body = digits;
    if (!body.empty() && (body[0] == '+' || body[0] == '-')) body = body.substr(1);
    if (body == "inf" || body == "nan") {
      const double v = body == "inf" ? INFINITY : std::nan("");
      return TomlValue(digits[0] == '-' ? -v : v);
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    if (!is_float) {
      long long v = 0;
      const char* first = digits.data();
      const char* last = first + digits.size();
      if (*first == '+') ++first;
      const auto r = std::from_chars(first, last, v);
      if (r.ec != std::errc() || r.ptr != last) Fail("bad integer '" + token + "'");
      return TomlValue(v);
    }
    try {
      return TomlValue(ParseDouble(digits));
    } catch (const ConfigError&) {
      Fail("bad number '" + token + "'");
    }
  }

  TomlValue ParseValue() {
    const char c = Peek();
    if (c == '"' || c == '\'') return TomlValue(ParseString());
    if (c == '[') return ParseArray();
    if (c == '{') Fail("inline tables are not supported");
    return ParseScalarToken();
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

std::string QuoteString(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string FormatKeyPart(const std::string& part) {
  bool bare = !part.empty();
  for (char c : part) bare = bare && IsBareKeyChar(c);
  return bare ? part : QuoteString(part);
}

}  // namespace

std::string TomlFormat(const TomlValue& value) {
  if (value.is_bool()) return std::get<bool>(value.data) ? "true" : "false";
  if (value.is_int()) return std::to_string(std::get<long long>(value.data));
  if (value.is_float()) {
    std::string s = FormatDouble(std::get<double>(value.data));
    // Keep floats recognizable as floats on re-read.
    if (s.find_first_of(".en") == std::string::npos) s += ".0";
    return s;
  }
  if (value.is_string()) return QuoteString(std::get<std::string>(value.data));
  std::string out = "[";
  const auto& items = std::get<TomlValue::Array>(value.data);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += TomlFormat(items[i]);
  }
  return out + "]";
}

TomlDocument TomlDocument::Parse(const std::string& text) { return Parser(text).Run(); }

TomlDocument TomlDocument::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return Parse(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

const TomlValue* TomlDocument::Find(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return &v;
  }
  return nullptr;
}

const TomlValue& TomlDocument::At(const std::string& key) const {
  const TomlValue* v = Find(key);
  if (!v) throw ConfigError("missing config key '" + key + "'");
  return *v;
}

void TomlDocument::Set(const std::string& key, TomlValue value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

std::string TomlDocument::Dump() const {
  std::vector<std::string> tables;
  std::map<std::string, std::vector<std::pair<std::string, const TomlValue*>>> by_table;
  for (const auto& [key, value] : entries_) {
    const auto dot = key.rfind('.');
    const std::string table = dot == std::string::npos ? "" : key.substr(0, dot);
    const std::string leaf = dot == std::string::npos ? key : key.substr(dot + 1);
    if (!by_table.count(table)) tables.push_back(table);
    by_table[table].emplace_back(leaf, &value);
  }
  // Root keys must precede any header.
  std::stable_partition(tables.begin(), tables.end(),
                        [](const std::string& t) { return t.empty(); });
  std::ostringstream out;
  bool first = true;
  for (const auto& table : tables) {
    if (!table.empty()) {
      if (!first) out << '\n';
      std::string header;
      std::size_t start = 0;
      while (true) {
        const auto dot = table.find('.', start);
        if (!header.empty()) header += '.';
        header += FormatKeyPart(table.substr(start, dot - start));
        if (dot == std::string::npos) break;
        start = dot + 1;
      }
      out << '[' << header << "]\n";
    }
    for (const auto& [leaf, value] : by_table[table]) {
      out << FormatKeyPart(leaf) << " = " << TomlFormat(*value) << '\n';
    }
    first = false;
  }
  return out.str();
}

void TomlDocument::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << Dump();
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace covdet
