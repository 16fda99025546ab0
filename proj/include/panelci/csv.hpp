#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <boost/tokenizer.hpp>

#include "panelci/errors.hpp"

namespace panelci::csv {

/// Splits one CSV line, honouring double-quoted fields.
inline std::vector<std::string> split_line(std::string line) {
  using Sep = boost::escaped_list_separator<char>;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  boost::tokenizer<Sep> tok(line, Sep('\\', ',', '"'));
  return {tok.begin(), tok.end()};
}

/// Sequential reader over a CSV file with a mandatory header row.
class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw IoError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in_, line)) throw ValidationError("'" + path + "' is empty; a header row is required");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
    try {
      header_ = split_line(line);
    } catch (const boost::escaped_list_error& e) {
      throw ValidationError("malformed header in '" + path + "': " + e.what());
    }
  }

  const std::vector<std::string>& header() const { return header_; }

  /// Column index for a header name, or throws naming the missing column.
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == name) return i;
    throw ValidationError("'" + path_ + "' has no column '" + name + "'");
  }

  /// Reads the next non-empty row. `row` is the 1-based data row number.
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++row_;
      if (line.empty() || line == "\r") continue;
      try {
        fields = split_line(line);
      } catch (const boost::escaped_list_error& e) {
        throw ValidationError("row " + std::to_string(row_) + ": malformed CSV (" + e.what() + ")");
      }
      return true;
    }
    if (in_.bad()) throw IoError("read error on '" + path_ + "'");
    return false;
  }

  std::size_t row() const { return row_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::vector<std::string> header_;
  std::size_t row_ = 0;
};

inline std::string escape(const std::string& field) {
  if (field.find_first_of(",\"\n\\") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

/// Round-trip (17 significant digit) formatting for numeric output.
inline std::string number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace panelci::csv
