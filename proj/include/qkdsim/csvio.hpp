#pragma once

// RFC-4180 CSV output and the per-run metadata record.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qkdsim/errors.hpp"

namespace qkd::app {

inline std::string csv_escape(const std::string& field) {
  const bool needs_quotes = field.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += "\"";
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : f_(path, std::ios::trunc) {
    if (!f_) throw ConfigError("csv: cannot open " + path);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) f_ << ',';
      f_ << csv_escape(fields[i]);
    }
    f_ << "\r\n";  // RFC 4180 line ending
  }

 private:
  std::ofstream f_;
};

inline std::string fmt_double(double v, int precision = 10) {
  std::ostringstream ss;
  ss.precision(precision);
  ss << v;
  return ss.str();
}

}  // namespace qkd::app
