#pragma once

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "w2eps/error.hpp"

namespace w2eps {

/// Shortest faithful rendering: 17 significant digits, fixed spellings for non-finite values.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

using CsvCell = std::variant<double, std::int64_t, std::uint64_t, std::string, bool>;

inline std::string format_cell(const CsvCell& c) {
  struct {
    std::string operator()(double x) const { return format_number(x); }
    std::string operator()(std::int64_t x) const { return std::to_string(x); }
    std::string operator()(std::uint64_t x) const { return std::to_string(x); }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(const std::string& s) const {
      if (s.find_first_of(",\"\n") == std::string::npos) return s;
      std::string q = "\"";
      for (char ch : s) {
        if (ch == '"') q += '"';
        q += ch;
      }
      return q + '"';
    }
  } f;
  return std::visit(f, c);
}

/// In-memory table with a fixed header; rows are written in insertion order.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<CsvCell> row) {
    if (row.size() != header_.size()) throw FormatError("csv row has " + std::to_string(row.size()) + " cells, header has " +
                                                         std::to_string(header_.size()));
    rows_.push_back(std::move(row));
  }

  /// Comment lines emitted before the header, each prefixed with "# ".
  void note(std::string line) { notes_.push_back(std::move(line)); }

  std::size_t rows() const { return rows_.size(); }
  const std::vector<std::string>& header() const { return header_; }

  void write(std::ostream& os) const {
    for (const auto& n : notes_) os << "# " << n << '\n';
    for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << header_[i];
    os << '\n';
    for (const auto& r : rows_) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << format_cell(r[i]);
      os << '\n';
    }
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open " + path + " for writing");
    write(f);
    if (!f) throw Error("write failed: " + path);
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::string> notes_;
  std::vector<std::vector<CsvCell>> rows_;
};

}  // namespace w2eps
