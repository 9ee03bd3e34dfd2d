#ifndef LPV_SMPC_IO_CSV_HPP
#define LPV_SMPC_IO_CSV_HPP

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "lpv_smpc/common.hpp"

namespace lpv_smpc::io {

/// Shortest text that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  Mat data;

  Eigen::Index column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<Eigen::Index>(i);
    throw ValidationError("CSV: missing column " + name);
  }
};

inline std::string to_csv(const CsvTable& t) {
  require(static_cast<Eigen::Index>(t.header.size()) == t.data.cols(), "CSV: header/data width mismatch");
  std::ostringstream os;
  for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
  os << "\n";
  for (Eigen::Index r = 0; r < t.data.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.data.cols(); ++c) os << (c ? "," : "") << format_double(t.data(r, c));
    os << "\n";
  }
  return os.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot write " + path);
  f << text;
  if (!f) throw ValidationError("write failed for " + path);
}

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

inline void write_csv(const std::string& path, const CsvTable& t) { write_text(path, to_csv(t)); }

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("CSV: empty input");
  {
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) t.header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw ValidationError("CSV: bad number '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != t.header.size()) throw ValidationError("CSV: ragged row");
    rows.push_back(std::move(row));
  }
  t.data = from_rows(rows, static_cast<Eigen::Index>(t.header.size()));
  return t;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path)); }

/// Column names prefix_1 .. prefix_n.
inline std::vector<std::string> numbered(const std::string& prefix, Eigen::Index n) {
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= n; ++i) out.push_back(prefix + "_" + std::to_string(i));
  return out;
}

}  // namespace lpv_smpc::io

#endif  // LPV_SMPC_IO_CSV_HPP
