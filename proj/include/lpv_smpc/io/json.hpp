#ifndef LPV_SMPC_IO_JSON_HPP
#define LPV_SMPC_IO_JSON_HPP

#include <nlohmann/json.hpp>

#include <string>

#include "lpv_smpc/common.hpp"
#include "lpv_smpc/io/csv.hpp"

namespace lpv_smpc::io {

using Json = nlohmann::json;

inline Json vec_json(const Vec& v) { return Json(to_std(v)); }

inline Vec json_vec(const Json& j) { return from_std(j.get<std::vector<double>>()); }

/// Matrices are stored as a list of rows plus explicit shape (so 0-row matrices survive).
inline Json mat_json(const Mat& m) {
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", to_rows(m)}};
}

inline Mat json_mat(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  Mat m = from_rows(j.at("data").get<std::vector<std::vector<double>>>(), cols);
  if (m.rows() != rows || m.cols() != cols) throw ValidationError("JSON matrix: shape mismatch");
  return m;
}

inline void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(1) + "\n"); }

inline Json read_json(const std::string& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::exception& e) {
    throw ValidationError("malformed JSON in " + path + ": " + e.what());
  }
}

}  // namespace lpv_smpc::io

#endif  // LPV_SMPC_IO_JSON_HPP
