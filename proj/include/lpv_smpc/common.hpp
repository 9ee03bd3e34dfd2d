#ifndef LPV_SMPC_COMMON_HPP
#define LPV_SMPC_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpv_smpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Invalid input or configuration (CLI exit code 2).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure failed to produce a usable result (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

/// Axis-aligned box {x | lower <= x <= upper}.
struct Box {
  Vec lower;
  Vec upper;

  Box() = default;
  Box(Vec lo, Vec hi) : lower(std::move(lo)), upper(std::move(hi)) {
    require(lower.size() == upper.size(), "Box: bound dimensions differ");
    require((lower.array() <= upper.array()).all(), "Box: lower bound exceeds upper bound");
  }

  static Box symmetric(Eigen::Index n, double radius) {
    return Box(Vec::Constant(n, -radius), Vec::Constant(n, radius));
  }

  Eigen::Index dim() const { return lower.size(); }

  bool contains(const Vec& x, double tol = 0.0) const {
    return x.size() == dim() && ((x.array() >= lower.array() - tol) && (x.array() <= upper.array() + tol)).all();
  }

  Vec clamp(const Vec& x) const { return x.cwiseMax(lower).cwiseMin(upper); }

  Vec width() const { return upper - lower; }

  bool has_origin_in_interior() const { return (lower.array() < 0.0).all() && (upper.array() > 0.0).all(); }
};

/// Row-major vectorization of a matrix.
inline Vec vec_rowmajor(const Mat& m) {
  Vec v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v(i * m.cols() + j) = m(i, j);
  return v;
}

inline Mat unvec_rowmajor(const Eigen::Ref<const Vec>& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw ValidationError("unvec_rowmajor: size mismatch");
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v(i * cols + j);
  return m;
}

inline std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

inline Vec from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<std::vector<double>> to_rows(const Mat& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return rows;
}

inline Mat from_rows(const std::vector<std::vector<double>>& rows, Eigen::Index cols_if_empty = 0) {
  if (rows.empty()) return Mat(0, cols_if_empty);
  const auto cols = static_cast<Eigen::Index>(rows.front().size());
  Mat m(static_cast<Eigen::Index>(rows.size()), cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(r.size()) != cols) throw ValidationError("from_rows: ragged matrix");
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = r[static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace lpv_smpc

#endif  // LPV_SMPC_COMMON_HPP
