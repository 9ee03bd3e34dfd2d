#ifndef LPV_SMPC_LPV_METRICS_HPP
#define LPV_SMPC_LPV_METRICS_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "lpv_smpc/lpv/system.hpp"

namespace lpv_smpc::lpv {

/// Best fit ratio per channel (columns), in percent: 100 * max(1 - |x - xh| / |x - mean(x)|, 0).
inline Vec bfr(const Mat& reference, const Mat& predicted) {
  require(reference.rows() == predicted.rows() && reference.cols() == predicted.cols(), "bfr: shape mismatch");
  require(reference.rows() >= 2, "bfr: need at least two samples");
  Vec out(reference.cols());
  for (Eigen::Index c = 0; c < reference.cols(); ++c) {
    const Vec ref = reference.col(c);
    const double denom = (ref.array() - ref.mean()).matrix().norm();
    if (denom == 0.0) throw ValidationError("bfr: constant reference channel " + std::to_string(c + 1));
    const double num = (ref - predicted.col(c)).norm();
    out(c) = 100.0 * std::max(1.0 - num / denom, 0.0);
  }
  return out;
}

struct Violation {
  int k = 0;
  std::string kind;  // "state" or "input"
  int index = 0;     // channel, zero-based
  double value = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct SafetyReport {
  std::vector<Violation> violations;
  bool safe() const { return violations.empty(); }
};

/// Every (k, constraint) violation of the state and input boxes along a trajectory.
inline SafetyReport safety_monitor(const Trajectory& t, const Box& X, const Box& U, double tol = 0.0) {
  SafetyReport r;
  for (Eigen::Index k = 0; k < t.states.rows(); ++k)
    for (Eigen::Index i = 0; i < t.states.cols(); ++i) {
      const double v = t.states(k, i);
      if (v > X.upper(i) + tol || v < X.lower(i) - tol)
        r.violations.push_back({static_cast<int>(k), "state", static_cast<int>(i), v, X.lower(i), X.upper(i)});
    }
  for (Eigen::Index k = 0; k < t.inputs.rows(); ++k)
    for (Eigen::Index i = 0; i < t.inputs.cols(); ++i) {
      const double v = t.inputs(k, i);
      if (v > U.upper(i) + tol || v < U.lower(i) - tol)
        r.violations.push_back({static_cast<int>(k), "input", static_cast<int>(i), v, U.lower(i), U.upper(i)});
    }
  return r;
}

/// Empirical delta: fraction of runs with at least one violation.
inline double empirical_violation_rate(const std::vector<SafetyReport>& reports) {
  if (reports.empty()) return 0.0;
  const auto bad = std::count_if(reports.begin(), reports.end(), [](const SafetyReport& r) { return !r.safe(); });
  return static_cast<double>(bad) / static_cast<double>(reports.size());
}

}  // namespace lpv_smpc::lpv

#endif  // LPV_SMPC_LPV_METRICS_HPP
