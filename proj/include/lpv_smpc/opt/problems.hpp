#ifndef LPV_SMPC_OPT_PROBLEMS_HPP
#define LPV_SMPC_OPT_PROBLEMS_HPP

#include <string>

#include "lpv_smpc/common.hpp"

namespace lpv_smpc::opt {

/// Tolerances shared by every solver in this namespace.
struct SolverSettings {
  double feasibility_tol = 1e-8;
  double gap_tol = 1e-8;
  int max_iterations = 10000;
  /// Strict LMI inequalities are imposed as F(x) >= margin * I.
  double sdp_margin = 1e-6;
  /// Box on every SDP decision entry, keeps the barrier problem bounded.
  double sdp_variable_bound = 1e4;
};

enum class Status { Optimal, Infeasible, Unbounded, MaxIter, NumericalError };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "Optimal";
    case Status::Infeasible: return "Infeasible";
    case Status::Unbounded: return "Unbounded";
    case Status::MaxIter: return "MaxIter";
    case Status::NumericalError: return "NumericalError";
  }
  return "Unknown";
}

struct SolveStatus {
  Status status = Status::NumericalError;
  /// Populated only for Optimal and MaxIter.
  Vec primal;
  double objective = kInf;
  double primal_residual = kInf;
  double dual_residual = kInf;
  int iterations = 0;

  bool optimal() const { return status == Status::Optimal; }
};

/// min cost'x  s.t.  A_ineq x <= b_ineq,  A_eq x = b_eq,  lower <= x <= upper.
struct LinearProgram {
  Vec cost;
  Mat A_ineq;
  Vec b_ineq;
  Mat A_eq;
  Vec b_eq;
  Vec lower;  // -inf for none; empty means all -inf
  Vec upper;  // +inf for none; empty means all +inf

  explicit LinearProgram(Eigen::Index n = 0)
      : cost(Vec::Zero(n)), A_ineq(0, n), b_ineq(0), A_eq(0, n), b_eq(0),
        lower(Vec::Constant(n, -kInf)), upper(Vec::Constant(n, kInf)) {}

  Eigen::Index num_vars() const { return cost.size(); }

  void validate() const {
    const auto n = num_vars();
    require(A_ineq.cols() == n && A_ineq.rows() == b_ineq.size(), "LinearProgram: inequality dimensions inconsistent");
    require(A_eq.cols() == n && A_eq.rows() == b_eq.size(), "LinearProgram: equality dimensions inconsistent");
    require(lower.size() == n && upper.size() == n, "LinearProgram: bound dimensions inconsistent");
    require((lower.array() <= upper.array()).all(), "LinearProgram: lower bound exceeds upper bound");
    require(cost.allFinite() && A_ineq.allFinite() && A_eq.allFinite() && b_eq.allFinite(),
            "LinearProgram: non-finite data");
  }
};

/// min 0.5 x'Hx + linear'x  s.t.  A_ineq x <= b_ineq,  A_eq x = b_eq.
struct QuadraticProgram {
  Mat hessian;
  Vec linear;
  Mat A_ineq;
  Vec b_ineq;
  Mat A_eq;
  Vec b_eq;

  explicit QuadraticProgram(Eigen::Index n = 0)
      : hessian(Mat::Zero(n, n)), linear(Vec::Zero(n)), A_ineq(0, n), b_ineq(0), A_eq(0, n), b_eq(0) {}

  Eigen::Index num_vars() const { return linear.size(); }

  void validate() const {
    const auto n = num_vars();
    require(hessian.rows() == n && hessian.cols() == n, "QuadraticProgram: hessian dimensions inconsistent");
    require(A_ineq.cols() == n && A_ineq.rows() == b_ineq.size(), "QuadraticProgram: inequality dimensions inconsistent");
    require(A_eq.cols() == n && A_eq.rows() == b_eq.size(), "QuadraticProgram: equality dimensions inconsistent");
    require((hessian - hessian.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + hessian.cwiseAbs().maxCoeff()) || n == 0,
            "QuadraticProgram: hessian not symmetric");
    if (n > 0) {
      Eigen::SelfAdjointEigenSolver<Mat> eig(hessian, Eigen::EigenvaluesOnly);
      require(eig.eigenvalues().minCoeff() >= -1e-8 * (1.0 + hessian.cwiseAbs().maxCoeff()),
              "QuadraticProgram: hessian not positive semidefinite");
    }
  }

  double evaluate(const Vec& x) const { return 0.5 * x.dot(hessian * x) + linear.dot(x); }
};

}  // namespace lpv_smpc::opt

#endif  // LPV_SMPC_OPT_PROBLEMS_HPP
