#ifndef LPV_SMPC_LPV_SYSTEM_HPP
#define LPV_SMPC_LPV_SYSTEM_HPP

#include <functional>
#include <string>
#include <utility>

#include "lpv_smpc/common.hpp"

namespace lpv_smpc::lpv {

/// theta -> (A(theta), B(theta)) with fixed output shapes.
class MatrixFunction {
 public:
  using Evaluator = std::function<std::pair<Mat, Mat>(const Vec&)>;

  MatrixFunction() = default;
  MatrixFunction(Eigen::Index n_x, Eigen::Index n_u, Eigen::Index n_theta, Evaluator f)
      : n_x_(n_x), n_u_(n_u), n_theta_(n_theta), f_(std::move(f)) {
    require(n_x > 0 && n_u > 0 && n_theta >= 0, "MatrixFunction: invalid dimensions");
  }

  Eigen::Index n_x() const { return n_x_; }
  Eigen::Index n_u() const { return n_u_; }
  Eigen::Index n_theta() const { return n_theta_; }

  std::pair<Mat, Mat> operator()(const Vec& theta) const {
    require(theta.size() == n_theta_, "MatrixFunction: scheduling dimension mismatch");
    auto ab = f_(theta);
    if (ab.first.rows() != n_x_ || ab.first.cols() != n_x_ || ab.second.rows() != n_x_ || ab.second.cols() != n_u_)
      throw NumericalError("MatrixFunction: evaluator returned wrong shapes");
    return ab;
  }

  Vec next_state(const Vec& theta, const Vec& x, const Vec& u) const {
    require(x.size() == n_x_ && u.size() == n_u_, "MatrixFunction: state/input dimension mismatch");
    const auto [A, B] = (*this)(theta);
    return A * x + B * u;
  }

  /// Constant (theta-independent) dynamics.
  static MatrixFunction constant(const Mat& A, const Mat& B, Eigen::Index n_theta) {
    require(A.rows() == A.cols() && B.rows() == A.rows(), "MatrixFunction::constant: shape mismatch");
    return MatrixFunction(A.rows(), B.cols(), n_theta, [A, B](const Vec&) { return std::make_pair(A, B); });
  }

 private:
  Eigen::Index n_x_ = 0;
  Eigen::Index n_u_ = 0;
  Eigen::Index n_theta_ = 0;
  Evaluator f_;
};

/// x+ = A(theta) x + B(theta) u with box state, input and scheduling sets.
struct LpvPlant {
  std::string name;
  MatrixFunction dynamics;
  Box state_set;
  Box input_set;
  Box sched_set;

  LpvPlant() = default;
  LpvPlant(std::string name_, MatrixFunction dyn, Box X, Box U, Box Theta)
      : name(std::move(name_)), dynamics(std::move(dyn)), state_set(std::move(X)), input_set(std::move(U)),
        sched_set(std::move(Theta)) {
    require(state_set.dim() == dynamics.n_x(), "LpvPlant: state set dimension mismatch");
    require(input_set.dim() == dynamics.n_u(), "LpvPlant: input set dimension mismatch");
    require(sched_set.dim() == dynamics.n_theta(), "LpvPlant: scheduling set dimension mismatch");
    require(state_set.has_origin_in_interior(), "LpvPlant: origin must be interior to the state set");
    require(input_set.has_origin_in_interior(), "LpvPlant: origin must be interior to the input set");
  }

  Eigen::Index n_x() const { return dynamics.n_x(); }
  Eigen::Index n_u() const { return dynamics.n_u(); }
  Eigen::Index n_theta() const { return dynamics.n_theta(); }
};

inline Vec step(const LpvPlant& plant, const Vec& x, const Vec& u, const Vec& theta) {
  return plant.dynamics.next_state(theta, x, u);
}

/// Stage cost weights l(x, u) = x'Qx + u'Ru.
struct CostConfig {
  Mat Q;
  Mat R;

  CostConfig() = default;
  CostConfig(Mat Q_, Mat R_) : Q(std::move(Q_)), R(std::move(R_)) { validate(); }

  void validate() const {
    auto spd = [](const Mat& M) {
      if (M.rows() == 0 || M.rows() != M.cols()) return false;
      if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + M.cwiseAbs().maxCoeff())) return false;
      Eigen::SelfAdjointEigenSolver<Mat> eig(M, Eigen::EigenvaluesOnly);
      return eig.eigenvalues().minCoeff() > 0.0;
    };
    require(spd(Q), "CostConfig: Q must be symmetric positive definite");
    require(spd(R), "CostConfig: R must be symmetric positive definite");
  }

  double stage(const Vec& x, const Vec& u) const { return x.dot(Q * x) + u.dot(R * u); }
};

/// Closed-loop or open-loop run: states has one more row than inputs and scheds.
struct Trajectory {
  Mat states;  // (K+1) x n_x
  Mat inputs;  // K x n_u
  Mat scheds;  // K x n_theta

  Eigen::Index length() const { return inputs.rows(); }

  void validate() const {
    require(states.rows() == inputs.rows() + 1, "Trajectory: states must be one longer than inputs");
    require(scheds.rows() == inputs.rows(), "Trajectory: scheduling length mismatch");
  }
};

}  // namespace lpv_smpc::lpv

#endif  // LPV_SMPC_LPV_SYSTEM_HPP
