#ifndef LPV_SMPC_TERMINAL_LMI_HPP
#define LPV_SMPC_TERMINAL_LMI_HPP

#include <string>
#include <vector>

#include "lpv_smpc/opt/sdp.hpp"
#include "lpv_smpc/terminal/affine.hpp"

namespace lpv_smpc::terminal {

/// Symmetric square root of an SPD matrix.
inline Mat sym_sqrt(const Mat& M) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(M);
  require(eig.eigenvalues().minCoeff() >= 0.0, "sym_sqrt: matrix is not positive semidefinite");
  return eig.eigenvectors() * eig.eigenvalues().cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();
}

inline std::string vertex_block(const char* name, int i) { return std::string(name) + "_" + std::to_string(i); }

/**
 * Vertex-pair block LMIs in Q_i (sym), X_i, L_i, Y_i, Z_i (Z_i is n_u x n_u):
 *   [X_i+X_i'-Q_i, (A_i X_i)', -L_i', (Qw^1/2 X_i)', (Rw^1/2 L_i)';
 *    *, Q_j - (B_i Y_j + (B_i Y_j)'), B_i Z_j - Y_j', 0, 0;
 *    *, *, Z_j + Z_j', 0, 0;  *, *, *, I, 0;  *, *, *, *, I] >= eps I
 * for all (i, j), plus Q_i >= eps I. The margin eps is the solver's sdp_margin.
 */
inline opt::SemidefiniteProgram assemble_lmi(const AffineLpvModel& m, const Mat& Qw, const Mat& Rw) {
  m.validate();
  const int nx = m.n_x(), nu = m.n_u(), q = m.q();
  require(Qw.rows() == nx && Qw.cols() == nx && Rw.rows() == nu && Rw.cols() == nu, "assemble_lmi: weight shapes");
  require(Eigen::LLT<Mat>(Qw).info() == Eigen::Success && Eigen::LLT<Mat>(Rw).info() == Eigen::Success,
          "assemble_lmi: Q and R must be symmetric positive definite");
  const Mat Qh = sym_sqrt(Qw), Rh = sym_sqrt(Rw);
  opt::SemidefiniteProgram sdp;
  std::vector<opt::AffineMatrix> Qv, Xv, Lv, Yv, Zv;
  for (int i = 0; i < q; ++i) {
    Qv.push_back(sdp.add_variable(vertex_block("Q", i), nx, nx, true));
    Xv.push_back(sdp.add_variable(vertex_block("X", i), nx, nx, false));
    Lv.push_back(sdp.add_variable(vertex_block("L", i), nu, nx, false));
    Yv.push_back(sdp.add_variable(vertex_block("Y", i), nu, nx, false));
    Zv.push_back(sdp.add_variable(vertex_block("Z", i), nu, nu, false));
  }
  using AM = opt::AffineMatrix;
  for (int i = 0; i < q; ++i) {
    const auto& [A, B] = m.vertices[static_cast<std::size_t>(i)];
    const AM& X = Xv[static_cast<std::size_t>(i)];
    const AM& L = Lv[static_cast<std::size_t>(i)];
    const AM b11 = X + X.transpose() - Qv[static_cast<std::size_t>(i)];
    const AM b12 = (A * X).transpose();
    const AM b13 = -L.transpose();
    const AM b14 = (Qh * X).transpose();
    const AM b15 = (Rh * L).transpose();
    for (int j = 0; j < q; ++j) {
      const AM& Y = Yv[static_cast<std::size_t>(j)];
      const AM& Z = Zv[static_cast<std::size_t>(j)];
      const AM BY = B * Y;
      const AM b22 = Qv[static_cast<std::size_t>(j)] - (BY + BY.transpose());
      const AM b23 = B * Z - Y.transpose();
      const AM b33 = Z + Z.transpose();
      const AM zxx = AM::zero(nx, nx), zxu = AM::zero(nx, nu), zux = AM::zero(nu, nx), zuu = AM::zero(nu, nu);
      sdp.add_psd_constraint(AM::blocks({{b11, b12, b13, b14, b15},
                                         {b12.transpose(), b22, b23, zxx, zxu},
                                         {b13.transpose(), b23.transpose(), b33, zux, zuu},
                                         {b14.transpose(), zxx, zxu, AM::identity(nx), zxu},
                                         {b15.transpose(), zux, zuu, zux, AM::identity(nu)}}),
                             "pair_" + std::to_string(i) + "_" + std::to_string(j));
    }
  }
  for (int i = 0; i < q; ++i) sdp.add_psd_constraint(Qv[static_cast<std::size_t>(i)], vertex_block("Qpos", i));
  return sdp;
}

struct LmiSolution {
  std::vector<Mat> Q, X, L, Y, Z;
  std::vector<Mat> P;  // Q_i^-1
  std::vector<Mat> K;  // L_i X_i^-1
  double min_eigenvalue = 0.0;     // smallest eigenvalue over all constraints
  double max_x_condition = 0.0;    // largest condition number among the X_i
  double max_k_residual = 0.0;     // max ||L_i - K_i X_i||_F / ||L_i||_F
  int iterations = 0;
  std::vector<std::string> warnings;
};

struct LmiSettings {
  double eps = 1e-6;
  double x_condition_warning = 1e8;
  opt::SolverSettings solver;
};

/// Solve the vertex LMIs and recover P_i, K_i. Throws NumericalError when infeasible.
inline LmiSolution solve_lmi(const AffineLpvModel& m, const Mat& Qw, const Mat& Rw, const LmiSettings& s = {}) {
  const auto sdp = assemble_lmi(m, Qw, Rw);
  opt::SolverSettings ss = s.solver;
  ss.sdp_margin = s.eps;
  const auto sol = opt::solve_sdp(sdp, ss);
  if (!sol.optimal())
    throw NumericalError(std::string("terminal LMI: ") + opt::to_string(sol.status) +
                         " (no vertex Lyapunov matrices and gains satisfy the decrease condition)");
  LmiSolution out;
  out.iterations = sol.iterations;
  const auto eigs = sdp.min_eigenvalues(sol.primal);
  out.min_eigenvalue = *std::min_element(eigs.begin(), eigs.end());
  for (int i = 0; i < m.q(); ++i) {
    out.Q.push_back(sdp.value(vertex_block("Q", i), sol.primal));
    out.X.push_back(sdp.value(vertex_block("X", i), sol.primal));
    out.L.push_back(sdp.value(vertex_block("L", i), sol.primal));
    out.Y.push_back(sdp.value(vertex_block("Y", i), sol.primal));
    out.Z.push_back(sdp.value(vertex_block("Z", i), sol.primal));
    const Mat& Q = out.Q.back();
    const Mat& X = out.X.back();
    Eigen::JacobiSVD<Mat> svd(X);
    const double cond = svd.singularValues()(0) / svd.singularValues().tail(1)(0);
    out.max_x_condition = std::max(out.max_x_condition, cond);
    if (cond > s.x_condition_warning)
      out.warnings.push_back("X_" + std::to_string(i) + " condition number " + std::to_string(cond));
    Mat P = Q.ldlt().solve(Mat::Identity(Q.rows(), Q.cols()));
    out.P.push_back(0.5 * (P + P.transpose()));
    const Mat K = X.transpose().partialPivLu().solve(out.L.back().transpose()).transpose();
    out.K.push_back(K);
    const double ln = out.L.back().norm();
    out.max_k_residual = std::max(out.max_k_residual, (out.L.back() - K * X).norm() / (ln > 0.0 ? ln : 1.0));
  }
  return out;
}

}  // namespace lpv_smpc::terminal

#endif  // LPV_SMPC_TERMINAL_LMI_HPP
