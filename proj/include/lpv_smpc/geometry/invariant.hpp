#ifndef LPV_SMPC_GEOMETRY_INVARIANT_HPP
#define LPV_SMPC_GEOMETRY_INVARIANT_HPP

#include <string>
#include <vector>

#include "lpv_smpc/geometry/polytope.hpp"

namespace lpv_smpc::geometry {

struct MaxRpiResult {
  Polytope set;
  int iterations = 0;
  std::vector<Polytope> iterates;  // X_0 = X_c, X_1, ...
};

struct InvariantSettings {
  int max_iterations = 200;
  double equal_tol = 1e-7;
  bool keep_iterates = true;
};

/**
 * Maximal robust positively invariant set of x+ = A_ci x over the vertex closed loops inside X_c:
 * X_{k+1} = {x in X_k | A_ci x in X_k for all i} until two iterates coincide.
 */
inline MaxRpiResult max_rpi_set(const std::vector<Mat>& closed_loop, const Polytope& Xc, const InvariantSettings& s = {}) {
  require(!closed_loop.empty(), "max_rpi_set: no closed-loop vertices");
  for (const auto& A : closed_loop)
    require(A.rows() == Xc.dim() && A.cols() == Xc.dim(), "max_rpi_set: closed-loop matrix must be square of the state dimension");
  if (is_empty(Xc)) throw ValidationError("max_rpi_set: constraint set is empty");
  MaxRpiResult out;
  Polytope cur = remove_redundancy(Xc);
  if (s.keep_iterates) out.iterates.push_back(cur);
  for (int it = 1; it <= s.max_iterations; ++it) {
    Polytope next = cur;
    for (const auto& A : closed_loop) next = next.stacked(cur.preimage(A));
    if (is_empty(next))
      throw NumericalError("max_rpi_set: iterate " + std::to_string(it) + " is empty; the closed loop cannot be kept inside the constraint set");
    next = remove_redundancy(next);
    if (s.keep_iterates) out.iterates.push_back(next);
    out.iterations = it;
    if (equals(cur, next, s.equal_tol)) {
      out.set = next;
      return out;
    }
    cur = std::move(next);
  }
  const auto c = detail::chebyshev_center(cur);
  throw NumericalError("max_rpi_set: no fixed point after " + std::to_string(s.max_iterations) + " iterations (last iterate has " +
                       std::to_string(cur.rows()) + " rows, inner radius " + std::to_string(c ? c->radius : -1.0) +
                       "); the maximal set may be empty or lower-dimensional");
}

struct RcpiResult {
  Polytope set;                    // C_N (or the fixed point)
  std::vector<Polytope> sequence;  // C_0 = Omega, C_1, ...
  int steps = 0;
  bool fixed_point = false;
};

/**
 * N-step robust controlled invariant set: C_{i+1} = {x in X | exists u_1..u_q in U with
 * A_j x + B_j u_j in C_i for every vertex j} starting from C_0 = Omega. Every vertex gets its
 * own input. Stops after N steps or at a fixed point.
 */
inline RcpiResult n_step_rcpi(const std::vector<std::pair<Mat, Mat>>& vertices, const Polytope& X, const Polytope& U,
                              const Polytope& omega, int N, const InvariantSettings& s = {},
                              const ProjectionSettings& ps = {}) {
  require(!vertices.empty(), "n_step_rcpi: no vertices");
  require(N >= 0, "n_step_rcpi: N must be non-negative");
  const Eigen::Index nx = X.dim(), nu = U.dim();
  require(omega.dim() == nx, "n_step_rcpi: terminal set dimension mismatch");
  for (const auto& [A, B] : vertices)
    require(A.rows() == nx && A.cols() == nx && B.rows() == nx && B.cols() == nu, "n_step_rcpi: vertex matrix shapes");
  if (is_empty(omega)) throw ValidationError("n_step_rcpi: terminal set is empty");
  const auto q = static_cast<Eigen::Index>(vertices.size());
  RcpiResult out;
  Polytope cur = remove_redundancy(omega);
  out.sequence.push_back(cur);
  for (int i = 0; i < N; ++i) {
    const Eigen::Index m = cur.rows(), mu = U.rows(), nl = nx + q * nu;
    Mat F = Mat::Zero(q * (m + mu), nl);
    Vec g(q * (m + mu));
    for (Eigen::Index j = 0; j < q; ++j) {
      const auto& [A, B] = vertices[static_cast<std::size_t>(j)];
      const Eigen::Index r0 = j * (m + mu);
      F.block(r0, 0, m, nx) = cur.F() * A;
      F.block(r0, nx + j * nu, m, nu) = cur.F() * B;
      g.segment(r0, m) = cur.g();
      F.block(r0 + m, nx + j * nu, mu, nu) = U.F();
      g.segment(r0 + m, mu) = U.g();
    }
    const Polytope lifted(F, g);
    if (is_empty(lifted)) throw NumericalError("n_step_rcpi: lifted set empty at step " + std::to_string(i + 1));
    Polytope next = intersect(project(lifted, nx, ps), X);
    out.steps = i + 1;
    out.sequence.push_back(next);
    const bool same = equals(cur, next, s.equal_tol);
    cur = std::move(next);
    if (same) {
      out.fixed_point = true;
      break;
    }
  }
  out.set = cur;
  return out;
}

}  // namespace lpv_smpc::geometry

#endif  // LPV_SMPC_GEOMETRY_INVARIANT_HPP
