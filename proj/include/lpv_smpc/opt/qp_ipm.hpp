#ifndef LPV_SMPC_OPT_QP_IPM_HPP
#define LPV_SMPC_OPT_QP_IPM_HPP

#include <algorithm>
#include <cmath>

#include "lpv_smpc/opt/problems.hpp"
#include "lpv_smpc/opt/simplex.hpp"

namespace lpv_smpc::opt {

namespace detail {

/// Largest step in (0, 1] keeping v + a*dv >= 0, shortened by the fraction-to-boundary factor.
inline double max_step(const Vec& v, const Vec& dv, double fraction) {
  double a = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (dv(i) < 0.0) a = std::min(a, -fraction * v(i) / dv(i));
  return a;
}

/// Phase-1 simplex on the constraint system alone; true when it is certified empty.
inline bool constraints_infeasible(const QuadraticProgram& qp, const SolverSettings& settings) {
  LinearProgram lp(qp.num_vars());
  lp.A_ineq = qp.A_ineq;
  lp.b_ineq = qp.b_ineq;
  lp.A_eq = qp.A_eq;
  lp.b_eq = qp.b_eq;
  SolverSettings s = settings;
  s.max_iterations = std::max(settings.max_iterations, 50000);
  return solve_lp(lp, s).status == Status::Infeasible;
}

}  // namespace detail

/**
 * Solve a convex QP with a Mehrotra predictor-corrector interior point method.
 *
 * Inequalities are handled through slacks s >= 0 with multipliers z >= 0; the
 * Newton system is reduced to (H + A' S^-1 Z A) dx + E' dy = rhs and solved
 * densely. When the iteration fails to converge the constraint set is tested
 * with a simplex phase 1, so Infeasible is a certified status.
 */
inline SolveStatus solve_qp(const QuadraticProgram& qp, const SolverSettings& settings = {}) {
  qp.validate();
  const auto n = qp.num_vars();
  const auto m = qp.A_ineq.rows();
  const auto p = qp.A_eq.rows();
  const Mat& H = qp.hessian;
  const Mat& A = qp.A_ineq;
  const Mat& E = qp.A_eq;
  const Vec& c = qp.linear;

  SolveStatus out;
  const double data_scale = 1.0 + std::max({c.size() ? c.cwiseAbs().maxCoeff() : 0.0,
                                            m ? qp.b_ineq.cwiseAbs().maxCoeff() : 0.0,
                                            p ? qp.b_eq.cwiseAbs().maxCoeff() : 0.0});
  const double tol = std::max(1e-10, std::min(settings.feasibility_tol, settings.gap_tol));
  const int max_iter = std::min(settings.max_iterations, 200);

  Vec x = Vec::Zero(n);
  Vec y = Vec::Zero(p);
  Vec s = Vec::Ones(m);
  Vec z = Vec::Ones(m);
  // x = 0 start; slacks take the residual there, pushed to at least one.
  if (m > 0) s = (qp.b_ineq - A * x).cwiseMax(1.0);

  auto solve_kkt = [&](const Vec& d, const Vec& rhs_x, const Vec& rhs_y, Vec& dx, Vec& dy) -> bool {
    Mat K = Mat::Zero(n + p, n + p);
    K.topLeftCorner(n, n) = H;
    if (m > 0) K.topLeftCorner(n, n).noalias() += A.transpose() * d.asDiagonal() * A;
    if (p > 0) {
      K.topRightCorner(n, p) = E.transpose();
      K.bottomLeftCorner(p, n) = E;
    }
    Vec rhs(n + p);
    rhs << rhs_x, rhs_y;
    Vec sol;
    if (p == 0) {
      Eigen::LLT<Mat> llt(K);
      if (llt.info() == Eigen::Success) {
        sol = llt.solve(rhs);
        sol += llt.solve(Vec(rhs - K * sol));  // one step of iterative refinement
      }
    }
    if (sol.size() != n + p || !sol.allFinite()) {
      // Singular or indefinite: tiny primal/dual regularization, then refine.
      Mat Kr = K;
      const double reg = 1e-12 * (1.0 + K.cwiseAbs().maxCoeff());
      Kr.topLeftCorner(n, n).diagonal().array() += reg;
      if (p > 0) Kr.bottomRightCorner(p, p).diagonal().array() -= reg;
      Eigen::PartialPivLU<Mat> lu(Kr);
      sol = lu.solve(rhs);
      for (int r = 0; r < 2; ++r) sol += lu.solve(Vec(rhs - K * sol));
    }
    if (!sol.allFinite()) return false;
    dx = sol.head(n);
    dy = sol.tail(p);
    return true;
  };

  bool converged = false;
  bool broke_down = false;
  int it = 0;
  for (; it < max_iter; ++it) {
    const Vec r_d = H * x + c + (m ? Vec(A.transpose() * z) : Vec::Zero(n)) + (p ? Vec(E.transpose() * y) : Vec::Zero(n));
    const Vec r_eq = p ? Vec(E * x - qp.b_eq) : Vec(0);
    const Vec r_pi = m ? Vec(A * x + s - qp.b_ineq) : Vec(0);
    const double mu = m ? s.dot(z) / static_cast<double>(m) : 0.0;
    const double res_d = r_d.size() ? r_d.cwiseAbs().maxCoeff() : 0.0;
    const double res_p = std::max(r_eq.size() ? r_eq.cwiseAbs().maxCoeff() : 0.0,
                                  r_pi.size() ? r_pi.cwiseAbs().maxCoeff() : 0.0);
    if (res_d <= tol * data_scale && res_p <= tol * data_scale && mu <= tol * data_scale * 0.1) {
      converged = true;
      break;
    }
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12 || (m && z.cwiseAbs().maxCoeff() > 1e14)) {
      broke_down = true;
      break;
    }

    const Vec d = m ? Vec(z.cwiseQuotient(s)) : Vec(0);
    // Affine (predictor) direction.
    Vec dx, dy;
    Vec r_sz = m ? Vec(s.cwiseProduct(z)) : Vec(0);
    auto direction = [&](const Vec& rsz, Vec& dx_, Vec& dy_, Vec& ds_, Vec& dz_) -> bool {
      Vec rhs_x = -r_d;
      if (m) rhs_x -= A.transpose() * ((z.cwiseProduct(r_pi) - rsz).cwiseQuotient(s));
      if (!solve_kkt(d, rhs_x, -r_eq, dx_, dy_)) return false;
      if (m) {
        ds_ = -r_pi - A * dx_;
        dz_ = (-rsz - z.cwiseProduct(ds_)).cwiseQuotient(s);
      } else {
        ds_ = Vec(0);
        dz_ = Vec(0);
      }
      return true;
    };
    Vec ds, dz;
    if (!direction(r_sz, dx, dy, ds, dz)) {
      broke_down = true;
      break;
    }
    if (m) {
      const double a_p = detail::max_step(s, ds, 1.0);
      const double a_d = detail::max_step(z, dz, 1.0);
      const double mu_aff = (s + a_p * ds).dot(z + a_d * dz) / static_cast<double>(m);
      const double sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);
      r_sz = s.cwiseProduct(z) + ds.cwiseProduct(dz) - Vec::Constant(m, sigma * mu);
      if (!direction(r_sz, dx, dy, ds, dz)) {
        broke_down = true;
        break;
      }
      const double a_p2 = detail::max_step(s, ds, 0.995);
      const double a_d2 = detail::max_step(z, dz, 0.995);
      const double a = std::min(a_p2, a_d2);
      x += a * dx;
      s += a * ds;
      y += a * dy;
      z += a * dz;
      s = s.cwiseMax(1e-300);
      z = z.cwiseMax(1e-300);
    } else {
      x += dx;
      y += dy;
    }
  }
  out.iterations = it;

  if (converged) {
    out.status = Status::Optimal;
    out.primal = x;
    out.objective = qp.evaluate(x);
    double viol = 0.0;
    if (m) viol = std::max(viol, (A * x - qp.b_ineq).maxCoeff());
    if (p) viol = std::max(viol, (E * x - qp.b_eq).cwiseAbs().maxCoeff());
    out.primal_residual = std::max(0.0, viol);
    Vec r_d = H * x + c;
    if (m) r_d += A.transpose() * z;
    if (p) r_d += E.transpose() * y;
    const double comp = m ? s.cwiseProduct(z).cwiseAbs().maxCoeff() : 0.0;
    out.dual_residual = std::max(r_d.size() ? r_d.cwiseAbs().maxCoeff() : 0.0, comp);
    return out;
  }
  if ((m > 0 || p > 0) && detail::constraints_infeasible(qp, settings)) {
    out.status = Status::Infeasible;
    return out;
  }
  if (broke_down && x.allFinite() && x.cwiseAbs().maxCoeff() > 1e12) {
    out.status = Status::Unbounded;
    return out;
  }
  if (broke_down) {
    out.status = Status::NumericalError;
    return out;
  }
  out.status = Status::MaxIter;
  out.primal = x;
  out.objective = qp.evaluate(x);
  return out;
}

}  // namespace lpv_smpc::opt

#endif  // LPV_SMPC_OPT_QP_IPM_HPP
