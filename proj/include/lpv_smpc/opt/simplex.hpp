#ifndef LPV_SMPC_OPT_SIMPLEX_HPP
#define LPV_SMPC_OPT_SIMPLEX_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "lpv_smpc/opt/problems.hpp"

namespace lpv_smpc::opt {

namespace detail {

/// min c'z  s.t.  Az = b, z >= 0, plus the map back to the user's variables.
struct StandardForm {
  Mat A;
  Vec b;
  Vec c;
  double cost_offset = 0.0;
  // x = offset + Sum_k coeff_k * z_k, stored densely (n_user x n_std).
  Mat recover;
  Vec recover_offset;
};

inline StandardForm to_standard_form(const LinearProgram& lp) {
  const auto n = lp.num_vars();
  // Column layout for each user variable: one or two standard columns.
  struct Split {
    int pos = -1;
    int neg = -1;
    double offset = 0.0;
    double sign = 1.0;
    bool boxed = false;
  };
  std::vector<Split> split(static_cast<std::size_t>(n));
  int ncols = 0;
  int boxed_rows = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    auto& s = split[static_cast<std::size_t>(k)];
    const bool has_lo = std::isfinite(lp.lower(k));
    const bool has_hi = std::isfinite(lp.upper(k));
    if (has_lo) {
      s.pos = ncols++;
      s.offset = lp.lower(k);
      s.boxed = has_hi;
      if (has_hi) ++boxed_rows;
    } else if (has_hi) {
      s.pos = ncols++;
      s.offset = lp.upper(k);
      s.sign = -1.0;
    } else {
      s.pos = ncols++;
      s.neg = ncols++;
    }
  }
  const auto m_in = lp.A_ineq.rows();
  const auto m_eq = lp.A_eq.rows();
  const int n_slack = static_cast<int>(m_in) + boxed_rows;
  const auto m = m_in + m_eq + boxed_rows;
  const int N = ncols + n_slack;

  StandardForm sf;
  sf.A = Mat::Zero(m, N);
  sf.b = Vec::Zero(m);
  sf.c = Vec::Zero(N);
  sf.recover = Mat::Zero(n, N);
  sf.recover_offset = Vec::Zero(n);

  Vec x_offset = Vec::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = split[static_cast<std::size_t>(k)];
    x_offset(k) = s.offset;
    sf.recover(k, s.pos) = s.sign;
    if (s.neg >= 0) sf.recover(k, s.neg) = -1.0;
    sf.recover_offset(k) = s.offset;
  }
  // Map a user row a'x into standard columns.
  auto place = [&](const auto& row, Eigen::Index r) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double a = row(k);
      if (a == 0.0) continue;
      const auto& s = split[static_cast<std::size_t>(k)];
      sf.A(r, s.pos) += a * s.sign;
      if (s.neg >= 0) sf.A(r, s.neg) -= a;
    }
  };
  int slack = ncols;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < m_in; ++i, ++r) {
    place(lp.A_ineq.row(i), r);
    sf.A(r, slack++) = 1.0;
    sf.b(r) = lp.b_ineq(i) - lp.A_ineq.row(i).dot(x_offset);
  }
  for (Eigen::Index i = 0; i < m_eq; ++i, ++r) {
    place(lp.A_eq.row(i), r);
    sf.b(r) = lp.b_eq(i) - lp.A_eq.row(i).dot(x_offset);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = split[static_cast<std::size_t>(k)];
    if (!s.boxed) continue;
    sf.A(r, s.pos) = 1.0;
    sf.A(r, slack++) = 1.0;
    sf.b(r) = lp.upper(k) - lp.lower(k);
    ++r;
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = split[static_cast<std::size_t>(k)];
    sf.c(s.pos) += lp.cost(k) * s.sign;
    if (s.neg >= 0) sf.c(s.neg) -= lp.cost(k);
  }
  sf.cost_offset = lp.cost.dot(x_offset);
  return sf;
}

/// Dense tableau simplex on a standard-form problem.
class TableauSimplex {
 public:
  TableauSimplex(const StandardForm& sf, const SolverSettings& settings) : sf_(sf), settings_(settings) {}

  Status run() {
    const auto m = sf_.A.rows();
    const auto n = sf_.A.cols();
    // Phase 1 tableau: [A | I | b] with b >= 0.
    T_ = Mat::Zero(m + 1, n + m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double sgn = sf_.b(i) < 0 ? -1.0 : 1.0;
      T_.row(i).head(n) = sgn * sf_.A.row(i);
      T_(i, n + i) = 1.0;
      T_(i, n + m) = sgn * sf_.b(i);
    }
    basis_.resize(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) basis_[static_cast<std::size_t>(i)] = static_cast<int>(n + i);
    // Phase-1 objective: minimize the sum of artificials.
    T_.row(m).setZero();
    for (Eigen::Index i = 0; i < m; ++i) T_.row(m) -= T_.row(i);
    for (Eigen::Index i = 0; i < m; ++i) T_(m, n + i) = 0.0;
    ncols_active_ = n + m;

    const double scale = 1.0 + (m > 0 ? sf_.b.cwiseAbs().maxCoeff() : 0.0);
    Status s = iterate();
    if (s != Status::Optimal) return s == Status::Unbounded ? Status::NumericalError : s;
    if (-T_(m, n + m) > std::max(1e-9, settings_.feasibility_tol) * scale) return Status::Infeasible;

    // Drive remaining artificials out of the basis; drop redundant rows.
    std::vector<Eigen::Index> keep_rows;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (basis_[static_cast<std::size_t>(i)] < n) {
        keep_rows.push_back(i);
        continue;
      }
      Eigen::Index best = -1;
      double best_abs = 1e-9;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (std::abs(T_(i, j)) > best_abs) {
          best_abs = std::abs(T_(i, j));
          best = j;
        }
      }
      if (best >= 0) {
        pivot(i, best);
        keep_rows.push_back(i);
      }
    }
    // Rebuild tableau without artificial columns and redundant rows.
    const auto mk = static_cast<Eigen::Index>(keep_rows.size());
    Mat T2 = Mat::Zero(mk + 1, n + 1);
    std::vector<int> basis2;
    for (Eigen::Index r = 0; r < mk; ++r) {
      const auto i = keep_rows[static_cast<std::size_t>(r)];
      T2.row(r).head(n) = T_.row(i).head(n);
      T2(r, n) = T_(i, n + m);
      basis2.push_back(basis_[static_cast<std::size_t>(i)]);
    }
    T_ = std::move(T2);
    basis_ = std::move(basis2);
    rows_ = keep_rows;
    ncols_active_ = n;
    // Phase-2 reduced costs.
    T_.row(mk).setZero();
    T_.row(mk).head(n) = sf_.c.transpose();
    for (Eigen::Index r = 0; r < mk; ++r) {
      const double cb = sf_.c(basis_[static_cast<std::size_t>(r)]);
      if (cb != 0.0) T_.row(mk) -= cb * T_.row(r);
    }
    reinvert();
    // Pivoting error accumulates in the tableau; rebuild it from the final basis and resume
    // until the rebuilt tableau is optimal as well.
    for (int round = 0;; ++round) {
      const Status st = iterate();
      if (st != Status::Optimal || round == 3 || !reinvert()) return st;
      if (min_reduced_cost() >= -1e-9 * (1.0 + T_.row(mk).head(n).cwiseAbs().maxCoeff())) return st;
    }
  }

  /// Basic solution recomputed from the original data for accuracy.
  Vec solution() const {
    const auto n = sf_.A.cols();
    Vec z = Vec::Zero(n);
    const auto mk = static_cast<Eigen::Index>(basis_.size());
    if (mk == 0) return z;
    Mat Bm(mk, mk);
    Vec bb(mk);
    for (Eigen::Index r = 0; r < mk; ++r) {
      const auto i = rows_[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < mk; ++c) Bm(r, c) = sf_.A(i, basis_[static_cast<std::size_t>(c)]);
      bb(r) = sf_.b(i);
    }
    Eigen::FullPivLU<Mat> lu(Bm);
    Vec zb = lu.isInvertible() ? Vec(lu.solve(bb)) : Vec();
    for (Eigen::Index r = 0; r < mk; ++r) {
      const double tab = T_(r, T_.cols() - 1);
      const double val = (zb.size() == mk && std::abs(zb(r) - tab) < 1e-6 * (1.0 + std::abs(tab))) ? zb(r) : tab;
      z(basis_[static_cast<std::size_t>(r)]) = std::max(0.0, val);
    }
    return z;
  }

  /// Most negative reduced cost at termination (>= 0 at optimality).
  double min_reduced_cost() const {
    const auto mk = T_.rows() - 1;
    double v = 0.0;
    for (Eigen::Index j = 0; j < ncols_active_; ++j) v = std::min(v, T_(mk, j));
    return v;
  }

  int iterations() const { return iterations_; }

  /// Phase-2 tableau recomputed from the original data for the current basis. False when the
  /// basis matrix is singular or the basic solution is clearly negative (tableau left unchanged).
  bool reinvert() {
    const auto n = sf_.A.cols();
    const auto mk = static_cast<Eigen::Index>(basis_.size());
    if (mk == 0) return false;
    Mat Ar(mk, n);
    Vec br(mk);
    for (Eigen::Index r = 0; r < mk; ++r) {
      Ar.row(r) = sf_.A.row(rows_[static_cast<std::size_t>(r)]);
      br(r) = sf_.b(rows_[static_cast<std::size_t>(r)]);
    }
    Mat Bm(mk, mk);
    Vec cb(mk);
    for (Eigen::Index c = 0; c < mk; ++c) {
      Bm.col(c) = Ar.col(basis_[static_cast<std::size_t>(c)]);
      cb(c) = sf_.c(basis_[static_cast<std::size_t>(c)]);
    }
    Eigen::FullPivLU<Mat> lu(Bm);
    if (!lu.isInvertible()) return false;
    const Mat body = lu.solve(Ar);
    Vec xb = lu.solve(br);
    if (!body.allFinite() || !xb.allFinite() || xb.minCoeff() < -1e-9 * (1.0 + br.cwiseAbs().maxCoeff())) return false;
    xb = xb.cwiseMax(0.0);
    T_.topLeftCorner(mk, n) = body;
    T_.col(n).head(mk) = xb;
    T_.row(mk).head(n) = sf_.c.transpose() - cb.transpose() * body;
    T_(mk, n) = -cb.dot(xb);
    return true;
  }

 private:
  void pivot(Eigen::Index r, Eigen::Index c) {
    const double p = T_(r, c);
    T_.row(r) /= p;
    for (Eigen::Index i = 0; i < T_.rows(); ++i) {
      if (i == r) continue;
      const double f = T_(i, c);
      if (f != 0.0) T_.row(i) -= f * T_.row(r);
    }
    basis_[static_cast<std::size_t>(r)] = static_cast<int>(c);
  }

  Status iterate() {
    const auto m = T_.rows() - 1;
    const auto rhs = T_.cols() - 1;
    const double tol = 1e-10;
    int degenerate_run = 0;
    while (true) {
      if (iterations_ >= settings_.max_iterations) return Status::MaxIter;
      const bool bland = degenerate_run > 50;
      Eigen::Index enter = -1;
      double best = -tol * (1.0 + T_.row(m).head(ncols_active_).cwiseAbs().maxCoeff());
      for (Eigen::Index j = 0; j < ncols_active_; ++j) {
        if (T_(m, j) < best) {
          enter = j;
          if (bland) break;
          best = T_(m, j);
        }
      }
      if (enter < 0) return Status::Optimal;
      Eigen::Index leave = -1;
      double ratio = kInf;
      for (Eigen::Index i = 0; i < m; ++i) {
        const double a = T_(i, enter);
        if (a <= 1e-11) continue;
        const double q = T_(i, rhs) / a;
        if (q < ratio - 1e-12 ||
            (q <= ratio + 1e-12 && leave >= 0 && basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(leave)])) {
          ratio = std::min(q, ratio);
          leave = i;
        }
      }
      if (leave < 0) return Status::Unbounded;
      degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
      pivot(leave, enter);
      ++iterations_;
    }
  }

  const StandardForm& sf_;
  const SolverSettings& settings_;
  Mat T_;
  std::vector<int> basis_;
  std::vector<Eigen::Index> rows_;
  Eigen::Index ncols_active_ = 0;
  int iterations_ = 0;
};

}  // namespace detail

/**
 * Solve a linear program with a two-phase dense simplex method.
 *
 * Infeasibility and unboundedness are reported through the status, never by
 * exception. On success the basic solution is recomputed from the original
 * data and the primal residual (max constraint violation) and dual residual
 * (most negative reduced cost) are reported.
 */
inline SolveStatus solve_lp(const LinearProgram& lp, const SolverSettings& settings = {}) {
  lp.validate();
  SolveStatus out;
  const auto sf = detail::to_standard_form(lp);
  if (!sf.A.allFinite() || !sf.b.allFinite()) {
    out.status = Status::NumericalError;
    return out;
  }
  detail::TableauSimplex simplex(sf, settings);
  const Status s = simplex.run();
  out.iterations = simplex.iterations();
  out.status = s;
  if (s == Status::Optimal || s == Status::MaxIter) {
    const Vec z = simplex.solution();
    out.primal = sf.recover * z + sf.recover_offset;
    out.objective = lp.cost.dot(out.primal);
    double viol = 0.0;
    if (lp.A_ineq.rows() > 0) viol = std::max(viol, (lp.A_ineq * out.primal - lp.b_ineq).maxCoeff());
    if (lp.A_eq.rows() > 0) viol = std::max(viol, (lp.A_eq * out.primal - lp.b_eq).cwiseAbs().maxCoeff());
    for (Eigen::Index k = 0; k < lp.num_vars(); ++k) {
      viol = std::max(viol, lp.lower(k) - out.primal(k));
      viol = std::max(viol, out.primal(k) - lp.upper(k));
    }
    out.primal_residual = std::max(0.0, viol);
    out.dual_residual = std::max(0.0, -simplex.min_reduced_cost());
    if (s == Status::Optimal) {
      const double scale = 1.0 + std::max(lp.b_ineq.size() ? lp.b_ineq.cwiseAbs().maxCoeff() : 0.0,
                                          lp.b_eq.size() ? lp.b_eq.cwiseAbs().maxCoeff() : 0.0);
      if (out.primal_residual > 1e-6 * scale) out.status = Status::NumericalError;
    }
  }
  return out;
}

}  // namespace lpv_smpc::opt

#endif  // LPV_SMPC_OPT_SIMPLEX_HPP
