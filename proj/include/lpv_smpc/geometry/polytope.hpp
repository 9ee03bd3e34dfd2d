#ifndef LPV_SMPC_GEOMETRY_POLYTOPE_HPP
#define LPV_SMPC_GEOMETRY_POLYTOPE_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "lpv_smpc/io/csv.hpp"
#include "lpv_smpc/io/json.hpp"
#include "lpv_smpc/opt/simplex.hpp"

namespace lpv_smpc::geometry {

/// {x | F x <= g}. Rows are stored with unit Euclidean norm; all-zero rows are dropped on construction.
class Polytope {
 public:
  Polytope() = default;

  /// The whole space R^n (no rows).
  explicit Polytope(Eigen::Index n) : F_(0, n), g_(0) {}

  Polytope(const Mat& F, const Vec& g) {
    require(F.rows() == g.size(), "Polytope: F and g row counts differ");
    require(F.allFinite() && g.allFinite(), "Polytope: non-finite data");
    F_.resize(F.rows(), F.cols());
    g_.resize(g.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < F.rows(); ++r) {
      const double nr = F.row(r).norm();
      if (nr <= kZeroRow) {
        if (g(r) < -kZeroRow) throw ValidationError("Polytope: row " + std::to_string(r) + " is 0 <= negative (trivially infeasible)");
        continue;
      }
      F_.row(k) = F.row(r) / nr;
      g_(k) = g(r) / nr;
      ++k;
    }
    F_.conservativeResize(k, F.cols());
    g_.conservativeResize(k);
  }

  static Polytope box(const Box& b) {
    const Eigen::Index n = b.dim();
    Mat F(2 * n, n);
    F << Mat::Identity(n, n), -Mat::Identity(n, n);
    Vec g(2 * n);
    g << b.upper, -b.lower;
    return {F, g};
  }

  const Mat& F() const { return F_; }
  const Vec& g() const { return g_; }
  Eigen::Index dim() const { return F_.cols(); }
  Eigen::Index rows() const { return F_.rows(); }

  /// Rows of both sets stacked, no redundancy removal.
  Polytope stacked(const Polytope& q) const {
    require(q.dim() == dim(), "Polytope: dimension mismatch");
    Mat F(rows() + q.rows(), dim());
    F << F_, q.F_;
    Vec g(rows() + q.rows());
    g << g_, q.g_;
    return {F, g};
  }

  /// {x | M x in P}.
  Polytope preimage(const Mat& M) const {
    require(M.rows() == dim(), "Polytope: preimage map has wrong output dimension");
    return {F_ * M, g_};
  }

  Polytope subset_rows(const std::vector<Eigen::Index>& idx) const {
    Polytope p(dim());
    p.F_.resize(static_cast<Eigen::Index>(idx.size()), dim());
    p.g_.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      p.F_.row(static_cast<Eigen::Index>(i)) = F_.row(idx[i]);
      p.g_(static_cast<Eigen::Index>(i)) = g_(idx[i]);
    }
    return p;
  }

  static constexpr double kZeroRow = 1e-12;

 private:
  Mat F_;
  Vec g_;
};

namespace detail {

inline opt::SolveStatus max_linear(const Mat& F, const Vec& g, const Vec& d, const std::optional<std::pair<Vec, double>>& extra = {}) {
  opt::LinearProgram lp(F.cols());
  lp.cost = -d;
  if (extra) {
    lp.A_ineq.resize(F.rows() + 1, F.cols());
    lp.A_ineq << F, extra->first.transpose();
    lp.b_ineq.resize(g.size() + 1);
    lp.b_ineq << g, extra->second;
  } else {
    lp.A_ineq = F;
    lp.b_ineq = g;
  }
  return opt::solve_lp(lp);
}

struct Center {
  Vec x;
  double radius = -kInf;  // capped at 1
};

/// Chebyshev center with the radius capped at 1 (rows have unit norm). Empty when infeasible.
inline std::optional<Center> chebyshev_center(const Polytope& p) {
  const Eigen::Index n = p.dim();
  opt::LinearProgram lp(n + 1);
  lp.cost(n) = -1.0;
  lp.upper(n) = 1.0;
  lp.A_ineq.resize(p.rows(), n + 1);
  lp.A_ineq << p.F(), Vec::Ones(p.rows());
  lp.b_ineq = p.g();
  const auto s = opt::solve_lp(lp);
  if (s.status == opt::Status::Infeasible) return std::nullopt;
  if (!s.optimal()) throw NumericalError(std::string("chebyshev_center: LP ") + opt::to_string(s.status));
  if (s.primal(n) < -1e-9) return std::nullopt;
  return Center{s.primal.head(n), s.primal(n)};
}

/// First row hit by the ray c + t d (t > 0) among the given rows, or -1 when none or on a tie.
inline int first_hit(const Polytope& p, const std::vector<Eigen::Index>& rows, const Vec& c, const Vec& d) {
  double best = kInf, second = kInf;
  int arg = -1;
  for (auto r : rows) {
    const double a = p.F().row(r).dot(d);
    if (a <= 1e-14) continue;
    const double t = (p.g()(r) - p.F().row(r).dot(c)) / a;
    if (t < best) {
      second = best;
      best = t;
      arg = static_cast<int>(r);
    } else if (t < second) {
      second = t;
    }
  }
  if (arg < 0 || second - best <= 1e-10 * (1.0 + std::abs(best))) return -1;
  return arg;
}

inline std::vector<Eigen::Index> deduplicate_parallel(const Polytope& p) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    bool dup = false;
    for (auto& k : keep) {
      if ((p.F().row(r) - p.F().row(k)).cwiseAbs().maxCoeff() <= 1e-12) {
        if (p.g()(r) < p.g()(k)) k = r;
        dup = true;
        break;
      }
    }
    if (!dup) keep.push_back(r);
  }
  return keep;
}

}  // namespace detail

/// Support function max d'x over P; +inf when unbounded, -inf when empty.
inline double support(const Polytope& p, const Vec& d) {
  require(d.size() == p.dim(), "support: dimension mismatch");
  const auto s = detail::max_linear(p.F(), p.g(), d);
  if (s.status == opt::Status::Unbounded) return kInf;
  if (s.status == opt::Status::Infeasible) return -kInf;
  if (!s.optimal()) throw NumericalError(std::string("support: LP ") + opt::to_string(s.status));
  return -s.objective;
}

inline bool is_empty(const Polytope& p) { return !detail::chebyshev_center(p); }

inline bool contains_point(const Polytope& p, const Vec& x, double tol = 1e-9) {
  require(x.size() == p.dim(), "contains_point: dimension mismatch");
  return p.rows() == 0 || (p.F() * x - p.g()).maxCoeff() <= tol;
}

/// Bounded iff the support is finite along every signed coordinate axis.
inline bool is_bounded(const Polytope& p) {
  for (Eigen::Index i = 0; i < p.dim(); ++i)
    for (double s : {1.0, -1.0})
      if (support(p, s * Vec::Unit(p.dim(), i)) == kInf) return false;
  return true;
}

/**
 * Minimal representation. A row is kept iff its maximum over the remaining rows exceeds its
 * offset by more than tol. With an interior point, rows are certified by ray shooting and the
 * LPs run only against the certified set (Clarkson's method); otherwise every row gets an LP
 * against all rows still kept.
 */
inline Polytope remove_redundancy(const Polytope& p, double tol = 1e-9) {
  const auto center = detail::chebyshev_center(p);
  if (!center) throw ValidationError("remove_redundancy: polytope is empty");
  const std::vector<Eigen::Index> cand = detail::deduplicate_parallel(p);
  if (cand.size() <= 1) return p.subset_rows(cand);
  const Vec& c = center->x;
  std::vector<Eigen::Index> kept;
  if (center->radius > 1e-7) {
    std::vector<char> certified(static_cast<std::size_t>(p.rows()), 0);
    std::vector<Eigen::Index> cert;
    auto certify = [&](int r) {
      if (r >= 0 && !certified[static_cast<std::size_t>(r)]) {
        certified[static_cast<std::size_t>(r)] = 1;
        cert.push_back(r);
      }
    };
    for (auto r : cand) certify(detail::first_hit(p, cand, c, p.F().row(r).transpose()));
    std::vector<Eigen::Index> fallback;
    for (auto r : cand) {
      while (!certified[static_cast<std::size_t>(r)]) {
        const Vec fr = p.F().row(r).transpose();
        const Polytope sub = p.subset_rows(cert);
        const auto s = detail::max_linear(sub.F(), sub.g(), fr, std::make_pair(fr, p.g()(r) + 1.0));
        if (!s.optimal()) throw NumericalError(std::string("remove_redundancy: LP ") + opt::to_string(s.status));
        if (-s.objective <= p.g()(r) + tol) break;  // redundant
        const int hit = detail::first_hit(p, cand, c, s.primal - c);
        if (hit < 0 || certified[static_cast<std::size_t>(hit)]) {
          fallback.push_back(r);
          break;
        }
        certify(hit);
      }
    }
    kept = cert;
    // Ambiguous rays: test against everything kept so far.
    for (auto r : fallback) {
      if (certified[static_cast<std::size_t>(r)]) continue;
      std::vector<Eigen::Index> others = kept;
      for (auto f : fallback)
        if (f != r && !certified[static_cast<std::size_t>(f)]) others.push_back(f);
      const Vec fr = p.F().row(r).transpose();
      const Polytope sub = p.subset_rows(others);
      const auto s = detail::max_linear(sub.F(), sub.g(), fr, std::make_pair(fr, p.g()(r) + 1.0));
      if (!s.optimal()) throw NumericalError(std::string("remove_redundancy: LP ") + opt::to_string(s.status));
      if (-s.objective > p.g()(r) + tol) {
        certified[static_cast<std::size_t>(r)] = 1;
        kept.push_back(r);
      } else {
        certified[static_cast<std::size_t>(r)] = 2;  // dropped
      }
    }
  } else {
    std::vector<Eigen::Index> live = cand;
    for (std::size_t i = 0; i < live.size();) {
      const Eigen::Index r = live[i];
      std::vector<Eigen::Index> others;
      for (auto o : live)
        if (o != r) others.push_back(o);
      const Vec fr = p.F().row(r).transpose();
      const Polytope sub = p.subset_rows(others);
      const auto s = detail::max_linear(sub.F(), sub.g(), fr, std::make_pair(fr, p.g()(r) + 1.0));
      if (!s.optimal()) throw NumericalError(std::string("remove_redundancy: LP ") + opt::to_string(s.status));
      if (-s.objective <= p.g()(r) + tol)
        live.erase(live.begin() + static_cast<std::ptrdiff_t>(i));
      else
        ++i;
    }
    kept = live;
  }
  std::sort(kept.begin(), kept.end());
  return p.subset_rows(kept);
}

/// Stacked rows with redundancy removed.
inline Polytope intersect(const Polytope& p, const Polytope& q) {
  require(p.dim() == q.dim(), "intersect: dimension mismatch");
  return remove_redundancy(p.stacked(q));
}

/// P subset of Q: every row of Q bounds P's support within tol. An empty P is a subset of anything.
inline bool is_subset(const Polytope& p, const Polytope& q, double tol = 1e-7) {
  require(p.dim() == q.dim(), "is_subset: dimension mismatch");
  if (is_empty(p)) return true;
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    if (support(p, q.F().row(r).transpose()) > q.g()(r) + tol) return false;
  return true;
}

inline bool equals(const Polytope& p, const Polytope& q, double tol = 1e-7) { return is_subset(p, q, tol) && is_subset(q, p, tol); }

struct ProjectionSettings {
  std::size_t max_rows = 50000;
  double zero_coeff = 1e-12;
};

/**
 * Projection onto the first n coordinates by Fourier-Motzkin elimination of the trailing
 * coordinates, last one first, with redundancy removal after each step.
 */
inline Polytope project(const Polytope& p, Eigen::Index n, const ProjectionSettings& s = {}) {
  require(n >= 1 && n <= p.dim(), "project: target dimension out of range");
  if (is_empty(p)) throw ValidationError("project: polytope is empty");
  Polytope cur = remove_redundancy(p);
  for (Eigen::Index c = p.dim() - 1; c >= n; --c) {
    const Mat& F = cur.F();
    const Vec& g = cur.g();
    std::vector<Eigen::Index> pos, neg, zero;
    for (Eigen::Index r = 0; r < F.rows(); ++r) {
      const double a = F(r, c);
      (a > s.zero_coeff ? pos : a < -s.zero_coeff ? neg : zero).push_back(r);
    }
    const std::size_t total = zero.size() + pos.size() * neg.size();
    if (total > s.max_rows)
      throw NumericalError("project: eliminating coordinate " + std::to_string(c) + " would create " + std::to_string(total) +
                           " rows (cap " + std::to_string(s.max_rows) +
                           "); reduce the number of vertices, the horizon or the input dimension");
    Mat Fn(static_cast<Eigen::Index>(total), c);
    Vec gn(static_cast<Eigen::Index>(total));
    Eigen::Index k = 0;
    for (auto r : zero) {
      Fn.row(k) = F.row(r).head(c);
      gn(k++) = g(r);
    }
    for (auto i : pos)
      for (auto j : neg) {
        const double a = F(i, c), b = -F(j, c);
        Fn.row(k) = F.row(i).head(c) / a + F.row(j).head(c) / b;
        gn(k++) = g(i) / a + g(j) / b;
      }
    // Zero rows with negative offset would mean an empty projection, impossible for a nonempty P.
    for (Eigen::Index r = 0; r < Fn.rows(); ++r)
      if (Fn.row(r).norm() <= Polytope::kZeroRow) gn(r) = std::max(gn(r), 0.0);
    Polytope next(Fn, gn);
    if (next.rows() == 0) {
      cur = next;
      continue;
    }
    cur = remove_redundancy(next);
  }
  return cur;
}

/// Counterclockwise vertices of a bounded 2D polytope (one column each).
inline Mat vertices_2d(const Polytope& p, double tol = 1e-9) {
  require(p.dim() == 2, "vertices_2d: polytope must be 2D");
  if (is_empty(p)) throw ValidationError("vertices_2d: polytope is empty");
  if (!is_bounded(p)) throw ValidationError("vertices_2d: polytope is unbounded");
  std::vector<Vec> pts;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = i + 1; j < p.rows(); ++j) {
      Eigen::Matrix2d M;
      M << p.F().row(i), p.F().row(j);
      if (std::abs(M.determinant()) <= 1e-12) continue;
      const Vec v = M.partialPivLu().solve(Eigen::Vector2d(p.g()(i), p.g()(j)));
      if (!contains_point(p, v, tol)) continue;
      bool seen = false;
      for (const auto& q : pts)
        if ((q - v).norm() <= 1e-9 * (1.0 + v.norm())) seen = true;
      if (!seen) pts.push_back(v);
    }
  Vec mid = Vec::Zero(2);
  for (const auto& q : pts) mid += q / static_cast<double>(pts.size());
  std::sort(pts.begin(), pts.end(), [&](const Vec& a, const Vec& b) {
    return std::atan2(a(1) - mid(1), a(0) - mid(0)) < std::atan2(b(1) - mid(1), b(0) - mid(0));
  });
  Mat V(2, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) V.col(static_cast<Eigen::Index>(i)) = pts[i];
  return V;
}

inline io::Json polytope_json(const Polytope& p) { return {{"F", io::mat_json(p.F())}, {"g", io::vec_json(p.g())}}; }

inline Polytope json_polytope(const io::Json& j) {
  try {
    return {io::json_mat(j.at("F")), io::json_vec(j.at("g"))};
  } catch (const io::Json::exception& e) {
    throw ValidationError(std::string("polytope JSON: ") + e.what());
  }
}

/// Closed vertex loop for plotting.
inline io::CsvTable vertices_csv(const Polytope& p) {
  const Mat V = vertices_2d(p);
  io::CsvTable t;
  t.header = {"x1", "x2"};
  t.data.resize(V.cols() + 1, 2);
  t.data.topRows(V.cols()) = V.transpose();
  t.data.row(V.cols()) = V.col(0).transpose();
  return t;
}

}  // namespace lpv_smpc::geometry

#endif  // LPV_SMPC_GEOMETRY_POLYTOPE_HPP
