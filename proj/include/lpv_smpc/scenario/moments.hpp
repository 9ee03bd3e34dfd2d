#ifndef LPV_SMPC_SCENARIO_MOMENTS_HPP
#define LPV_SMPC_SCENARIO_MOMENTS_HPP

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "lpv_smpc/opt/simplex.hpp"

namespace lpv_smpc::scenario {

/**
 * Central moments of a sample set (columns), all centered at the sample mean. Covariances are
 * kept for pairs among the first cov_coords coordinates.
 */
struct MomentTargets {
  Vec mean;
  Vec var;
  std::vector<std::pair<int, int>> cov_pairs;
  Vec cov;
  Vec third;
  Vec fourth;

  Eigen::Index dim() const { return mean.size(); }
};

inline MomentTargets moment_targets(const Mat& samples, int cov_coords = 10) {
  require(samples.cols() >= 1, "moment_targets: no samples");
  MomentTargets t;
  const double n = static_cast<double>(samples.cols());
  t.mean = samples.rowwise().mean();
  const Mat d = samples.colwise() - t.mean;
  t.var = d.cwiseAbs2().rowwise().sum() / n;
  t.third = d.array().cube().matrix().rowwise().sum() / n;
  t.fourth = d.array().square().square().matrix().rowwise().sum() / n;
  const int k = std::min<int>(cov_coords, static_cast<int>(samples.rows()));
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) t.cov_pairs.emplace_back(i, j);
  t.cov.resize(static_cast<Eigen::Index>(t.cov_pairs.size()));
  for (std::size_t q = 0; q < t.cov_pairs.size(); ++q)
    t.cov(static_cast<Eigen::Index>(q)) = d.row(t.cov_pairs[q].first).dot(d.row(t.cov_pairs[q].second)) / n;
  return t;
}

struct MomentWeights {
  double mean = 1.0;
  double var = 1.0;
  double cov = 1.0;
  double third = 1.0;
  double fourth = 1.0;
};

struct MomentMatch {
  Vec p;
  Vec mean_residual;  // X p - M
  Vec var_residual;   // centered at the target mean
  Vec cov_residual;
  Vec third_residual;
  Vec fourth_residual;
  double objective = 0.0;
};

namespace detail {

/// Rows of the linear moment map p -> moments, centered at the target mean.
inline Mat moment_rows(const Mat& X, const MomentTargets& t) {
  const Eigen::Index m = t.dim(), s = X.cols(), nc = t.cov.size();
  const Mat d = X.colwise() - t.mean;
  Mat rows(4 * m + nc, s);
  rows.topRows(m) = X;
  rows.middleRows(m, m) = d.cwiseAbs2();
  for (Eigen::Index q = 0; q < nc; ++q)
    rows.row(2 * m + q) = d.row(t.cov_pairs[static_cast<std::size_t>(q)].first).cwiseProduct(d.row(t.cov_pairs[static_cast<std::size_t>(q)].second));
  rows.middleRows(2 * m + nc, m) = d.array().cube().matrix();
  rows.bottomRows(m) = d.array().square().square().matrix();
  return rows;
}

inline Vec moment_rhs(const MomentTargets& t) {
  Vec b(4 * t.dim() + t.cov.size());
  b << t.mean, t.var, t.cov, t.third, t.fourth;
  return b;
}

}  // namespace detail

/**
 * Scenario probabilities matching the target moments: minimize the weighted slack sum subject
 * to the moment equalities with slacks, sum p = 1, p >= 0. Solved lexicographically: the mean
 * slack is minimized first and then held at its optimum while the full objective is minimized.
 */
inline MomentMatch match_moments(const Mat& X, const MomentTargets& t, const MomentWeights& w = {},
                                 const opt::SolverSettings& settings = {}) {
  require(X.cols() >= 1, "match_moments: no scenarios");
  require(X.rows() == t.dim(), "match_moments: realization dimension does not match the targets");
  require(X.allFinite() && t.mean.allFinite() && t.var.allFinite() && t.third.allFinite() && t.fourth.allFinite(),
          "match_moments: non-finite data");
  const Eigen::Index s = X.cols(), m = t.dim(), nc = t.cov.size();
  const Mat rows = detail::moment_rows(X, t);
  const Vec rhs = detail::moment_rhs(t);
  MomentMatch out;
  if (s == 1) {
    out.p = Vec::Ones(1);
  } else {
    // Coordinates with no spread (e.g. a constant B) are matched by any p on the simplex and only
    // leave rounding noise in their rows, which would nearly duplicate the sum row; they are dropped.
    std::vector<bool> flat(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
      const double floor = 1e-9 * (1.0 + std::abs(t.mean(i)));
      flat[static_cast<std::size_t>(i)] = t.var(i) <= floor * floor;
    }
    std::vector<Eigen::Index> kept;
    std::vector<double> wk;
    auto keep_block = [&](Eigen::Index start, Eigen::Index count, double weight, auto is_flat) {
      for (Eigen::Index q = 0; q < count; ++q)
        if (!is_flat(q)) {
          kept.push_back(start + q);
          wk.push_back(weight);
        }
    };
    auto coord_flat = [&](Eigen::Index q) { return static_cast<bool>(flat[static_cast<std::size_t>(q)]); };
    keep_block(0, m, w.mean, coord_flat);
    const auto n_mean = static_cast<Eigen::Index>(kept.size());
    keep_block(m, m, w.var, coord_flat);
    keep_block(2 * m, nc, w.cov, [&](Eigen::Index q) {
      const auto& pr = t.cov_pairs[static_cast<std::size_t>(q)];
      return coord_flat(pr.first) || coord_flat(pr.second);
    });
    keep_block(2 * m + nc, m, w.third, coord_flat);
    keep_block(3 * m + nc, m, w.fourth, coord_flat);
    const auto nr = static_cast<Eigen::Index>(kept.size());
    Mat krows(nr, s);
    Vec krhs(nr);
    for (Eigen::Index r = 0; r < nr; ++r) {
      krows.row(r) = rows.row(kept[static_cast<std::size_t>(r)]);
      krhs(r) = rhs(kept[static_cast<std::size_t>(r)]);
    }
    // Each row is divided by its magnitude (moments span many decades); slacks are in scaled
    // units, so their costs carry the scale back and the objective stays in raw units.
    Vec scale(nr);
    for (Eigen::Index r = 0; r < nr; ++r) {
      const double c = std::max(std::abs(krhs(r)), krows.row(r).cwiseAbs().maxCoeff());
      scale(r) = c > 0.0 ? c : 1.0;
    }
    // Variables: p (s), minus slacks (nr), plus slacks (nr).
    opt::LinearProgram lp(s + 2 * nr);
    lp.lower.setZero();
    lp.A_eq = Mat::Zero(nr + 1, s + 2 * nr);
    lp.A_eq.topLeftCorner(nr, s) = scale.cwiseInverse().asDiagonal() * krows;
    lp.A_eq.block(0, s, nr, nr) = Mat::Identity(nr, nr);
    lp.A_eq.block(0, s + nr, nr, nr) = -Mat::Identity(nr, nr);
    lp.A_eq.block(nr, 0, 1, s).setOnes();
    lp.b_eq = Vec(nr + 1);
    lp.b_eq << krhs.cwiseQuotient(scale), 1.0;
    const Vec wrow = Eigen::Map<const Vec>(wk.data(), nr).cwiseProduct(scale);
    Vec mean_cost = Vec::Zero(s + 2 * nr);
    mean_cost.segment(s, n_mean) = wrow.head(n_mean);
    mean_cost.segment(s + nr, n_mean) = wrow.head(n_mean);
    lp.cost = mean_cost;
    const auto first = opt::solve_lp(lp, settings);
    if (!first.optimal()) throw NumericalError(std::string("match_moments: mean stage LP ") + opt::to_string(first.status));
    lp.cost.setZero();
    lp.cost.segment(s, nr) = wrow;
    lp.cost.segment(s + nr, nr) = wrow;
    lp.A_ineq = mean_cost.transpose();
    lp.b_ineq = Vec::Constant(1, first.objective + 1e-12 * (1.0 + rhs.head(m).cwiseAbs().sum()));
    const auto second = opt::solve_lp(lp, settings);
    if (!second.optimal()) throw NumericalError(std::string("match_moments: full stage LP ") + opt::to_string(second.status));
    out.p = second.primal.head(s).cwiseMax(0.0);
    out.p /= out.p.sum();
  }
  const Vec r = rows * out.p - rhs;
  out.mean_residual = r.head(m);
  out.var_residual = r.segment(m, m);
  out.cov_residual = r.segment(2 * m, nc);
  out.third_residual = r.segment(2 * m + nc, m);
  out.fourth_residual = r.tail(m);
  out.objective = w.mean * out.mean_residual.lpNorm<1>() + w.var * out.var_residual.lpNorm<1>() + w.cov * out.cov_residual.lpNorm<1>() +
                  w.third * out.third_residual.lpNorm<1>() + w.fourth * out.fourth_residual.lpNorm<1>();
  return out;
}

/// Whether a point lies in the convex hull of the columns of X (feasibility LP).
inline bool in_convex_hull(const Mat& X, const Vec& point, double tol = 1e-9) {
  opt::LinearProgram lp(X.cols());
  lp.lower.setZero();
  lp.A_eq = Mat(X.rows() + 1, X.cols());
  lp.A_eq << X, Mat::Ones(1, X.cols());
  lp.b_eq = Vec(X.rows() + 1);
  lp.b_eq << point, 1.0;
  lp.cost.setZero();
  opt::SolverSettings s;
  s.feasibility_tol = tol;
  return opt::solve_lp(lp, s).optimal();
}

}  // namespace lpv_smpc::scenario

#endif  // LPV_SMPC_SCENARIO_MOMENTS_HPP
