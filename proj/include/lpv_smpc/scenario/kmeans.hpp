#ifndef LPV_SMPC_SCENARIO_KMEANS_HPP
#define LPV_SMPC_SCENARIO_KMEANS_HPP

#include <algorithm>
#include <numeric>
#include <vector>

#include "lpv_smpc/rng.hpp"

namespace lpv_smpc::scenario {

struct KmeansSettings {
  int restarts = 10;
  int max_iterations = 300;
  double shift_tol = 1e-9;
};

struct KmeansResult {
  Mat centroids;                        // dim x C, sorted lexicographically
  std::vector<int> assignment;          // per sample
  std::vector<int> counts;              // per cluster
  double inertia = 0.0;
  std::vector<double> inertia_history;  // best restart, one entry per assignment step
  int iterations = 0;
  int best_restart = 0;
};

namespace detail {

inline int count_distinct_columns(const Mat& x, int stop_at) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(x.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&x](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < x.rows(); ++r)
      if (x(r, a) != x(r, b)) return x(r, a) < x(r, b);
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  int distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size() && distinct < stop_at; ++i)
    if (less(idx[i - 1], idx[i])) ++distinct;
  return distinct;
}

inline Vec squared_distances(const Mat& x, const Vec& c) { return (x.colwise() - c).colwise().squaredNorm().transpose(); }

/// Assign to nearest centroid (lowest index on ties); returns inertia.
inline double assign(const Mat& x, const Mat& c, std::vector<int>& a, Vec& d2) {
  const Eigen::Index n = x.cols();
  a.assign(static_cast<std::size_t>(n), 0);
  d2 = Vec::Constant(n, kInf);
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    const Vec d = squared_distances(x, c.col(j));
    for (Eigen::Index i = 0; i < n; ++i)
      if (d(i) < d2(i)) {
        d2(i) = d(i);
        a[static_cast<std::size_t>(i)] = static_cast<int>(j);
      }
  }
  return d2.sum();
}

/// Distance-weighted seeding.
inline Mat plus_plus_seed(const Mat& x, int C, Rng& rng) {
  const Eigen::Index n = x.cols();
  Mat c(x.rows(), C);
  c.col(0) = x.col(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vec d2 = squared_distances(x, c.col(0));
  for (int j = 1; j < C; ++j) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total <= 0.0) {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    } else {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > r) {
          pick = i;
          break;
        }
      }
    }
    c.col(j) = x.col(pick);
    d2 = d2.cwiseMin(squared_distances(x, c.col(j)));
  }
  return c;
}

}  // namespace detail

/**
 * Lloyd iterations from ++ seeding, best of several restarts by inertia. Samples are columns.
 * Empty clusters are reseeded at the sample farthest from its centroid.
 */
inline KmeansResult kmeans_cluster(const Mat& samples, int C, std::uint64_t seed, const KmeansSettings& s = {}) {
  require(C >= 1, "kmeans: C must be at least 1");
  require(samples.cols() >= C, "kmeans: fewer samples than clusters");
  require(s.restarts >= 1 && s.max_iterations >= 1, "kmeans: restarts and iterations must be positive");
  if (detail::count_distinct_columns(samples, C) < C)
    throw ValidationError("kmeans: fewer distinct samples than clusters (duplicate centroids would result)");
  const Rng root = Rng(seed).split("kmeans");
  KmeansResult best;
  best.inertia = kInf;
  for (int r = 0; r < s.restarts; ++r) {
    Rng rng = root.split(static_cast<std::uint64_t>(r));
    Mat c = detail::plus_plus_seed(samples, C, rng);
    std::vector<int> a;
    Vec d2;
    std::vector<double> hist;
    int it = 0;
    double inertia = detail::assign(samples, c, a, d2);
    hist.push_back(inertia);
    for (it = 1; it <= s.max_iterations; ++it) {
      Mat sum = Mat::Zero(samples.rows(), C);
      std::vector<int> cnt(static_cast<std::size_t>(C), 0);
      for (Eigen::Index i = 0; i < samples.cols(); ++i) {
        sum.col(a[static_cast<std::size_t>(i)]) += samples.col(i);
        ++cnt[static_cast<std::size_t>(a[static_cast<std::size_t>(i)])];
      }
      Mat next = c;
      for (int j = 0; j < C; ++j) {
        if (cnt[static_cast<std::size_t>(j)] > 0) {
          next.col(j) = sum.col(j) / cnt[static_cast<std::size_t>(j)];
        } else {
          Eigen::Index far = 0;
          d2.maxCoeff(&far);
          next.col(j) = samples.col(far);
          d2(far) = 0.0;
        }
      }
      const double shift = (next - c).colwise().norm().maxCoeff();
      c = next;
      inertia = detail::assign(samples, c, a, d2);
      hist.push_back(inertia);
      if (shift <= s.shift_tol) break;
    }
    if (inertia < best.inertia) {
      best.centroids = c;
      best.assignment = a;
      best.inertia = inertia;
      best.inertia_history = hist;
      best.iterations = std::min(it, s.max_iterations);
      best.best_restart = r;
    }
  }
  // Canonical order: lexicographic on centroid coordinates.
  std::vector<int> order(static_cast<std::size_t>(C));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&best](int p, int q) {
    for (Eigen::Index r = 0; r < best.centroids.rows(); ++r)
      if (best.centroids(r, p) != best.centroids(r, q)) return best.centroids(r, p) < best.centroids(r, q);
    return p < q;
  });
  std::vector<int> rank(static_cast<std::size_t>(C));
  Mat sorted(best.centroids.rows(), C);
  for (int j = 0; j < C; ++j) {
    sorted.col(j) = best.centroids.col(order[static_cast<std::size_t>(j)]);
    rank[static_cast<std::size_t>(order[static_cast<std::size_t>(j)])] = j;
  }
  best.centroids = sorted;
  best.counts.assign(static_cast<std::size_t>(C), 0);
  for (auto& v : best.assignment) {
    v = rank[static_cast<std::size_t>(v)];
    ++best.counts[static_cast<std::size_t>(v)];
  }
  return best;
}

}  // namespace lpv_smpc::scenario

#endif  // LPV_SMPC_SCENARIO_KMEANS_HPP
