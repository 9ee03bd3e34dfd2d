#ifndef LPV_SMPC_SCENARIO_SAMPLING_HPP
#define LPV_SMPC_SCENARIO_SAMPLING_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <vector>

#include "lpv_smpc/bnn/model.hpp"

namespace lpv_smpc::scenario {

/// What is known about future scheduling beyond membership in the scheduling set.
struct SchedulingKnowledge {
  std::optional<double> rate_bound;  // |theta(k+1) - theta(k)| <= rate_bound per coordinate
  std::optional<Vec> start;          // measured theta at stage 0
};

/**
 * L trajectories of K steps (rows). Without a rate bound every step is uniform over the set;
 * with one, each step is a clipped random walk.
 */
inline std::vector<Mat> sample_scheduling_trajectories(const Box& sched_set, int L, int K, const SchedulingKnowledge& know,
                                                       std::uint64_t seed) {
  require(L >= 1 && K >= 1, "sample_scheduling_trajectories: L and K must be positive");
  require(!know.rate_bound || *know.rate_bound >= 0.0, "sample_scheduling_trajectories: rate bound must be non-negative");
  require(!know.start || sched_set.contains(*know.start, 1e-12), "sample_scheduling_trajectories: start outside the scheduling set");
  const Rng root = Rng(seed).split("scenario.trajectories");
  std::vector<Mat> out;
  out.reserve(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    Rng rng = root.split(static_cast<std::uint64_t>(l));
    Mat t(K, sched_set.dim());
    for (int k = 0; k < K; ++k) {
      Vec th;
      if (k == 0 && know.start) {
        th = *know.start;
      } else if (k == 0 || !know.rate_bound) {
        th = rng.uniform_in(sched_set);
      } else {
        const double d = *know.rate_bound;
        th = t.row(k - 1).transpose();
        for (Eigen::Index i = 0; i < th.size(); ++i) th(i) += rng.uniform(-d, d);
        th = sched_set.clamp(th);
      }
      t.row(k) = th.transpose();
    }
    out.push_back(std::move(t));
  }
  return out;
}

/// [vec(A); vec(B)] for a realization, both row-major.
inline Vec stack_realization(const Mat& A, const Mat& B) {
  Vec z(A.size() + B.size());
  z << vec_rowmajor(A), vec_rowmajor(B);
  return z;
}

inline std::pair<Mat, Mat> split_realization(const Vec& z, int n_x, int n_u) {
  require(z.size() == n_x * n_x + n_x * n_u, "split_realization: size mismatch");
  return {unvec_rowmajor(z.head(n_x * n_x), n_x, n_x), unvec_rowmajor(z.tail(n_x * n_u), n_x, n_u)};
}

namespace detail {

/// Network outputs stacked as realization vectors, one column per theta column.
inline Mat realization_columns(const bnn::BnnLpvModel& m, const bnn::ModelWeights& w, const Mat& theta_cols) {
  const Mat oa = bnn::forward(m.net_a, w.a, m.net_a.input_batch(theta_cols));
  const Mat ob = bnn::forward(m.net_b, w.b, m.net_b.input_batch(theta_cols));
  Mat z(oa.rows() + ob.rows(), theta_cols.cols());
  z << oa, ob;
  return z;
}

inline bnn::ModelWeights draw_weights(const bnn::BnnLpvModel& m, std::uint64_t seed, int d) {
  Rng rng = Rng(seed).split("scenario.draws").split(static_cast<std::uint64_t>(d));
  return m.concrete(m.draw_noise(rng));
}

/// Sorted uniform subsample of {0..total-1} of the given size (all indices when total <= size).
inline std::vector<std::int64_t> subsample(std::int64_t total, std::int64_t size, Rng& rng) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < total; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (total > size) {
    for (std::int64_t i = 0; i < size; ++i) {
      const auto j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(total - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(size));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

}  // namespace detail

/**
 * Per-stage realization samples (columns of [vec(A); vec(B)]) over trajectories x model draws.
 * Each stage keeps a seeded uniform subsample of at most max_per_stage (trajectory, draw) pairs.
 * Draw d uses the same weights at every stage.
 */
inline std::vector<Mat> evaluate_matrix_samples(const bnn::BnnLpvModel& m, const std::vector<Mat>& trajectories, int n_mc,
                                                std::uint64_t seed, int max_per_stage = 20000) {
  require(n_mc >= 1, "evaluate_matrix_samples: n_mc must be at least 1");
  require(!trajectories.empty(), "evaluate_matrix_samples: no trajectories");
  require(max_per_stage >= 1, "evaluate_matrix_samples: max_per_stage must be positive");
  const auto L = static_cast<std::int64_t>(trajectories.size());
  const auto K = trajectories.front().rows();
  for (const auto& t : trajectories)
    require(t.rows() == K && t.cols() == m.n_theta, "evaluate_matrix_samples: trajectory shape mismatch");
  std::map<int, bnn::ModelWeights> cache;
  auto weights = [&](int d) -> const bnn::ModelWeights& {
    auto it = cache.find(d);
    if (it == cache.end()) it = cache.emplace(d, detail::draw_weights(m, seed, d)).first;
    return it->second;
  };
  const Rng root = Rng(seed).split("scenario.subsample");
  std::vector<Mat> out;
  for (Eigen::Index k = 0; k < K; ++k) {
    Rng rng = root.split(static_cast<std::uint64_t>(k));
    const auto pairs = detail::subsample(L * n_mc, max_per_stage, rng);  // pair = d * L + l
    Mat z(m.n_x * m.n_x + m.n_x * m.n_u, static_cast<Eigen::Index>(pairs.size()));
    std::size_t i = 0;
    while (i < pairs.size()) {
      const int d = static_cast<int>(pairs[i] / L);
      std::size_t e = i;
      while (e < pairs.size() && pairs[e] / L == d) ++e;
      Mat th(m.n_theta, static_cast<Eigen::Index>(e - i));
      for (std::size_t q = i; q < e; ++q) th.col(static_cast<Eigen::Index>(q - i)) = trajectories[static_cast<std::size_t>(pairs[q] % L)].row(k).transpose();
      z.middleCols(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e - i)) = detail::realization_columns(m, weights(d), th);
      i = e;
    }
    out.push_back(std::move(z));
  }
  return out;
}

/// Elementwise mean +- beta * std of the samples: (upper, lower).
inline std::pair<Vec, Vec> worst_case_scenarios(const Mat& samples, double beta) {
  require(beta > 0.0, "worst_case_scenarios: beta must be positive");
  require(samples.cols() >= 1, "worst_case_scenarios: no samples");
  const Vec mu = samples.rowwise().mean();
  const Vec sd = samples.cols() > 1 ? Vec(((samples.colwise() - mu).cwiseAbs2().rowwise().sum() / double(samples.cols() - 1)).cwiseSqrt())
                                    : Vec(Vec::Zero(samples.rows()));
  return {mu + beta * sd, mu - beta * sd};
}

/// Worst cases over the scheduling set: uniform thetas x model draws.
inline std::pair<Vec, Vec> worst_case_scenarios(const bnn::BnnLpvModel& m, const Box& sched_set, double beta, int n_theta,
                                                int n_mc, std::uint64_t seed) {
  const auto traj = sample_scheduling_trajectories(sched_set, n_theta, 1, {}, Rng(seed).split("worst").next_u64());
  return worst_case_scenarios(evaluate_matrix_samples(m, traj, n_mc, seed, n_theta * n_mc).front(), beta);
}

}  // namespace lpv_smpc::scenario

#endif  // LPV_SMPC_SCENARIO_SAMPLING_HPP
