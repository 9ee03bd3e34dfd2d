#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "lpv_smpc/bnn.hpp"
#include "lpv_smpc/scenario.hpp"

using namespace lpv_smpc;
using namespace lpv_smpc::scenario;

namespace {

bnn::BnnLpvModel small_model(double sigma, std::uint64_t seed = 1) {
  auto m = bnn::make_model("affine", 2, 1, 3);
  Rng rng(seed);
  bnn::init_weights(m, rng);
  m.set_sigma(sigma);
  return m;
}

StageScenarios manual_stage(const Mat& X, const Vec& p, int n_x, int n_u) {
  StageScenarios s;
  s.n_x = n_x;
  s.n_u = n_u;
  s.n_clusters = static_cast<int>(X.cols());
  s.realizations = X;
  s.p = p;
  return s;
}

}  // namespace

TEST(Trajectories, PointSetGivesConstantTrajectories) {
  const Box pt(Vec((Vec(2) << 0.3, -0.2).finished()), Vec((Vec(2) << 0.3, -0.2).finished()));
  for (const auto& t : sample_scheduling_trajectories(pt, 5, 7, {}, 1))
    for (Eigen::Index k = 0; k < t.rows(); ++k) EXPECT_EQ(t.row(k), pt.lower.transpose());
}

TEST(Trajectories, UniformMeanNearZero) {
  const auto traj = sample_scheduling_trajectories(Box::symmetric(3, 1.0), 500, 1, {}, 2);
  Vec mean = Vec::Zero(3);
  for (const auto& t : traj) mean += t.row(0).transpose() / 500.0;
  const double sd = 1.0 / std::sqrt(3.0);
  for (int i = 0; i < 3; ++i) EXPECT_LE(std::abs(mean(i)), 3.0 * sd / std::sqrt(500.0));
}

TEST(Trajectories, ZeroRateBoundFreezesInitialDraw) {
  SchedulingKnowledge k;
  k.rate_bound = 0.0;
  for (const auto& t : sample_scheduling_trajectories(Box::symmetric(2, 1.0), 4, 6, k, 3))
    for (Eigen::Index r = 1; r < t.rows(); ++r) EXPECT_EQ(t.row(r), t.row(0));
}

TEST(Trajectories, RateBoundAndStartRespected) {
  SchedulingKnowledge k;
  k.rate_bound = 0.05;
  k.start = (Vec(2) << 0.9, -0.4).finished();
  const Box th = Box::symmetric(2, 1.0);
  for (const auto& t : sample_scheduling_trajectories(th, 10, 20, k, 4)) {
    EXPECT_EQ(t.row(0), k.start->transpose());
    for (Eigen::Index r = 1; r < t.rows(); ++r) {
      EXPECT_LE((t.row(r) - t.row(r - 1)).cwiseAbs().maxCoeff(), 0.05 + 1e-15);
      EXPECT_TRUE(th.contains(t.row(r).transpose()));
    }
  }
}

TEST(Evaluate, DeterministicModelAndConstantThetaGiveIdenticalSamples) {
  auto m = small_model(0.05);
  for (auto* l : m.all_layers())
    if (l->variational) {
      l->rho_W.setConstant(-1000.0);
      l->rho_b.setConstant(-1000.0);
    }
  const std::vector<Mat> traj(6, Mat::Constant(2, 3, 0.25));
  const auto s = evaluate_matrix_samples(m, traj, 7, 1);
  ASSERT_EQ(s.size(), 2u);
  for (const auto& st : s)
    for (Eigen::Index c = 1; c < st.cols(); ++c) EXPECT_EQ(st.col(c), st.col(0));
}

TEST(Evaluate, SubsamplesLargeSets) {
  auto m = small_model(0.05);
  const auto traj = sample_scheduling_trajectories(Box::symmetric(3, 1.0), 500, 1, {}, 5);
  const auto s = evaluate_matrix_samples(m, traj, 500, 6);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].rows(), 6);
  EXPECT_EQ(s[0].cols(), 20000);
}

TEST(Evaluate, SampleMeanMatchesPosteriorMean) {
  auto m = small_model(0.1, 3);
  Vec th(3);
  th << 0.2, -0.6, 0.4;
  const std::vector<Mat> traj(200, Mat(th.transpose()));
  const Mat s = evaluate_matrix_samples(m, traj, 10, 7).front();
  const Vec mean = s.rowwise().mean();
  const Vec sd = ((s.colwise() - mean).cwiseAbs2().rowwise().sum() / double(s.cols() - 1)).cwiseSqrt();
  // Posterior mean of the affine map equals the network at mean weights.
  const auto [A, B] = bnn::mean_model(m)(th);
  const Vec ref = stack_realization(A, B);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_LE(std::abs(mean(i) - ref(i)), 3.0 * sd(i) / std::sqrt(10.0) + 1e-12) << i;
}

TEST(Kmeans, TwoSeparatedPairs) {
  Mat x(1, 4);
  x << 0, 0, 10, 10;
  const auto r = kmeans_cluster(x, 2, 1);
  EXPECT_EQ(r.centroids(0, 0), 0.0);
  EXPECT_EQ(r.centroids(0, 1), 10.0);
  EXPECT_EQ(r.inertia, 0.0);
  EXPECT_EQ(r.counts, (std::vector<int>{2, 2}));
}

TEST(Kmeans, SingleClusterIsSampleMean) {
  Rng rng(3);
  const Mat x = rng.normal_mat(3, 40);
  const auto r = kmeans_cluster(x, 1, 2);
  EXPECT_LE((r.centroids.col(0) - x.rowwise().mean()).norm(), 1e-12);
}

TEST(Kmeans, MatchesExhaustivePartitionOptimum) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    Mat x(1, 8);
    for (int i = 0; i < 8; ++i) x(0, i) = rng.uniform(-5.0, 5.0);
    double best = kInf;
    for (int mask = 1; mask < (1 << 8) - 1; ++mask) {
      double s[2] = {0, 0}, s2[2] = {0, 0};
      int n[2] = {0, 0};
      for (int i = 0; i < 8; ++i) {
        const int g = (mask >> i) & 1;
        s[g] += x(0, i);
        s2[g] += x(0, i) * x(0, i);
        ++n[g];
      }
      best = std::min(best, s2[0] - s[0] * s[0] / n[0] + s2[1] - s[1] * s[1] / n[1]);
    }
    EXPECT_NEAR(kmeans_cluster(x, 2, trial).inertia, best, 1e-12);
  }
}

TEST(Kmeans, InertiaNonIncreasingAndClustersNonEmpty) {
  Rng rng(4);
  const Mat x = rng.normal_mat(4, 600);
  const auto r = kmeans_cluster(x, 5, 9);
  for (std::size_t i = 1; i < r.inertia_history.size(); ++i) EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] + 1e-12);
  for (int c : r.counts) EXPECT_GT(c, 0);
}

TEST(Kmeans, DuplicateCentroidsRejected) {
  Mat x(1, 5);
  x << 1, 1, 1, 2, 2;
  EXPECT_THROW(kmeans_cluster(x, 3, 1), ValidationError);
  EXPECT_THROW(kmeans_cluster(x, 0, 1), ValidationError);
}

TEST(Kmeans, DeterministicGivenSeed) {
  Rng rng(5);
  const Mat x = rng.normal_mat(2, 300);
  const auto a = kmeans_cluster(x, 3, 11), b = kmeans_cluster(x, 3, 11);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.assignment, b.assignment);
}

TEST(WorstCase, DeterministicSamplesCollapseToMean) {
  const Mat x = Mat::Constant(3, 10, 0.75);
  const auto [hi, lo] = worst_case_scenarios(x, 2.0);
  EXPECT_EQ(hi, Vec::Constant(3, 0.75));
  EXPECT_EQ(lo, Vec::Constant(3, 0.75));
}

TEST(WorstCase, MeanPlusMinusBetaStd) {
  Mat x(1, 4);
  x << 1, 2, 3, 4;
  const double sd = std::sqrt(5.0 / 3.0);
  const auto [hi, lo] = worst_case_scenarios(x, 1.5);
  EXPECT_NEAR(hi(0), 2.5 + 1.5 * sd, 1e-14);
  EXPECT_NEAR(lo(0), 2.5 - 1.5 * sd, 1e-14);
  EXPECT_THROW(worst_case_scenarios(x, 0.0), ValidationError);
}

TEST(WorstCase, ModelOverloadUsesSchedulingRange) {
  auto m = small_model(0.05);
  const auto [hi, lo] = worst_case_scenarios(m, Box::symmetric(3, 1.0), 1.0, 50, 20, 3);
  EXPECT_EQ(hi.size(), 6);
  EXPECT_TRUE((hi.array() >= lo.array()).all());
}

TEST(MomentMatch, SingleScenario) {
  Mat X(2, 1);
  X << 0.5, -1.0;
  Mat samples(2, 3);
  samples << 0.4, 0.5, 0.6, -1.1, -1.0, -0.9;
  const auto r = match_moments(X, moment_targets(samples));
  EXPECT_EQ(r.p, Vec::Ones(1));
  EXPECT_LE(r.mean_residual.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(MomentMatch, SymmetricPairOracle) {
  Mat X(1, 2);
  X << -1.0, 1.0;
  MomentTargets t;
  t.mean = Vec::Zero(1);
  t.var = Vec::Ones(1);
  t.cov = Vec(0);
  t.third = Vec::Zero(1);
  t.fourth = Vec::Ones(1);
  const auto r = match_moments(X, t);
  EXPECT_NEAR(r.p(0), 0.5, 1e-8);
  EXPECT_NEAR(r.p(1), 0.5, 1e-8);
  EXPECT_LE(r.objective, 1e-8);
}

TEST(MomentMatch, FirstMomentExactWhenMeanInHull) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat samples = (rng.normal_mat(3, 200).array() * 0.1).matrix();
    const auto km = kmeans_cluster(samples, 3, trial);
    const auto [hi, lo] = worst_case_scenarios(samples, 1.0);
    Mat X(3, 5);
    X << km.centroids, hi, lo;
    const auto t = moment_targets(samples);
    const auto r = match_moments(X, t);
    EXPECT_GE(r.p.minCoeff(), 0.0);
    EXPECT_NEAR(r.p.sum(), 1.0, 1e-12);
    if (in_convex_hull(X, t.mean)) {
      EXPECT_LE(r.mean_residual.cwiseAbs().maxCoeff(), 1e-6);
    }
  }
}

TEST(MomentMatch, DimensionMismatchRejected) {
  MomentTargets t = moment_targets(Mat::Ones(2, 3));
  EXPECT_THROW(match_moments(Mat::Ones(3, 2), t), ValidationError);
}

TEST(Stage, BuildStageProbabilitiesAndOrder) {
  auto m = small_model(0.05, 4);
  const auto traj = sample_scheduling_trajectories(Box::symmetric(3, 1.0), 100, 1, {}, 8);
  const Mat s = evaluate_matrix_samples(m, traj, 50, 9).front();
  StageSettings cfg;
  const auto st = build_stage(s, 2, 1, cfg, 10);
  ASSERT_EQ(st.size(), 5);
  EXPECT_NEAR(st.p.sum(), 1.0, 1e-12);
  EXPECT_GE(st.p.minCoeff(), 0.0);
  const auto [hi, lo] = worst_case_scenarios(s, 1.0);
  EXPECT_EQ(st.realizations.col(3), hi);
  EXPECT_EQ(st.realizations.col(4), lo);
  const auto again = build_stage(s, 2, 1, cfg, 10);
  EXPECT_EQ(again.realizations, st.realizations);
  EXPECT_EQ(again.p, st.p);
}

TEST(Tree, FiveScenariosOneBranchStage) {
  Rng rng(1);
  const Mat X = rng.normal_mat(6, 5);
  Vec p(5);
  p << 0.3, 0.3, 0.3, 0.05, 0.05;
  const auto t = build_tree(manual_stage(X, p, 2, 1), 10, 1);
  ASSERT_EQ(t.num_leaves(), 5);
  EXPECT_NEAR(t.leaf_p.sum(), 1.0, 1e-12);
  for (int j = 0; j < 5; ++j) {
    EXPECT_EQ(t.leaf_p(j), p(j));
    EXPECT_EQ(t.frozen_index(j), j);
    const auto first = t.matrices(j, 0);
    for (int k = 1; k < 10; ++k) {
      EXPECT_EQ(t.matrices(j, k).first, first.first);
      EXPECT_EQ(t.matrices(j, k).second, first.second);
    }
    EXPECT_EQ(t.input_group(j, 0), 0);
    EXPECT_EQ(t.input_group(j, 1), j);
  }
}

TEST(Tree, ZeroRobustHorizonIsNominal) {
  Mat X(6, 2);
  X.col(0).setConstant(1.0);
  X.col(1).setConstant(3.0);
  const auto t = build_tree(manual_stage(X, Vec((Vec(2) << 0.25, 0.75).finished()), 2, 1), 4, 0);
  ASSERT_EQ(t.num_leaves(), 1);
  EXPECT_EQ(t.leaf_p(0), 1.0);
  EXPECT_EQ(t.matrices(0, 2).first, Mat::Constant(2, 2, 2.5));
}

TEST(Tree, TwoStageBranchingProducts) {
  Rng rng(2);
  const auto s0 = manual_stage(rng.normal_mat(6, 2), Vec((Vec(2) << 0.3, 0.7).finished()), 2, 1);
  const auto s1 = manual_stage(rng.normal_mat(6, 2), Vec((Vec(2) << 0.6, 0.4).finished()), 2, 1);
  const auto t = build_tree(std::vector<StageScenarios>{s0, s1, s1}, 3, 2);
  ASSERT_EQ(t.num_leaves(), 4);
  const double expect[4] = {0.3 * 0.6, 0.3 * 0.4, 0.7 * 0.6, 0.7 * 0.4};
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(t.leaf_p(j), expect[j], 1e-15);
  EXPECT_EQ(t.input_group(0, 1), t.input_group(1, 1));
  EXPECT_NE(t.input_group(1, 1), t.input_group(2, 1));
  EXPECT_EQ(t.matrices(3, 2).first, s1.matrices(1).first);
  EXPECT_EQ(t.nodes[1].size(), 4u);
}

TEST(Tree, LeafCapEnforced) {
  Rng rng(3);
  const auto s = manual_stage(rng.normal_mat(6, 5), Vec::Constant(5, 0.2), 2, 1);
  EXPECT_THROW(build_tree(s, 10, 4), ValidationError);
  EXPECT_NO_THROW(build_tree(s, 10, 3));
  EXPECT_THROW(build_tree(s, 3, 4), ValidationError);
}

TEST(Tree, JsonRoundTrip) {
  auto m = small_model(0.05, 5);
  const auto traj = sample_scheduling_trajectories(Box::symmetric(3, 1.0), 50, 1, {}, 1);
  const auto st = build_stage(evaluate_matrix_samples(m, traj, 20, 2).front(), 2, 1, StageSettings{}, 3);
  const auto t = build_tree(st, 10, 1);
  const std::string s = tree_json(t).dump();
  const auto r = json_tree(io::Json::parse(s));
  EXPECT_EQ(tree_json(r).dump(), s);
  EXPECT_EQ(r.leaf_p, t.leaf_p);
}
