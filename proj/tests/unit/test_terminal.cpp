#include <gtest/gtest.h>

#include <cmath>

#include "lpv_smpc/terminal.hpp"

using namespace lpv_smpc;
using namespace lpv_smpc::terminal;

namespace {

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

AffineLpvModel scalar_model(double a, double b) {
  AffineLpvModel m;
  m.vertices.emplace_back(scalar(a), scalar(b));
  return m;
}

double scalar_riccati(double a, double b, double q, double r) {
  double p = q;
  for (int i = 0; i < 10000; ++i) p = q + a * a * p - (a * b * p) * (a * b * p) / (r + b * b * p);
  return p;
}

bnn::Batch linear_batch(const Mat& A, const Mat& B, int n, int n_theta, std::uint64_t seed) {
  Rng rng(seed);
  bnn::Batch b;
  b.theta = (rng.normal_mat(n_theta, n).array() * 0.5).matrix();
  b.x = rng.normal_mat(A.rows(), n);
  b.u = rng.normal_mat(B.cols(), n);
  b.xnext = A * b.x + B * b.u;
  return b;
}

AffineLpvModel two_vertex_model() {
  Mat A1(2, 2), A2(2, 2), B(2, 1);
  A1 << 1, 1, 0, 1;
  A2 << 1.1, 1, 0, 0.9;
  B << 0.5, 1;
  AffineLpvModel m;
  m.vertices = {{A1, B}, {A2, B}};
  return m;
}

geometry::Polytope box_poly(int n, double r) { return geometry::Polytope::box(Box::symmetric(n, r)); }

}  // namespace

using geometry::Polytope;

TEST(Extract, FiveScenariosGiveFiveVertices) {
  auto m = bnn::make_model("affine", 2, 1, 3);
  Rng rng(1);
  bnn::init_weights(m, rng);
  m.set_sigma(0.05);
  const auto traj = scenario::sample_scheduling_trajectories(Box::symmetric(3, 1.0), 100, 1, {}, 2);
  const Mat samples = scenario::evaluate_matrix_samples(m, traj, 50, 3).front();
  const auto st = scenario::build_stage(samples, 2, 1, {}, 4);
  const auto aff = extract_extreme_realizations(st);
  ASSERT_EQ(aff.q(), 5);
  for (int i = 1; i < 5; ++i) EXPECT_LE((aff.vertices[static_cast<std::size_t>(i)].second - aff.vertices[0].second).norm(), 1e-12);
  // Cluster centroids average to the sample mean, so it lies in the vertex hull.
  Mat V(4, 5);
  for (int i = 0; i < 5; ++i) V.col(i) = vec_rowmajor(aff.vertices[static_cast<std::size_t>(i)].first);
  EXPECT_TRUE(scenario::in_convex_hull(V, samples.topRows(4).rowwise().mean(), 1e-8));
}

TEST(Extract, DeterministicModelGivesIdenticalVertices) {
  scenario::StageScenarios st;
  st.n_x = 2;
  st.n_u = 1;
  st.realizations = Mat::Constant(6, 5, 0.3);
  st.p = Vec::Constant(5, 0.2);
  const auto aff = extract_extreme_realizations(st);
  ASSERT_EQ(aff.q(), 5);
  for (const auto& v : aff.vertices) EXPECT_EQ(v.first, aff.vertices[0].first);
}

TEST(Extract, BoxVertexDiagnosticMode) {
  Vec lo = Vec::Zero(6), hi = Vec::Zero(6);
  hi(0) = 1.0;
  hi(3) = 2.0;
  const auto m = box_vertices(hi, lo, 2, 1);
  EXPECT_EQ(m.q(), 4);
}

TEST(Transform, SingleVertexIsConstantOne) {
  Mat A(2, 2), B(2, 1);
  A << 0.9, 0.1, 0, 0.8;
  B << 0, 1;
  AffineLpvModel m;
  m.vertices = {{A, B}};
  const auto data = linear_batch(A + 0.01 * Mat::Ones(2, 2), B, 50, 2, 1);
  TransformConfig cfg;
  cfg.epochs = 20;
  TransformReport rep;
  const auto t = train_transform_net(m, data, data, cfg, &rep);
  EXPECT_EQ(t(Vec(Vec::Zero(2)))(0), 1.0);
  EXPECT_NEAR(rep.train_mse, fixed_weight_mse(m, Vec::Ones(1), data), 1e-15);
}

TEST(Transform, RecoversTheTrueVertex) {
  auto m = two_vertex_model();
  Mat A3 = 0.5 * Mat::Identity(2, 2);
  m.vertices.emplace_back(A3, m.vertices[0].second);
  const auto data = linear_batch(m.vertices[1].first, m.vertices[1].second, 200, 2, 2);
  TransformReport rep;
  TransformConfig cfg;
  train_transform_net(m, data, data, cfg, &rep);
  EXPECT_LE(rep.train_mse, fixed_weight_mse(m, Vec::Unit(3, 1), data) + 1e-6);
}

TEST(Transform, OutputsOnTheSimplex) {
  auto t = make_transform_net(2, 5);
  Rng rng(3);
  for (auto& l : t.net.layers) l.init_glorot(rng);
  for (auto& l : t.net.layers) l.b = rng.normal_mat(l.b.rows(), 1) * 3.0;
  const Mat th = rng.normal_mat(2, 200);
  const Mat s = t(th);
  EXPECT_GE(s.minCoeff(), 0.0);
  EXPECT_LE((s.colwise().sum().array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(Transform, JsonRoundTrip) {
  auto t = make_transform_net(3, 4);
  Rng rng(4);
  for (auto& l : t.net.layers) l.init_glorot(rng);
  const auto r = json_transform(io::Json::parse(transform_json(t).dump()));
  const Vec th = (Vec(3) << 0.1, -0.4, 0.9).finished();
  EXPECT_EQ(r(th), t(th));
}

TEST(Lmi, ScalarStableSystemFeasibleAndAboveRiccati) {
  const auto sol = solve_lmi(scalar_model(0.5, 1.0), scalar(1.0), scalar(1.0));
  const double p = sol.P[0](0, 0), k = sol.K[0](0, 0);
  EXPECT_LT(std::abs(0.5 + k), 1.0);
  // Any quadratic bound on the closed-loop cost dominates the Riccati cost-to-go.
  EXPECT_GE(p, scalar_riccati(0.5, 1.0, 1.0, 1.0) - 1e-9);
  EXPECT_LE(sol.max_k_residual, 1e-8);
  EXPECT_GE(sol.min_eigenvalue, 1e-6 - 1e-7);
}

TEST(Lmi, RiccatiGainSatisfiesDecreaseWithSdpCost) {
  // The Riccati pair is tight in the decrease condition; the SDP pair is strictly inside it.
  const auto sol = solve_lmi(scalar_model(0.5, 1.0), scalar(1.0), scalar(1.0));
  const double p = sol.P[0](0, 0), k = sol.K[0](0, 0), ac = 0.5 + k;
  EXPECT_LT(ac * ac * p - p + 1.0 + k * k, 0.0);
}

TEST(Lmi, UncontrollableUnstableInfeasible) {
  EXPECT_THROW(solve_lmi(scalar_model(2.0, 0.0), scalar(1.0), scalar(1.0)), NumericalError);
}

TEST(Lmi, ReconstructionConsistencyAndStructure) {
  const auto m = two_vertex_model();
  const auto sdp = assemble_lmi(m, Mat::Identity(2, 2), scalar(1.0));
  EXPECT_EQ(sdp.constraints().size(), 4u + 2u);
  EXPECT_EQ(sdp.constraints().front().expr.rows(), 2 + 2 + 1 + 2 + 1);
  const auto sol = solve_lmi(m, Mat::Identity(2, 2), scalar(1.0));
  for (int i = 0; i < 2; ++i)
    EXPECT_LE((sol.L[static_cast<std::size_t>(i)] - sol.K[static_cast<std::size_t>(i)] * sol.X[static_cast<std::size_t>(i)]).norm(),
              1e-8 * sol.L[static_cast<std::size_t>(i)].norm());
  EXPECT_THROW(assemble_lmi(m, -Mat::Identity(2, 2), scalar(1.0)), ValidationError);
}

TEST(Synth, ScalarTerminalIntervalByHand) {
  const auto m = scalar_model(0.5, 1.0);
  const Polytope X = box_poly(1, 6.0), U = box_poly(1, 1.0);
  TerminalSettings s;
  s.N = 3;
  const auto t = synth_terminal(m, scalar(1.0), scalar(1.0), X, U, s);
  const double k = t.K[0](0, 0);
  const double r = std::min(6.0, 1.0 / std::abs(k));  // |a + bk| < 1 so the constraint set is invariant
  EXPECT_NEAR(geometry::support(t.omega, Vec::Ones(1)), r, 1e-9);
  EXPECT_NEAR(-geometry::support(t.omega, -Vec::Ones(1)), -r, 1e-9);
  EXPECT_TRUE(geometry::is_subset(t.omega, t.cn));
  EXPECT_TRUE(geometry::is_subset(t.cn, X));
}

TEST(Synth, ScalarDecrementByHand) {
  const auto m = scalar_model(0.5, 1.0);
  const auto t = synth_terminal(m, scalar(1.0), scalar(1.0), box_poly(1, 6.0), box_poly(1, 1.0));
  const double p = t.P[0](0, 0), k = t.K[0](0, 0);
  const auto c = verify_decrease(t, box_poly(1, 1.0), 50, 7);
  EXPECT_TRUE(c.ok()) << c.witness;
  const double r = geometry::support(t.omega, Vec::Ones(1));
  const double coef = (0.5 + k) * (0.5 + k) * p - p + 1.0 + k * k;
  for (double x : {0.0, 0.3 * r, -r})
    EXPECT_NEAR(decrease_slack(t, 0, 0, Vec::Constant(1, x)), coef * x * x, 1e-12 * (1.0 + p * x * x));
  EXPECT_EQ(c.worst_decrease_slack, 0.0);  // attained at the origin probe
}

TEST(Synth, SingleVertexLtiMatchesClassicalInvariantSet) {
  Mat A(2, 2), B(2, 1);
  A << 1, 1, 0, 1;
  B << 0.5, 1;
  AffineLpvModel m;
  m.vertices = {{A, B}};
  const Polytope X = box_poly(2, 6.0), U = box_poly(1, 1.0);
  TerminalSettings s;
  s.compute_doa = false;
  const auto t = synth_terminal(m, Mat::Identity(2, 2), scalar(1.0), X, U, s);
  const Mat Ac = A + B * t.K[0];
  const Polytope Xc = X.stacked(U.preimage(t.K[0]));
  // Oracle: {x | Ac^k x in Xc, k = 0..200} reduced.
  Polytope oracle = Xc;
  Mat Ak = Ac;
  for (int k = 1; k <= 200; ++k, Ak = Ac * Ak) oracle = oracle.stacked(Xc.preimage(Ak));
  oracle = geometry::remove_redundancy(oracle);
  EXPECT_TRUE(geometry::equals(t.omega, oracle, 1e-9));
  EXPECT_EQ(t.omega.rows(), oracle.rows());
}

TEST(Synth, InvarianceAndConstraintsAtVertices) {
  const auto m = two_vertex_model();
  const Polytope X = box_poly(2, 6.0), U = box_poly(1, 1.0);
  TerminalSettings s;
  s.N = 4;
  const auto t = synth_terminal(m, Mat::Identity(2, 2), scalar(1.0), X, U, s);
  const Mat V = geometry::vertices_2d(t.omega);
  for (const Mat& Ac : m.closed_loop(t.K))
    for (Eigen::Index j = 0; j < V.cols(); ++j) EXPECT_TRUE(geometry::contains_point(t.omega, Ac * V.col(j), 1e-7));
  for (Eigen::Index j = 0; j < V.cols(); ++j) EXPECT_LE((t.Xc.F() * V.col(j) - t.Xc.g()).maxCoeff(), 1e-7);
  EXPECT_TRUE(geometry::contains_point(t.omega, Vec::Zero(2), -1e-6));
  EXPECT_TRUE(geometry::is_subset(t.omega, t.cn));
  EXPECT_TRUE(geometry::is_subset(t.cn, X));
  const auto c = verify_decrease(t, U, 1000, 3);
  EXPECT_TRUE(c.ok()) << c.witness;
  EXPECT_EQ(c.probes, 1000);
}

TEST(Synth, TamperedCostFailsTheCertificate) {
  const auto m = two_vertex_model();
  const Polytope U = box_poly(1, 1.0);
  TerminalSettings s;
  s.compute_doa = false;
  auto t = synth_terminal(m, Mat::Identity(2, 2), scalar(1.0), box_poly(2, 6.0), U, s);
  for (auto& P : t.P) P *= 0.1;
  const auto c = verify_decrease(t, U, 20, 1);
  EXPECT_FALSE(c.ok());
  EXPECT_EQ(c.passed, 1);  // only the origin
  EXPECT_FALSE(c.witness.empty());
}

TEST(Synth, JsonRoundTrip) {
  const auto m = two_vertex_model();
  TerminalSettings s;
  s.N = 2;
  auto t = synth_terminal(m, Mat::Identity(2, 2), scalar(1.0), box_poly(2, 6.0), box_poly(1, 1.0), s);
  t.transform = make_transform_net(3, 2);
  const std::string a = terminal_json(t).dump();
  const auto r = json_terminal(io::Json::parse(a));
  EXPECT_EQ(terminal_json(r).dump(), a);
}
