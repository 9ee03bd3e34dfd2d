#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "lpv_smpc/geometry.hpp"
#include "lpv_smpc/rng.hpp"

using namespace lpv_smpc;
using namespace lpv_smpc::geometry;

namespace {

// Brute-force vertices: every n-subset of rows, solved and filtered by feasibility.
std::vector<Vec> brute_vertices(const Mat& F, const Vec& g, double tol = 1e-9) {
  const Eigen::Index n = F.cols(), m = F.rows();
  std::vector<Vec> out;
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == n) {
      Mat M(n, n);
      Vec b(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        M.row(i) = F.row(idx[static_cast<std::size_t>(i)]);
        b(i) = g(idx[static_cast<std::size_t>(i)]);
      }
      Eigen::FullPivLU<Mat> lu(M);
      if (lu.rank() < n) return;
      const Vec v = lu.solve(b);
      if ((F * v - g).maxCoeff() > tol) return;
      for (const auto& q : out)
        if ((q - v).norm() <= 1e-8) return;
      out.push_back(v);
      return;
    }
    for (int r = start; r < m; ++r) {
      idx[static_cast<std::size_t>(depth)] = r;
      rec(r + 1, depth + 1);
    }
  };
  rec(0, 0);
  return out;
}

double cross(const Vec& o, const Vec& a, const Vec& b) { return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0)); }

// Andrew's monotone chain.
std::vector<Vec> hull_2d(std::vector<Vec> p) {
  std::sort(p.begin(), p.end(), [](const Vec& a, const Vec& b) { return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1)); });
  std::vector<Vec> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 1e-12) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i]) <= 1e-12) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

bool same_point_sets(const std::vector<Vec>& a, const Mat& b, double tol) {
  if (static_cast<Eigen::Index>(a.size()) != b.cols()) return false;
  for (const auto& v : a) {
    bool found = false;
    for (Eigen::Index j = 0; j < b.cols(); ++j) found = found || (b.col(j) - v).norm() <= tol;
    if (!found) return false;
  }
  return true;
}

// Tangent halfspaces of the unit circle at random angles, plus shifted redundant copies.
Polytope random_polygon(Rng& rng, int m, int redundant) {
  Mat F(m + redundant, 2);
  Vec g(m + redundant);
  for (int i = 0; i < m; ++i) {
    const double a = 2.0 * std::numbers::pi * (i + rng.uniform(0.0, 0.6)) / m;
    F.row(i) << std::cos(a), std::sin(a);
    g(i) = 1.0 + rng.uniform(0.0, 0.3);
  }
  for (int i = 0; i < redundant; ++i) {
    const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    F.row(m + i) << std::cos(a), std::sin(a);
    g(m + i) = 2.0 + rng.uniform(0.0, 1.0);
  }
  return {F, g};
}

Polytope unit_box(int n) { return Polytope::box(Box::symmetric(n, 1.0)); }

}  // namespace

TEST(Polytope, RowsAreNormalizedAndZeroRowsHandled) {
  Mat F(3, 2);
  F << 3, 4, 0, 0, 0, 2;
  const Polytope p(F, Vec((Vec(3) << 10, 1, 4).finished()));
  ASSERT_EQ(p.rows(), 2);
  EXPECT_NEAR(p.F().row(0).norm(), 1.0, 1e-15);
  EXPECT_NEAR(p.g()(0), 2.0, 1e-15);
  EXPECT_NEAR(p.g()(1), 2.0, 1e-15);
  EXPECT_THROW(Polytope(Mat::Zero(1, 2), Vec::Constant(1, -1.0)), ValidationError);
}

TEST(Redundancy, SimpleDominatedRow) {
  Mat F(2, 1);
  F << 1, 1;
  const auto r = remove_redundancy(Polytope(F, Vec((Vec(2) << 1, 2).finished())));
  ASSERT_EQ(r.rows(), 1);
  EXPECT_EQ(r.g()(0), 1.0);
}

TEST(Redundancy, DuplicatedBoxRows) {
  for (int n : {1, 2, 3}) {
    const Polytope b = unit_box(n);
    EXPECT_EQ(remove_redundancy(b.stacked(b).stacked(b)).rows(), 2 * n);
  }
}

TEST(Redundancy, EmptyInputRejected) {
  Mat F(2, 1);
  F << 1, -1;
  EXPECT_THROW(remove_redundancy(Polytope(F, Vec((Vec(2) << -1, -1).finished()))), ValidationError);
}

TEST(Redundancy, MatchesVertexEnumerationIn2D) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Polytope p = random_polygon(rng, 5 + trial % 6, 6);
    const auto oracle = brute_vertices(p.F(), p.g());
    const Polytope r = remove_redundancy(p);
    EXPECT_EQ(r.rows(), static_cast<Eigen::Index>(oracle.size()));
    EXPECT_TRUE(same_point_sets(oracle, vertices_2d(r), 1e-7));
  }
}

TEST(Redundancy, LowerDimensionalSet) {
  // Segment {x1 = 0, |x2| <= 1} with a redundant row.
  Mat F(5, 2);
  F << 1, 0, -1, 0, 0, 1, 0, -1, 0, 1;
  const auto r = remove_redundancy(Polytope(F, Vec((Vec(5) << 0, 0, 1, 1, 3).finished())));
  EXPECT_EQ(r.rows(), 4);
}

TEST(Redundancy, Idempotent) {
  Rng rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Polytope r = remove_redundancy(random_polygon(rng, 8, 5));
    const Polytope rr = remove_redundancy(r);
    EXPECT_EQ(rr.F(), r.F());
    EXPECT_EQ(rr.g(), r.g());
  }
}

TEST(SetOps, IntersectSameBox) {
  const Polytope b = unit_box(2);
  EXPECT_TRUE(equals(intersect(b, b), b));
  EXPECT_EQ(intersect(b, b).rows(), 4);
}

TEST(SetOps, SubsetOfBoxes) {
  const Polytope small = Polytope::box(Box(Vec::Zero(2), Vec::Ones(2)));
  const Polytope big = Polytope::box(Box(Vec::Zero(2), Vec::Constant(2, 2.0)));
  EXPECT_TRUE(is_subset(small, big));
  EXPECT_FALSE(is_subset(big, small));
  EXPECT_FALSE(equals(small, big));
  EXPECT_THROW(is_subset(small, unit_box(3)), ValidationError);
}

TEST(SetOps, SubsetAgreesWithVertexContainment) {
  Rng rng(13);
  int agree_true = 0;
  for (int trial = 0; trial < 30; ++trial) {
    Polytope p = random_polygon(rng, 6, 0);
    // Random scale and shift so both outcomes occur.
    const double s = rng.uniform(0.3, 1.2);
    const Vec shift = rng.uniform_in(Box::symmetric(2, 0.5));
    const Polytope q = random_polygon(rng, 7, 0);
    p = Polytope(p.F(), s * p.g() + p.F() * shift);
    bool oracle = true;
    for (const auto& v : brute_vertices(p.F(), p.g())) oracle = oracle && (q.F() * v - q.g()).maxCoeff() <= 1e-7;
    EXPECT_EQ(is_subset(p, q), oracle);
    agree_true += oracle;
  }
  EXPECT_GT(agree_true, 0);
  EXPECT_LT(agree_true, 30);
}

TEST(SetOps, ContainsPoint) {
  const Polytope b = unit_box(2);
  EXPECT_TRUE(contains_point(b, Vec::Ones(2)));
  EXPECT_FALSE(contains_point(b, Vec::Constant(2, 1.1)));
  EXPECT_TRUE(contains_point(b, Vec::Constant(2, 1.05), 0.1));
}

TEST(Projection, SquareToInterval) {
  const auto p = project(Polytope::box(Box(Vec::Zero(2), Vec::Ones(2))), 1);
  EXPECT_TRUE(equals(p, Polytope::box(Box(Vec::Zero(1), Vec::Ones(1)))));
}

TEST(Projection, EqualityCoupling) {
  Mat F(4, 2);
  F << 1, -1, -1, 1, 0, 1, 0, -1;
  const auto p = project(Polytope(F, Vec((Vec(4) << 0, 0, 1, 1).finished())), 1);
  EXPECT_TRUE(equals(p, unit_box(1)));
}

TEST(Projection, MatchesProjectedVertexHull) {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 10;
    Mat F(m, 3);
    Vec g(m);
    for (int i = 0; i < m; ++i) {
      const Vec d = rng.normal_vec(3).normalized();
      F.row(i) = d.transpose();
      g(i) = 1.0 + rng.uniform(0.0, 0.5);
    }
    Polytope p = Polytope(F, g).stacked(Polytope::box(Box::symmetric(3, 1.5)));
    std::vector<Vec> proj;
    for (const auto& v : brute_vertices(p.F(), p.g())) proj.push_back(v.head(2));
    const auto hull = hull_2d(proj);
    const Polytope fm = project(p, 2);
    EXPECT_TRUE(same_point_sets(hull, vertices_2d(fm), 1e-7)) << trial;
  }
}

TEST(Projection, RowCapAborts) {
  Rng rng(15);
  Mat F(40, 3);
  for (int i = 0; i < 40; ++i) F.row(i) = rng.normal_vec(3).normalized().transpose();
  ProjectionSettings s;
  s.max_rows = 10;
  EXPECT_THROW(project(Polytope(F, Vec::Ones(40)), 2, s), NumericalError);
}

TEST(Vertices, UnitBox) {
  const Mat V = vertices_2d(unit_box(2));
  ASSERT_EQ(V.cols(), 4);
  double area = 0.0;
  for (Eigen::Index i = 0; i < 4; ++i) area += V(0, i) * V(1, (i + 1) % 4) - V(0, (i + 1) % 4) * V(1, i);
  EXPECT_NEAR(area / 2.0, 4.0, 1e-12);  // positive area means counterclockwise
}

TEST(Vertices, UnboundedRejected) {
  Mat F(1, 2);
  F << 1, 0;
  EXPECT_THROW(vertices_2d(Polytope(F, Vec::Ones(1))), ValidationError);
}

TEST(Vertices, EachVertexHasTwoActiveRows) {
  Rng rng(16);
  for (int trial = 0; trial < 15; ++trial) {
    const Polytope p = random_polygon(rng, 7, 4);
    const Mat V = vertices_2d(p);
    for (Eigen::Index j = 0; j < V.cols(); ++j) {
      const Vec slack = p.g() - p.F() * V.col(j);
      EXPECT_GE((slack.array().abs() <= 1e-9).count(), 2);
      EXPECT_GE(slack.minCoeff(), -1e-9);
    }
  }
}

TEST(Vertices, CsvClosesTheLoop) {
  const auto t = vertices_csv(unit_box(2));
  EXPECT_EQ(t.data.rows(), 5);
  EXPECT_EQ(t.data.row(0), t.data.row(4));
}

TEST(Json, RoundTrip) {
  Rng rng(17);
  const Polytope p = random_polygon(rng, 6, 2);
  const auto q = json_polytope(io::Json::parse(polytope_json(p).dump()));
  EXPECT_EQ(q.F(), p.F());
  EXPECT_EQ(q.g(), p.g());
  EXPECT_THROW(json_polytope(io::Json::parse("{\"F\": 1}")), ValidationError);
}

TEST(MaxRpi, ContractionKeepsTheBox) {
  const auto r = max_rpi_set({0.5 * Mat::Identity(2, 2)}, unit_box(2));
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(equals(r.set, unit_box(2)));
}

TEST(MaxRpi, MatchesBruteForceOutputAdmissibleSet) {
  const double a = 0.6;
  Mat A(2, 2);
  A << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  A *= 0.97;
  A(0, 1) += 0.3;
  const Polytope Xc = Polytope::box(Box(Vec((Vec(2) << -1.0, -2.0).finished()), Vec((Vec(2) << 1.5, 2.0).finished())));
  const auto r = max_rpi_set({A}, Xc);
  // Oracle: x with A^k x in Xc for k = 0..K, K far beyond the convergence index.
  Mat F(0, 2);
  Vec g(0);
  Mat Ak = Mat::Identity(2, 2);
  for (int k = 0; k <= 300; ++k) {
    Mat Fn(F.rows() + Xc.rows(), 2);
    Fn << F, Xc.F() * Ak;
    Vec gn(g.size() + Xc.rows());
    gn << g, Xc.g();
    F = Fn;
    g = gn;
    Ak = A * Ak;
  }
  const auto oracle = brute_vertices(F, g, 1e-9);
  EXPECT_TRUE(same_point_sets(oracle, vertices_2d(r.set), 1e-6));
}

TEST(MaxRpi, InvariantMonotoneAndInsideConstraints) {
  Mat A1(2, 2), A2(2, 2);
  A1 << 0.9, 0.4, -0.3, 0.7;
  A2 << 0.6, -0.5, 0.4, 0.8;
  const Polytope Xc = Polytope::box(Box::symmetric(2, 3.0)).stacked(Polytope(Mat((Mat(2, 2) << 1, 1, -1, -1).finished()), Vec::Constant(2, 4.0)));
  const auto r = max_rpi_set({A1, A2}, Xc);
  EXPECT_TRUE(is_subset(r.set, Xc));
  const Mat V = vertices_2d(r.set);
  for (const Mat& A : {A1, A2})
    for (Eigen::Index j = 0; j < V.cols(); ++j) EXPECT_TRUE(contains_point(r.set, A * V.col(j), 1e-7));
  for (std::size_t i = 1; i < r.iterates.size(); ++i) EXPECT_TRUE(is_subset(r.iterates[i], r.iterates[i - 1]));
}

TEST(MaxRpi, UnstableLoopHitsTheCap) {
  InvariantSettings s;
  s.max_iterations = 5;
  Mat A(2, 2);
  A << 1.0, 0.01, 0.0, 1.0;
  // Marginally unstable: iterates keep shrinking slowly.
  EXPECT_THROW(max_rpi_set({A}, unit_box(2), s), NumericalError);
}

TEST(Rcpi, ZeroDynamicsReachesConstraintSetInOneStep) {
  const Polytope X = Polytope::box(Box::symmetric(2, 6.0)), U = unit_box(1);
  const Polytope omega = Polytope::box(Box::symmetric(2, 0.5));
  const auto r = n_step_rcpi({{Mat::Zero(2, 2), Mat((Mat(2, 1) << 0.3, -0.7).finished())}}, X, U, omega, 3);
  EXPECT_TRUE(equals(r.sequence.at(1), X));
}

TEST(Rcpi, SingleVertexMatchesDirectPreimage) {
  Mat A(2, 2), B(2, 1), K(1, 2);
  A << 1, 1, 0, 1;
  B << 0.5, 1;
  K << -0.5, -1.0;
  const Polytope X = Polytope::box(Box::symmetric(2, 6.0)), U = unit_box(1);
  const Polytope Xc = X.stacked(U.preimage(K));
  const Polytope omega = max_rpi_set({A + B * K}, Xc).set;
  const int N = 6;
  const auto r = n_step_rcpi({{A, B}}, X, U, omega, N);
  ASSERT_GE(r.sequence.size(), 2u);
  Rng rng(18);
  for (std::size_t i = 1; i < r.sequence.size(); ++i) {
    const Polytope& prev = r.sequence[i - 1];
    int checked = 0;
    for (int t = 0; t < 2000; ++t) {
      const Vec x = rng.uniform_in(Box::symmetric(2, 6.5));
      // Oracle: interval of u with F(Ax + Bu) <= g and |u| <= 1.
      double lo = -1.0, hi = 1.0;
      for (Eigen::Index q = 0; q < prev.rows(); ++q) {
        const double c = prev.F().row(q).dot(B.col(0)), rhs = prev.g()(q) - prev.F().row(q).dot(A * x);
        if (std::abs(c) < 1e-14) {
          if (rhs < 0) lo = kInf;
        } else if (c > 0) {
          hi = std::min(hi, rhs / c);
        } else {
          lo = std::max(lo, rhs / c);
        }
      }
      const double inX = (X.F() * x - X.g()).maxCoeff();
      const double margin = std::min(hi - lo, -inX);
      if (std::abs(margin) < 1e-6) continue;  // too close to the boundary to judge
      EXPECT_EQ(contains_point(r.sequence[i], x, 1e-9), margin > 0) << "step " << i;
      ++checked;
    }
    EXPECT_GT(checked, 1900);
  }
  for (std::size_t i = 1; i < r.sequence.size(); ++i) EXPECT_TRUE(is_subset(r.sequence[i - 1], r.sequence[i]));
  EXPECT_TRUE(is_subset(omega, r.set));
  EXPECT_TRUE(is_subset(r.set, X));
}

TEST(Rcpi, VertexSpecificInputsAndMonotonicity) {
  Mat A1(2, 2), A2(2, 2), B(2, 1);
  A1 << 1, 1, 0, 1;
  A2 << 1.1, 1, 0, 1.1;
  B << 0.5, 1;
  const Polytope X = Polytope::box(Box::symmetric(2, 6.0)), U = unit_box(1);
  Mat K(1, 2);
  K << -0.4, -0.9;
  const Polytope Xc = X.stacked(U.preimage(K));
  const auto omega = max_rpi_set({A1 + B * K, A2 + B * K}, Xc).set;
  const auto r = n_step_rcpi({{A1, B}, {A2, B}}, X, U, omega, 10);
  for (std::size_t i = 1; i < r.sequence.size(); ++i) EXPECT_TRUE(is_subset(r.sequence[i - 1], r.sequence[i]));
  EXPECT_TRUE(is_subset(omega, r.set));
  EXPECT_TRUE(is_subset(r.set, X));
  EXPECT_LE(r.steps, 10);
}
