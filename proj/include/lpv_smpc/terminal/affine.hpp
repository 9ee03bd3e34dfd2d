#ifndef LPV_SMPC_TERMINAL_AFFINE_HPP
#define LPV_SMPC_TERMINAL_AFFINE_HPP

#include <utility>
#include <vector>

#include "lpv_smpc/io/json.hpp"
#include "lpv_smpc/scenario/tree.hpp"

namespace lpv_smpc::terminal {

/// x+ = sum_i thetahat_i (A_i x + B_i u) with thetahat on the simplex.
struct AffineLpvModel {
  std::vector<std::pair<Mat, Mat>> vertices;

  int q() const { return static_cast<int>(vertices.size()); }
  int n_x() const { return static_cast<int>(vertices.front().first.rows()); }
  int n_u() const { return static_cast<int>(vertices.front().second.cols()); }

  void validate() const {
    require(!vertices.empty(), "AffineLpvModel: no vertices");
    for (const auto& [A, B] : vertices) {
      require(A.rows() == n_x() && A.cols() == n_x(), "AffineLpvModel: A vertex shape");
      require(B.rows() == n_x() && B.cols() == n_u(), "AffineLpvModel: B vertex shape");
      require(A.allFinite() && B.allFinite(), "AffineLpvModel: non-finite vertex");
    }
  }

  std::pair<Mat, Mat> at(const Vec& weights) const {
    require(weights.size() == q(), "AffineLpvModel: weight count");
    Mat A = Mat::Zero(n_x(), n_x()), B = Mat::Zero(n_x(), n_u());
    for (int i = 0; i < q(); ++i) {
      A += weights(i) * vertices[static_cast<std::size_t>(i)].first;
      B += weights(i) * vertices[static_cast<std::size_t>(i)].second;
    }
    return {A, B};
  }

  std::vector<Mat> closed_loop(const std::vector<Mat>& K) const {
    require(static_cast<int>(K.size()) == q(), "AffineLpvModel: one gain per vertex");
    std::vector<Mat> out;
    for (int i = 0; i < q(); ++i) out.push_back(vertices[static_cast<std::size_t>(i)].first + vertices[static_cast<std::size_t>(i)].second * K[static_cast<std::size_t>(i)]);
    return out;
  }
};

/// Every scenario of the stage (centroids and worst cases) becomes a vertex, B from the same scenario.
inline AffineLpvModel extract_extreme_realizations(const scenario::StageScenarios& stage) {
  require(stage.size() >= 1, "extract_extreme_realizations: no scenarios");
  AffineLpvModel m;
  for (int s = 0; s < stage.size(); ++s) m.vertices.push_back(stage.matrices(s));
  m.validate();
  return m;
}

/**
 * Diagnostic vertex set: every corner of the elementwise box between the lower and upper
 * realization (coordinates with equal bounds are not enumerated).
 */
inline AffineLpvModel box_vertices(const Vec& upper, const Vec& lower, int n_x, int n_u, int max_vertices = 1024) {
  require(upper.size() == lower.size() && upper.size() == n_x * n_x + n_x * n_u, "box_vertices: size mismatch");
  require(n_x <= 2, "box_vertices: diagnostic mode is limited to n_x <= 2");
  std::vector<Eigen::Index> free;
  for (Eigen::Index i = 0; i < upper.size(); ++i)
    if (upper(i) != lower(i)) free.push_back(i);
  require(free.size() < 31 && (1LL << free.size()) <= max_vertices, "box_vertices: too many vertices");
  AffineLpvModel m;
  for (long long mask = 0; mask < (1LL << free.size()); ++mask) {
    Vec z = lower;
    for (std::size_t k = 0; k < free.size(); ++k)
      if ((mask >> k) & 1) z(free[k]) = upper(free[k]);
    m.vertices.push_back(scenario::split_realization(z, n_x, n_u));
  }
  return m;
}

inline io::Json affine_json(const AffineLpvModel& m) {
  io::Json v = io::Json::array();
  for (const auto& [A, B] : m.vertices) v.push_back({{"A", io::mat_json(A)}, {"B", io::mat_json(B)}});
  return {{"vertices", v}};
}

inline AffineLpvModel json_affine(const io::Json& j) {
  try {
    AffineLpvModel m;
    for (const auto& v : j.at("vertices")) m.vertices.emplace_back(io::json_mat(v.at("A")), io::json_mat(v.at("B")));
    m.validate();
    return m;
  } catch (const io::Json::exception& e) {
    throw ValidationError(std::string("affine model JSON: ") + e.what());
  }
}

}  // namespace lpv_smpc::terminal

#endif  // LPV_SMPC_TERMINAL_AFFINE_HPP
