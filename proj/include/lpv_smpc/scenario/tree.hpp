#ifndef LPV_SMPC_SCENARIO_TREE_HPP
#define LPV_SMPC_SCENARIO_TREE_HPP

#include <string>
#include <vector>

#include "lpv_smpc/io/json.hpp"
#include "lpv_smpc/scenario/kmeans.hpp"
#include "lpv_smpc/scenario/moments.hpp"
#include "lpv_smpc/scenario/sampling.hpp"

namespace lpv_smpc::scenario {

/// Scenario set of one stage: C cluster centroids followed by the upper and lower worst cases.
struct StageScenarios {
  int n_x = 0;
  int n_u = 0;
  int n_clusters = 0;
  Mat realizations;  // (n_x^2 + n_x n_u) x s
  Vec p;
  MomentMatch match;
  double kmeans_inertia = 0.0;

  int size() const { return static_cast<int>(realizations.cols()); }
  std::pair<Mat, Mat> matrices(int s) const { return split_realization(realizations.col(s), n_x, n_u); }
  /// Probability-weighted mean realization.
  std::pair<Mat, Mat> nominal() const { return split_realization(realizations * p, n_x, n_u); }
};

struct StageSettings {
  int clusters = 3;
  double beta_m = 1.0;
  bool worst_cases = true;
  MomentWeights weights;
  KmeansSettings kmeans;
  int cov_coords = 10;
};

/// K-means centroids plus worst cases with moment-matched probabilities.
inline StageScenarios build_stage(const Mat& samples, int n_x, int n_u, const StageSettings& s, std::uint64_t seed) {
  require(samples.rows() == n_x * n_x + n_x * n_u, "build_stage: sample dimension mismatch");
  StageScenarios st;
  st.n_x = n_x;
  st.n_u = n_u;
  st.n_clusters = s.clusters;
  const KmeansResult km = kmeans_cluster(samples, s.clusters, seed, s.kmeans);
  st.kmeans_inertia = km.inertia;
  if (s.worst_cases) {
    const auto [hi, lo] = worst_case_scenarios(samples, s.beta_m);
    st.realizations.resize(samples.rows(), s.clusters + 2);
    st.realizations << km.centroids, hi, lo;
  } else {
    st.realizations = km.centroids;
  }
  st.match = match_moments(st.realizations, moment_targets(samples, s.cov_coords), s.weights);
  st.p = st.match.p;
  return st;
}

struct TreeNode {
  int stage = 0;
  int parent = -1;       // index into the previous stage's node list
  int realization = 0;   // r(j)
  double p = 1.0;        // conditional probability
  double path_p = 1.0;   // product along the path
};

/**
 * Scenario tree over N stages with branching on the first N_b stages. After the robust horizon
 * every leaf keeps its last branch index, so stage k >= N_b uses realization index r_{N_b-1}(j)
 * of that stage's set. N_b = 0 gives one nominal scenario.
 */
struct ScenarioTree {
  int N = 0;
  int N_b = 0;
  std::vector<StageScenarios> stages;       // one set per stage
  std::vector<std::vector<TreeNode>> nodes;  // branching stages only
  std::vector<std::vector<int>> leaf_paths;  // per leaf, branch index per branching stage
  Vec leaf_p;

  int num_leaves() const { return static_cast<int>(leaf_paths.size()); }
  int n_x() const { return stages.front().n_x; }
  int n_u() const { return stages.front().n_u; }

  /// Realization index of leaf j after the robust horizon (or -1 for the nominal tree).
  int frozen_index(int j) const { return N_b == 0 ? -1 : leaf_paths[static_cast<std::size_t>(j)].back(); }

  std::pair<Mat, Mat> matrices(int j, int k) const {
    const auto& st = stages[static_cast<std::size_t>(k)];
    if (N_b == 0) return st.nominal();
    const auto& path = leaf_paths[static_cast<std::size_t>(j)];
    return st.matrices(k < N_b ? path[static_cast<std::size_t>(k)] : path.back());
  }

  /// Non-anticipativity group of leaf j's input at stage k: leaves sharing the realization prefix before k.
  int input_group(int j, int k) const {
    const int depth = std::min(k, N_b);
    if (depth == 0) return 0;
    int id = 0;
    const auto& path = leaf_paths[static_cast<std::size_t>(j)];
    for (int i = 0; i < depth; ++i) id = id * stages[static_cast<std::size_t>(i)].size() + path[static_cast<std::size_t>(i)];
    return id;
  }
};

inline ScenarioTree build_tree(const std::vector<StageScenarios>& stages, int N, int N_b, int max_leaves = 125) {
  require(N >= 1, "build_tree: horizon must be positive");
  require(N_b >= 0 && N_b <= N, "build_tree: robust horizon must lie in [0, N]");
  require(static_cast<int>(stages.size()) == N, "build_tree: need one scenario set per stage");
  for (const auto& s : stages) {
    require(s.size() >= 1 && s.p.size() == s.size(), "build_tree: stage without probabilities");
    require((s.p.array() >= -1e-12).all() && std::abs(s.p.sum() - 1.0) <= 1e-8, "build_tree: stage probabilities invalid");
  }
  for (int k = N_b; k < N && N_b > 0; ++k)
    require(stages[static_cast<std::size_t>(k)].size() == stages[static_cast<std::size_t>(N_b - 1)].size(),
            "build_tree: stages after the robust horizon must match the last branching stage in size");
  double leaves = 1.0;
  for (int k = 0; k < N_b; ++k) leaves *= stages[static_cast<std::size_t>(k)].size();
  if (leaves > max_leaves)
    throw ValidationError("build_tree: " + std::to_string(static_cast<long long>(leaves)) + " scenarios exceed the cap of " +
                          std::to_string(max_leaves) + "; reduce the number of clusters or the robust horizon");
  ScenarioTree t;
  t.N = N;
  t.N_b = N_b;
  t.stages = stages;
  std::vector<std::vector<int>> paths{{}};
  std::vector<double> probs{1.0};
  for (int k = 0; k < N_b; ++k) {
    const auto& st = stages[static_cast<std::size_t>(k)];
    std::vector<TreeNode> level;
    std::vector<std::vector<int>> next_paths;
    std::vector<double> next_probs;
    for (std::size_t parent = 0; parent < paths.size(); ++parent)
      for (int s = 0; s < st.size(); ++s) {
        TreeNode n;
        n.stage = k;
        n.parent = k == 0 ? -1 : static_cast<int>(parent);
        n.realization = s;
        n.p = st.p(s);
        n.path_p = probs[parent] * st.p(s);
        level.push_back(n);
        auto p = paths[parent];
        p.push_back(s);
        next_paths.push_back(std::move(p));
        next_probs.push_back(n.path_p);
      }
    t.nodes.push_back(std::move(level));
    paths = std::move(next_paths);
    probs = std::move(next_probs);
  }
  t.leaf_paths = paths;
  t.leaf_p = Eigen::Map<const Vec>(probs.data(), static_cast<Eigen::Index>(probs.size()));
  t.leaf_p /= t.leaf_p.sum();
  return t;
}

/// Same scenario set at every stage.
inline ScenarioTree build_tree(const StageScenarios& stage, int N, int N_b, int max_leaves = 125) {
  return build_tree(std::vector<StageScenarios>(static_cast<std::size_t>(N), stage), N, N_b, max_leaves);
}

inline io::Json stage_json(const StageScenarios& s) {
  return {{"n_x", s.n_x},
          {"n_u", s.n_u},
          {"n_clusters", s.n_clusters},
          {"realizations", io::mat_json(s.realizations)},
          {"p", io::vec_json(s.p)},
          {"kmeans_inertia", s.kmeans_inertia},
          {"mean_residual", io::vec_json(s.match.mean_residual)},
          {"var_residual", io::vec_json(s.match.var_residual)},
          {"third_residual", io::vec_json(s.match.third_residual)},
          {"fourth_residual", io::vec_json(s.match.fourth_residual)},
          {"match_objective", s.match.objective}};
}

inline StageScenarios json_stage(const io::Json& j) {
  try {
    StageScenarios s;
    s.n_x = j.at("n_x").get<int>();
    s.n_u = j.at("n_u").get<int>();
    s.n_clusters = j.at("n_clusters").get<int>();
    s.realizations = io::json_mat(j.at("realizations"));
    s.p = io::json_vec(j.at("p"));
    s.kmeans_inertia = j.at("kmeans_inertia").get<double>();
    s.match.p = s.p;
    s.match.mean_residual = io::json_vec(j.at("mean_residual"));
    s.match.var_residual = io::json_vec(j.at("var_residual"));
    s.match.third_residual = io::json_vec(j.at("third_residual"));
    s.match.fourth_residual = io::json_vec(j.at("fourth_residual"));
    s.match.objective = j.at("match_objective").get<double>();
    require(s.realizations.rows() == s.n_x * s.n_x + s.n_x * s.n_u && s.p.size() == s.realizations.cols(),
            "scenario JSON: shape mismatch");
    return s;
  } catch (const io::Json::exception& e) {
    throw ValidationError(std::string("scenario JSON: ") + e.what());
  }
}

inline io::Json tree_json(const ScenarioTree& t) {
  io::Json stages = io::Json::array();
  for (const auto& s : t.stages) stages.push_back(stage_json(s));
  return {{"N", t.N}, {"N_b", t.N_b}, {"stages", stages}, {"leaf_paths", t.leaf_paths}, {"leaf_p", io::vec_json(t.leaf_p)}};
}

inline ScenarioTree json_tree(const io::Json& j) {
  try {
    std::vector<StageScenarios> stages;
    for (const auto& s : j.at("stages")) stages.push_back(json_stage(s));
    return build_tree(stages, j.at("N").get<int>(), j.at("N_b").get<int>(), 1 << 30);
  } catch (const io::Json::exception& e) {
    throw ValidationError(std::string("scenario tree JSON: ") + e.what());
  }
}

}  // namespace lpv_smpc::scenario

#endif  // LPV_SMPC_SCENARIO_TREE_HPP
