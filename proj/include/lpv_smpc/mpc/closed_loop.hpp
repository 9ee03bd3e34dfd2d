#ifndef LPV_SMPC_MPC_CLOSED_LOOP_HPP
#define LPV_SMPC_MPC_CLOSED_LOOP_HPP

#include <cstdio>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "lpv_smpc/io/csv.hpp"
#include "lpv_smpc/lpv/metrics.hpp"
#include "lpv_smpc/mpc/program.hpp"
#include "lpv_smpc/scenario/sampling.hpp"

namespace lpv_smpc::mpc {

struct RunConfig {
  int N = 10;
  int N_b = 1;
  int steps = 50;
  int n_mc = 500;  // model draws for the stage-0 scenarios at the measured theta
  scenario::StageSettings stage;
  bool regenerate = true;  // false: the offline scenario set at every stage and step
  bool terminal_cost = true;
  bool terminal_set = true;
  bool explicit_terminal_law = false;  // u = K(thetahat) x inside the terminal set
  std::uint64_t seed = 1;
  opt::SolverSettings solver;

  void validate() const {
    require(N >= 1 && N_b >= 0 && N_b <= N, "RunConfig: need N >= 1 and 0 <= N_b <= N");
    require(steps >= 0, "RunConfig: steps must be non-negative");
    require(n_mc >= 2, "RunConfig: n_mc must be at least 2");
    require(stage.clusters >= 1 && stage.beta_m > 0.0, "RunConfig: invalid scenario settings");
  }
};

struct StepLog {
  int k = 0;
  Vec x, u, theta;
  double objective = std::numeric_limits<double>::quiet_NaN();  // NaN when the explicit law was used
  bool feasible = false;
  double min_margin = 0.0;  // min over the X rows at x(k) and the U rows at u(k); negative means violated
  int iterations = 0;
  bool explicit_law = false;
  std::string tree_hash;
  Vec pred_lower, pred_upper;  // one-step-ahead state envelope over the scenarios
};

struct RunResult {
  lpv::Trajectory trajectory;  // truncated at the failing step
  std::vector<StepLog> log;
  bool completed = false;
  int failed_step = -1;
  std::string failure;
  lpv::SafetyReport safety;
  double stage_cost_sum = 0.0;  // sum of l(x(k), u(k)) over the applied steps

  Vec final_state() const { return trajectory.states.bottomRows(1).transpose(); }
};

/// I.i.d. uniform scheduling over the box, one row per step.
inline Mat iid_uniform_schedule(const Box& Theta, int steps, std::uint64_t seed) {
  Rng rng = Rng(seed).split("mpc.schedule");
  Mat th(steps, Theta.dim());
  for (int k = 0; k < steps; ++k) th.row(k) = rng.uniform_in(Theta).transpose();
  return th;
}

inline std::string hash_hex(const std::string& s) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(detail::fnv1a(s)));
  return buf;
}

/// Stage-0 scenarios from model draws evaluated at the measured scheduling value.
inline scenario::StageScenarios stage_at(const bnn::BnnLpvModel& model, const Vec& theta, const RunConfig& cfg, std::uint64_t seed) {
  const std::vector<Mat> traj{Mat(theta.transpose())};
  const auto samples = scenario::evaluate_matrix_samples(model, traj, cfg.n_mc, seed, cfg.n_mc);
  return scenario::build_stage(samples.front(), model.n_x, model.n_u, cfg.stage, seed);
}

/**
 * Receding-horizon loop on the true plant: measure (x, theta), rebuild the tree, solve, apply u*(0).
 * `offline` is the scheduling-set-wide scenario set used for every stage after the first (all stages
 * in fixed-tree mode). Infeasibility stops the run and is reported in the result.
 */
inline RunResult receding_horizon_run(const lpv::LpvPlant& plant, const bnn::BnnLpvModel& model,
                                      std::shared_ptr<const terminal::TerminalIngredients> ingredients,
                                      const scenario::StageScenarios& offline, const lpv::CostConfig& cost, const Mat& theta_signal,
                                      const Vec& x0, const RunConfig& cfg) {
  cfg.validate();
  require(theta_signal.rows() >= cfg.steps && theta_signal.cols() == plant.n_theta(), "receding_horizon_run: scheduling signal too short");
  require(x0.size() == plant.n_x(), "receding_horizon_run: x0 dimension mismatch");
  require(offline.n_x == plant.n_x() && offline.n_u == plant.n_u(), "receding_horizon_run: scenario set dimension mismatch");
  const auto X = geometry::Polytope::box(plant.state_set);
  const auto U = geometry::Polytope::box(plant.input_set);
  const Rng root = Rng(cfg.seed).split("mpc.stage0");

  RunResult res;
  std::vector<Vec> xs{x0}, us, ths;
  Vec x = x0;
  for (int k = 0; k < cfg.steps; ++k) {
    const Vec theta = theta_signal.row(k).transpose();
    StepLog lg;
    lg.k = k;
    lg.x = x;
    lg.theta = theta;
    Vec u;
    if (cfg.explicit_terminal_law && ingredients && ingredients->transform && geometry::contains_point(ingredients->omega, x, 0.0)) {
      u = ingredients->K_at((*ingredients->transform)(theta)) * x;
      lg.feasible = true;
      lg.explicit_law = true;
    } else {
      std::vector<scenario::StageScenarios> stages(static_cast<std::size_t>(cfg.N), offline);
      if (cfg.regenerate) stages[0] = stage_at(model, theta, cfg, root.split(static_cast<std::uint64_t>(k)).next_u64());
      SmpcProblem pr;
      pr.tree = scenario::build_tree(stages, cfg.N, cfg.N_b);
      pr.cost = cost;
      pr.terminal = ingredients;
      pr.terminal_cost = cfg.terminal_cost;
      pr.terminal_set = cfg.terminal_set;
      pr.X = X;
      pr.U = U;
      pr.x = x;
      lg.tree_hash = hash_hex(scenario::tree_json(pr.tree).dump());
      const SmpcSolution sol = solve_step(pr, cfg.solver);
      lg.iterations = sol.iterations;
      if (!sol.feasible) {
        lg.feasible = false;
        lg.u = Vec::Constant(plant.n_u(), std::numeric_limits<double>::quiet_NaN());
        lg.min_margin = (X.g() - X.F() * x).minCoeff();
        res.log.push_back(lg);
        res.failed_step = k;
        res.failure = "step " + std::to_string(k) + ": " + sol.diagnostic;
        break;
      }
      lg.feasible = true;
      lg.objective = sol.objective;
      u = sol.u0;
      lg.pred_lower = lg.pred_upper = sol.states.front().row(1).transpose();
      for (const auto& s : sol.states) {
        lg.pred_lower = lg.pred_lower.cwiseMin(s.row(1).transpose());
        lg.pred_upper = lg.pred_upper.cwiseMax(s.row(1).transpose());
      }
    }
    // Interior-point solutions can sit a rounding error outside the input box.
    u = plant.input_set.clamp(u);
    lg.u = u;
    lg.min_margin = std::min((X.g() - X.F() * x).minCoeff(), (U.g() - U.F() * u).minCoeff());
    res.stage_cost_sum += cost.stage(x, u);
    res.log.push_back(lg);
    us.push_back(u);
    ths.push_back(theta);
    x = lpv::step(plant, x, u, theta);
    xs.push_back(x);
  }
  res.completed = res.failed_step < 0;
  auto& t = res.trajectory;
  t.states.resize(static_cast<Eigen::Index>(xs.size()), plant.n_x());
  t.inputs.resize(static_cast<Eigen::Index>(us.size()), plant.n_u());
  t.scheds.resize(static_cast<Eigen::Index>(ths.size()), plant.n_theta());
  for (std::size_t i = 0; i < xs.size(); ++i) t.states.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
  for (std::size_t i = 0; i < us.size(); ++i) {
    t.inputs.row(static_cast<Eigen::Index>(i)) = us[i].transpose();
    t.scheds.row(static_cast<Eigen::Index>(i)) = ths[i].transpose();
  }
  res.safety = lpv::safety_monitor(t, plant.state_set, plant.input_set);
  return res;
}

/// Per-step CSV: k, x_*, u_*, theta_*, objective, feasible, min_margin.
inline io::CsvTable run_log_table(const RunResult& r) {
  io::CsvTable tab;
  const auto nx = r.trajectory.states.cols(), nu = r.trajectory.inputs.cols(), nt = r.trajectory.scheds.cols();
  tab.header = {"k"};
  for (const auto& v : {io::numbered("x", nx), io::numbered("u", nu), io::numbered("theta", nt)})
    tab.header.insert(tab.header.end(), v.begin(), v.end());
  for (const char* h : {"objective", "feasible", "min_margin"}) tab.header.emplace_back(h);
  tab.data.resize(static_cast<Eigen::Index>(r.log.size()), static_cast<Eigen::Index>(tab.header.size()));
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    const auto& l = r.log[i];
    const auto row = static_cast<Eigen::Index>(i);
    tab.data(row, 0) = l.k;
    tab.data.row(row).segment(1, nx) = l.x.transpose();
    tab.data.row(row).segment(1 + nx, nu) = l.u.transpose();
    tab.data.row(row).segment(1 + nx + nu, nt) = l.theta.transpose();
    tab.data(row, 1 + nx + nu + nt) = l.objective;
    tab.data(row, 2 + nx + nu + nt) = l.feasible ? 1.0 : 0.0;
    tab.data(row, 3 + nx + nu + nt) = l.min_margin;
  }
  return tab;
}

inline io::Json run_diagnostics_json(const RunResult& r) {
  io::Json steps = io::Json::array();
  for (const auto& l : r.log) {
    io::Json s = {{"k", l.k}, {"feasible", l.feasible}, {"iterations", l.iterations}, {"explicit_law", l.explicit_law}, {"tree_hash", l.tree_hash}};
    if (l.pred_lower.size()) {
      s["pred_lower"] = io::vec_json(l.pred_lower);
      s["pred_upper"] = io::vec_json(l.pred_upper);
    }
    steps.push_back(s);
  }
  io::Json viol = io::Json::array();
  for (const auto& v : r.safety.violations) viol.push_back({{"k", v.k}, {"kind", v.kind}, {"index", v.index}, {"value", v.value}});
  return {{"completed", r.completed},
          {"failed_step", r.failed_step},
          {"failure", r.failure},
          {"stage_cost_sum", r.stage_cost_sum},
          {"violations", viol},
          {"steps", steps}};
}

}  // namespace lpv_smpc::mpc

#endif  // LPV_SMPC_MPC_CLOSED_LOOP_HPP
