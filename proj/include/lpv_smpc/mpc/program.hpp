#ifndef LPV_SMPC_MPC_PROGRAM_HPP
#define LPV_SMPC_MPC_PROGRAM_HPP

#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "lpv_smpc/geometry/polytope.hpp"
#include "lpv_smpc/lpv/system.hpp"
#include "lpv_smpc/opt/qp_ipm.hpp"
#include "lpv_smpc/scenario/tree.hpp"
#include "lpv_smpc/terminal/synth.hpp"

namespace lpv_smpc::mpc {

/// One scenario-tree MPC instance at the current state.
struct SmpcProblem {
  scenario::ScenarioTree tree;
  lpv::CostConfig cost;
  std::shared_ptr<const terminal::TerminalIngredients> terminal;
  bool terminal_cost = true;  // requires terminal
  bool terminal_set = true;   // requires terminal
  geometry::Polytope X{1};
  geometry::Polytope U{1};
  Vec x;

  void validate() const {
    require(tree.N >= 1 && tree.num_leaves() >= 1, "SmpcProblem: empty scenario tree");
    require(tree.leaf_p.size() == tree.num_leaves(), "SmpcProblem: missing scenario probabilities");
    cost.validate();
    const int nx = tree.n_x(), nu = tree.n_u();
    require(x.size() == nx, "SmpcProblem: state dimension mismatch");
    require(cost.Q.rows() == nx && cost.R.rows() == nu, "SmpcProblem: cost weight dimension mismatch");
    require(X.dim() == nx && U.dim() == nu, "SmpcProblem: constraint set dimension mismatch");
    if (terminal_cost || terminal_set) {
      require(terminal != nullptr, "SmpcProblem: terminal ingredients missing (disable terminal cost and set explicitly)");
      require(terminal->omega.dim() == nx && terminal->P.front().rows() == nx, "SmpcProblem: terminal ingredient dimension mismatch");
    }
  }
};

/**
 * Condensed QP over the input variables z; every predicted state is x_j(i) = c[j][i] + S[j][i] z.
 * Objective value = qp.evaluate(z) + constant.
 */
struct CondensedProgram {
  opt::QuadraticProgram qp;
  double constant = 0.0;
  int n_z = 0;
  std::vector<std::vector<int>> input_offset;  // [leaf][stage] -> first index in z
  std::vector<std::vector<Vec>> c;             // [leaf][0..N]
  std::vector<std::vector<Mat>> S;             // [leaf][0..N]
  int state_rows = 0, input_rows = 0, terminal_rows = 0;
};

/// Terminal weight of leaf j: P of its frozen realization, or the probability mix for the nominal tree.
inline Mat terminal_weight(const SmpcProblem& pr, int j) {
  const auto& t = *pr.terminal;
  if (t.q() == 1) return t.P.front();
  const auto& last = pr.tree.stages.back();
  require(last.size() == t.q(), "terminal_weight: terminal vertices do not match the scenario set size");
  const int r = pr.tree.frozen_index(j);
  if (r >= 0) return t.P[static_cast<std::size_t>(r)];
  return t.P_at(last.p);
}

inline CondensedProgram build_program(const SmpcProblem& pr) {
  pr.validate();
  const auto& tree = pr.tree;
  const int N = tree.N, nx = tree.n_x(), nu = tree.n_u(), J = tree.num_leaves();
  CondensedProgram cp;
  // Shared variables: one block per (stage, non-anticipativity group).
  cp.input_offset.assign(static_cast<std::size_t>(J), std::vector<int>(static_cast<std::size_t>(N)));
  for (int k = 0; k < N; ++k) {
    std::map<int, int> group;
    for (int j = 0; j < J; ++j) {
      const int g = tree.input_group(j, k);
      auto it = group.find(g);
      if (it == group.end()) {
        it = group.emplace(g, cp.n_z).first;
        cp.n_z += nu;
      }
      cp.input_offset[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] = it->second;
    }
  }
  const int nz = cp.n_z;
  cp.qp = opt::QuadraticProgram(nz);
  Mat& H = cp.qp.hessian;
  Vec& f = cp.qp.linear;
  cp.c.resize(static_cast<std::size_t>(J));
  cp.S.resize(static_cast<std::size_t>(J));
  for (int j = 0; j < J; ++j) {
    auto& c = cp.c[static_cast<std::size_t>(j)];
    auto& S = cp.S[static_cast<std::size_t>(j)];
    c.push_back(pr.x);
    S.push_back(Mat::Zero(nx, nz));
    for (int k = 0; k < N; ++k) {
      const auto [A, B] = tree.matrices(j, k);
      const int o = cp.input_offset[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      Mat Sn = A * S.back();
      Sn.middleCols(o, nu) += B;
      c.push_back(A * c.back());
      S.push_back(std::move(Sn));
    }
    const double p = tree.leaf_p(j);
    for (int k = 0; k < N; ++k) {
      const Mat& Sk = S[static_cast<std::size_t>(k)];
      const Vec& ck = c[static_cast<std::size_t>(k)];
      const int o = cp.input_offset[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
      H.noalias() += 2.0 * p * Sk.transpose() * pr.cost.Q * Sk;
      H.block(o, o, nu, nu) += 2.0 * p * pr.cost.R;
      f.noalias() += 2.0 * p * Sk.transpose() * (pr.cost.Q * ck);
      cp.constant += p * ck.dot(pr.cost.Q * ck);
    }
    if (pr.terminal_cost) {
      const Mat P = terminal_weight(pr, j);
      H.noalias() += 2.0 * p * S.back().transpose() * P * S.back();
      f.noalias() += 2.0 * p * S.back().transpose() * (P * c.back());
      cp.constant += p * c.back().dot(P * c.back());
    }
  }
  H = 0.5 * (H + H.transpose());

  std::vector<Mat> rows;
  std::vector<Vec> rhs;
  auto add = [&](const geometry::Polytope& set, const Mat& S, const Vec& c) {
    if (set.rows() == 0) return 0;
    rows.push_back(set.F() * S);
    rhs.push_back(set.g() - set.F() * c);
    return static_cast<int>(set.rows());
  };
  // State rows once per distinct predicted state (leaves sharing a history share it).
  for (int k = 1; k <= N; ++k) {
    std::map<int, bool> seen;
    for (int j = 0; j < J; ++j) {
      if (!seen.emplace(tree.input_group(j, k), true).second) continue;
      cp.state_rows += add(pr.X, cp.S[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)], cp.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]);
    }
  }
  for (int o = 0; o < nz; o += nu) {
    Mat E = Mat::Zero(nu, nz);
    E.middleCols(o, nu) = Mat::Identity(nu, nu);
    cp.input_rows += add(pr.U, E, Vec::Zero(nu));
  }
  if (pr.terminal_set)
    for (int j = 0; j < J; ++j)
      cp.terminal_rows += add(pr.terminal->omega, cp.S[static_cast<std::size_t>(j)].back(), cp.c[static_cast<std::size_t>(j)].back());
  Eigen::Index m = 0;
  for (const auto& r : rows) m += r.rows();
  cp.qp.A_ineq.resize(m, nz);
  cp.qp.b_ineq.resize(m);
  m = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    cp.qp.A_ineq.middleRows(m, rows[i].rows()) = rows[i];
    cp.qp.b_ineq.segment(m, rhs[i].size()) = rhs[i];
    m += rows[i].rows();
  }
  return cp;
}

struct SmpcSolution {
  opt::Status status = opt::Status::NumericalError;
  bool feasible = false;
  Vec u0;
  double objective = kInf;
  std::vector<Mat> states;  // per leaf, (N+1) x n_x
  std::vector<Mat> inputs;  // per leaf, N x n_u
  Vec z;
  double min_slack = kInf;  // smallest b - A z over all inequality rows
  int iterations = 0;
  std::string diagnostic;  // filled when infeasible
};

/// Build and solve; infeasibility is reported through the status, never thrown.
inline SmpcSolution solve_step(const SmpcProblem& pr, const opt::SolverSettings& settings = {}) {
  SmpcSolution sol;
  const CondensedProgram cp = build_program(pr);
  auto snapshot = [&](const std::string& why) {
    std::ostringstream d;
    d << why << "; x = [" << pr.x.transpose() << "], leaves = " << pr.tree.num_leaves() << ", leaf_p = [" << pr.tree.leaf_p.transpose()
      << "]";
    return d.str();
  };
  if (!geometry::contains_point(pr.X, pr.x, 1e-9)) {
    sol.status = opt::Status::Infeasible;
    sol.diagnostic = snapshot("current state outside the state constraint set");
    return sol;
  }
  const auto r = opt::solve_qp(cp.qp, settings);
  sol.status = r.status;
  sol.iterations = r.iterations;
  if (!r.optimal()) {
    sol.diagnostic = snapshot(std::string("QP ") + opt::to_string(r.status));
    return sol;
  }
  sol.feasible = true;
  sol.z = r.primal;
  sol.objective = r.objective + cp.constant;
  if (cp.qp.A_ineq.rows() > 0) sol.min_slack = (cp.qp.b_ineq - cp.qp.A_ineq * sol.z).minCoeff();
  const int N = pr.tree.N, nx = pr.tree.n_x(), nu = pr.tree.n_u();
  for (int j = 0; j < pr.tree.num_leaves(); ++j) {
    Mat xs(N + 1, nx), us(N, nu);
    for (int k = 0; k <= N; ++k)
      xs.row(k) = (cp.c[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] + cp.S[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)] * sol.z).transpose();
    for (int k = 0; k < N; ++k) us.row(k) = sol.z.segment(cp.input_offset[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)], nu).transpose();
    sol.states.push_back(std::move(xs));
    sol.inputs.push_back(std::move(us));
  }
  sol.u0 = sol.z.head(nu);
  return sol;
}

}  // namespace lpv_smpc::mpc

#endif  // LPV_SMPC_MPC_PROGRAM_HPP
