#ifndef LPV_SMPC_TERMINAL_SYNTH_HPP
#define LPV_SMPC_TERMINAL_SYNTH_HPP

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lpv_smpc/geometry.hpp"
#include "lpv_smpc/terminal/lmi.hpp"
#include "lpv_smpc/terminal/transform.hpp"

namespace lpv_smpc::terminal {

struct TerminalIngredients {
  AffineLpvModel affine;
  Mat Qw, Rw;
  std::vector<Mat> P;
  std::vector<Mat> K;
  geometry::Polytope Xc;     // [F_x; F_u K_1; ...; F_u K_q] x <= [g_x; g_u; ...; g_u]
  geometry::Polytope omega;  // terminal set
  geometry::Polytope cn;     // N-step controlled invariant set
  int rpi_iterations = 0;
  int rcpi_steps = 0;
  bool rcpi_fixed_point = false;
  double lmi_min_eigenvalue = 0.0;
  double lmi_max_x_condition = 0.0;
  double lmi_max_k_residual = 0.0;
  std::vector<std::string> warnings;
  std::optional<TransformNet> transform;

  int q() const { return affine.q(); }

  Mat P_at(const Vec& w) const {
    Mat out = Mat::Zero(P.front().rows(), P.front().cols());
    for (int i = 0; i < q(); ++i) out += w(i) * P[static_cast<std::size_t>(i)];
    return out;
  }
  Mat K_at(const Vec& w) const {
    Mat out = Mat::Zero(K.front().rows(), K.front().cols());
    for (int i = 0; i < q(); ++i) out += w(i) * K[static_cast<std::size_t>(i)];
    return out;
  }
};

struct TerminalSettings {
  int N = 10;
  bool compute_doa = true;
  LmiSettings lmi;
  geometry::InvariantSettings invariant;
  geometry::ProjectionSettings projection;
};

/// Constraint set of the closed loop: states in X and every vertex gain's input in U.
inline geometry::Polytope closed_loop_constraints(const geometry::Polytope& X, const geometry::Polytope& U, const std::vector<Mat>& K) {
  geometry::Polytope Xc = X;
  for (const auto& k : K) Xc = Xc.stacked(U.preimage(k));
  return Xc;
}

/**
 * LMI gains and costs, the maximal invariant set of the vertex closed loops A_i + B_i K_i
 * inside Xc as the terminal set, and the N-step controlled invariant set grown from it.
 */
inline TerminalIngredients synth_terminal(const AffineLpvModel& m, const Mat& Qw, const Mat& Rw, const geometry::Polytope& X,
                                          const geometry::Polytope& U, const TerminalSettings& s = {}) {
  m.validate();
  require(X.dim() == m.n_x() && U.dim() == m.n_u(), "synth_terminal: constraint set dimensions");
  const LmiSolution lmi = solve_lmi(m, Qw, Rw, s.lmi);
  TerminalIngredients t;
  t.affine = m;
  t.Qw = Qw;
  t.Rw = Rw;
  t.P = lmi.P;
  t.K = lmi.K;
  t.lmi_min_eigenvalue = lmi.min_eigenvalue;
  t.lmi_max_x_condition = lmi.max_x_condition;
  t.lmi_max_k_residual = lmi.max_k_residual;
  t.warnings = lmi.warnings;
  t.Xc = closed_loop_constraints(X, U, lmi.K);
  geometry::InvariantSettings inv = s.invariant;
  inv.keep_iterates = false;
  const auto rpi = geometry::max_rpi_set(m.closed_loop(lmi.K), t.Xc, inv);
  t.omega = rpi.set;
  t.rpi_iterations = rpi.iterations;
  if (geometry::is_empty(t.omega) || !geometry::contains_point(t.omega, Vec::Zero(m.n_x()), -1e-9))
    throw NumericalError("synth_terminal: terminal set is empty or does not contain the origin in its interior");
  if (s.compute_doa) {
    const auto rc = geometry::n_step_rcpi(m.vertices, X, U, t.omega, s.N, inv, s.projection);
    t.cn = rc.set;
    t.rcpi_steps = rc.steps;
    t.rcpi_fixed_point = rc.fixed_point;
  } else {
    t.cn = t.omega;
  }
  return t;
}

struct DecreaseCertificate {
  int probes = 0;
  int passed = 0;
  double worst_decrease_slack = -kInf;  // max of V(x+) - V(x) + l(x, u)
  double worst_input_violation = -kInf;
  double worst_set_violation = -kInf;
  std::string witness;

  bool ok() const { return probes > 0 && passed == probes; }
};

namespace detail {

/// Uniform point of a bounded polytope by rejection from its bounding box.
inline Vec sample_in(const geometry::Polytope& p, const Vec& lo, const Vec& hi, Rng& rng) {
  for (int a = 0; a < 100000; ++a) {
    Vec x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.uniform(lo(i), hi(i));
    if (geometry::contains_point(p, x, 0.0)) return x;
  }
  throw NumericalError("verify_decrease: rejection sampling failed (set nearly flat)");
}

}  // namespace detail

/// V_j(x+) - V_i(x) + l(x, u) with u = K_i x and x+ = (A_i + B_i K_i) x.
inline double decrease_slack(const TerminalIngredients& t, int i, int j, const Vec& x) {
  const auto& [A, B] = t.affine.vertices[static_cast<std::size_t>(i)];
  const Mat& K = t.K[static_cast<std::size_t>(i)];
  const Vec u = K * x;
  const Vec xp = (A + B * K) * x;
  return xp.dot(t.P[static_cast<std::size_t>(j)] * xp) - x.dot(t.P[static_cast<std::size_t>(i)] * x) + x.dot(t.Qw * x) + u.dot(t.Rw * u);
}

/**
 * Probes random points of the terminal set: for every vertex pair (i, j), with u = K_i x and
 * x+ = (A_i + B_i K_i) x, require x+' P_j x+ - x' P_i x <= -(x'Qx + u'Ru) + tol, u in U and x+ in
 * the terminal set. Probe 0 is the origin.
 */
inline DecreaseCertificate verify_decrease(const TerminalIngredients& t, const geometry::Polytope& U, int n_probes, std::uint64_t seed,
                                           double tol = 1e-6, double set_tol = 1e-7) {
  require(n_probes >= 1, "verify_decrease: need at least one probe");
  if (geometry::is_empty(t.omega)) throw ValidationError("verify_decrease: terminal set is empty");
  const Eigen::Index n = t.omega.dim();
  Vec lo(n), hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    hi(i) = geometry::support(t.omega, Vec::Unit(n, i));
    lo(i) = -geometry::support(t.omega, -Vec::Unit(n, i));
  }
  require(lo.allFinite() && hi.allFinite(), "verify_decrease: terminal set is unbounded");
  DecreaseCertificate c;
  const Rng root = Rng(seed).split("terminal.decrease");
  for (int p = 0; p < n_probes; ++p) {
    Rng rng = root.split(static_cast<std::uint64_t>(p));
    const Vec x = p == 0 ? Vec(Vec::Zero(n)) : detail::sample_in(t.omega, lo, hi, rng);
    bool pass = true;
    std::ostringstream why;
    for (int i = 0; i < t.q(); ++i) {
      const auto& [A, B] = t.affine.vertices[static_cast<std::size_t>(i)];
      const Vec u = t.K[static_cast<std::size_t>(i)] * x;
      const Vec xp = (A + B * t.K[static_cast<std::size_t>(i)]) * x;
      const double uv = U.rows() ? (U.F() * u - U.g()).maxCoeff() : -kInf;
      const double sv = t.omega.rows() ? (t.omega.F() * xp - t.omega.g()).maxCoeff() : -kInf;
      c.worst_input_violation = std::max(c.worst_input_violation, uv);
      c.worst_set_violation = std::max(c.worst_set_violation, sv);
      if (uv > set_tol || sv > set_tol) {
        pass = false;
        why << "vertex " << i << ": input violation " << uv << ", successor violation " << sv << "; ";
      }
      for (int j = 0; j < t.q(); ++j) {
        const double slack = decrease_slack(t, i, j, x);
        c.worst_decrease_slack = std::max(c.worst_decrease_slack, slack);
        if (slack > tol) {
          pass = false;
          why << "pair (" << i << "," << j << "): decrease slack " << slack << "; ";
        }
      }
    }
    ++c.probes;
    if (pass) {
      ++c.passed;
    } else if (c.witness.empty()) {
      std::ostringstream w;
      w << "x = [" << x.transpose() << "]: " << why.str();
      c.witness = w.str();
    }
  }
  return c;
}

inline io::Json terminal_json(const TerminalIngredients& t) {
  io::Json P = io::Json::array(), K = io::Json::array();
  for (const auto& p : t.P) P.push_back(io::mat_json(p));
  for (const auto& k : t.K) K.push_back(io::mat_json(k));
  io::Json j = {{"affine", affine_json(t.affine)},
                {"Q", io::mat_json(t.Qw)},
                {"R", io::mat_json(t.Rw)},
                {"P", P},
                {"K", K},
                {"Xc", geometry::polytope_json(t.Xc)},
                {"omega", geometry::polytope_json(t.omega)},
                {"cn", geometry::polytope_json(t.cn)},
                {"rpi_iterations", t.rpi_iterations},
                {"rcpi_steps", t.rcpi_steps},
                {"rcpi_fixed_point", t.rcpi_fixed_point},
                {"lmi_min_eigenvalue", t.lmi_min_eigenvalue},
                {"lmi_max_x_condition", t.lmi_max_x_condition},
                {"lmi_max_k_residual", t.lmi_max_k_residual},
                {"warnings", t.warnings}};
  if (t.transform) j["transform"] = transform_json(*t.transform);
  return j;
}

inline TerminalIngredients json_terminal(const io::Json& j) {
  try {
    TerminalIngredients t;
    t.affine = json_affine(j.at("affine"));
    t.Qw = io::json_mat(j.at("Q"));
    t.Rw = io::json_mat(j.at("R"));
    for (const auto& p : j.at("P")) t.P.push_back(io::json_mat(p));
    for (const auto& k : j.at("K")) t.K.push_back(io::json_mat(k));
    t.Xc = geometry::json_polytope(j.at("Xc"));
    t.omega = geometry::json_polytope(j.at("omega"));
    t.cn = geometry::json_polytope(j.at("cn"));
    t.rpi_iterations = j.at("rpi_iterations").get<int>();
    t.rcpi_steps = j.at("rcpi_steps").get<int>();
    t.rcpi_fixed_point = j.at("rcpi_fixed_point").get<bool>();
    t.lmi_min_eigenvalue = j.at("lmi_min_eigenvalue").get<double>();
    t.lmi_max_x_condition = j.at("lmi_max_x_condition").get<double>();
    t.lmi_max_k_residual = j.at("lmi_max_k_residual").get<double>();
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("transform")) t.transform = json_transform(j.at("transform"));
    require(static_cast<int>(t.P.size()) == t.q() && static_cast<int>(t.K.size()) == t.q(), "terminal JSON: one P and K per vertex");
    return t;
  } catch (const io::Json::exception& e) {
    throw ValidationError(std::string("terminal JSON: ") + e.what());
  }
}

}  // namespace lpv_smpc::terminal

#endif  // LPV_SMPC_TERMINAL_SYNTH_HPP
