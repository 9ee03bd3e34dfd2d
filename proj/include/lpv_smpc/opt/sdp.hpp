#ifndef LPV_SMPC_OPT_SDP_HPP
#define LPV_SMPC_OPT_SDP_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lpv_smpc/opt/problems.hpp"

namespace lpv_smpc::opt {

/// Matrix expression C + sum_k v_k M_k, affine in the scalar decision entries v.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(Eigen::Index rows, Eigen::Index cols) : constant_(Mat::Zero(rows, cols)) {}
  explicit AffineMatrix(Mat constant) : constant_(std::move(constant)) {}

  static AffineMatrix zero(Eigen::Index rows, Eigen::Index cols) { return AffineMatrix(rows, cols); }
  static AffineMatrix identity(Eigen::Index n) { return AffineMatrix(Mat(Mat::Identity(n, n))); }

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  const Mat& constant() const { return constant_; }
  const std::map<int, Mat>& terms() const { return terms_; }

  void add_term(int var, const Mat& coeff) {
    require(coeff.rows() == rows() && coeff.cols() == cols(), "AffineMatrix: coefficient shape mismatch");
    auto it = terms_.find(var);
    if (it == terms_.end()) {
      terms_.emplace(var, coeff);
    } else {
      it->second += coeff;
    }
  }

  Mat evaluate(const Vec& v) const {
    Mat out = constant_;
    for (const auto& [k, m] : terms_) out += v(k) * m;
    return out;
  }

  AffineMatrix transpose() const {
    AffineMatrix out(Mat(constant_.transpose()));
    for (const auto& [k, m] : terms_) out.terms_.emplace(k, m.transpose());
    return out;
  }

  AffineMatrix& operator+=(const AffineMatrix& o) {
    require(o.rows() == rows() && o.cols() == cols(), "AffineMatrix: sum shape mismatch");
    constant_ += o.constant_;
    for (const auto& [k, m] : o.terms_) add_term(k, m);
    return *this;
  }

  AffineMatrix operator-() const {
    AffineMatrix out(Mat(-constant_));
    for (const auto& [k, m] : terms_) out.terms_.emplace(k, -m);
    return out;
  }

  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a += -b; }
  friend AffineMatrix operator+(AffineMatrix a, const Mat& b) { return a += AffineMatrix(b); }
  friend AffineMatrix operator-(AffineMatrix a, const Mat& b) { return a += AffineMatrix(Mat(-b)); }

  friend AffineMatrix operator*(double s, const AffineMatrix& a) {
    AffineMatrix out(Mat(s * a.constant_));
    for (const auto& [k, m] : a.terms_) out.terms_.emplace(k, s * m);
    return out;
  }

  friend AffineMatrix operator*(const Mat& l, const AffineMatrix& a) {
    require(l.cols() == a.rows(), "AffineMatrix: left product shape mismatch");
    AffineMatrix out(Mat(l * a.constant_));
    for (const auto& [k, m] : a.terms_) out.terms_.emplace(k, l * m);
    return out;
  }

  friend AffineMatrix operator*(const AffineMatrix& a, const Mat& r) {
    require(a.cols() == r.rows(), "AffineMatrix: right product shape mismatch");
    AffineMatrix out(Mat(a.constant_ * r));
    for (const auto& [k, m] : a.terms_) out.terms_.emplace(k, m * r);
    return out;
  }

  /// Assemble a block matrix; every row of blocks must share heights and every column widths.
  static AffineMatrix blocks(const std::vector<std::vector<AffineMatrix>>& grid) {
    require(!grid.empty() && !grid.front().empty(), "AffineMatrix::blocks: empty grid");
    const auto nbr = grid.size();
    const auto nbc = grid.front().size();
    std::vector<Eigen::Index> heights(nbr), widths(nbc);
    for (std::size_t i = 0; i < nbr; ++i) {
      require(grid[i].size() == nbc, "AffineMatrix::blocks: ragged grid");
      heights[i] = grid[i][0].rows();
    }
    for (std::size_t j = 0; j < nbc; ++j) widths[j] = grid[0][j].cols();
    Eigen::Index total_r = 0, total_c = 0;
    for (auto h : heights) total_r += h;
    for (auto w : widths) total_c += w;
    AffineMatrix out(total_r, total_c);
    Eigen::Index r0 = 0;
    for (std::size_t i = 0; i < nbr; ++i) {
      Eigen::Index c0 = 0;
      for (std::size_t j = 0; j < nbc; ++j) {
        const auto& b = grid[i][j];
        require(b.rows() == heights[i] && b.cols() == widths[j], "AffineMatrix::blocks: block shape mismatch");
        out.constant_.block(r0, c0, b.rows(), b.cols()) = b.constant_;
        for (const auto& [k, m] : b.terms_) {
          Mat big = Mat::Zero(total_r, total_c);
          big.block(r0, c0, b.rows(), b.cols()) = m;
          out.add_term(k, big);
        }
        c0 += widths[j];
      }
      r0 += heights[i];
    }
    return out;
  }

 private:
  Mat constant_;
  std::map<int, Mat> terms_;
};

struct SdpVariableBlock {
  std::string name;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  bool symmetric = false;
  int offset = 0;
  int size() const {
    return static_cast<int>(symmetric ? rows * (rows + 1) / 2 : rows * cols);
  }
};

struct PsdConstraint {
  std::string name;
  AffineMatrix expr;
};

/**
 * Feasibility (optionally linear-objective) program over matrix decision blocks
 * with constraints expr ⪰ margin * I.
 */
class SemidefiniteProgram {
 public:
  /// Declare a decision block and return it as an affine expression.
  AffineMatrix add_variable(const std::string& name, Eigen::Index rows, Eigen::Index cols, bool symmetric) {
    require(rows > 0 && cols > 0, "SemidefiniteProgram: empty variable block");
    require(!symmetric || rows == cols, "SemidefiniteProgram: symmetric block must be square");
    for (const auto& b : blocks_) require(b.name != name, "SemidefiniteProgram: duplicate block " + name);
    SdpVariableBlock b{name, rows, cols, symmetric, num_vars_};
    num_vars_ += b.size();
    blocks_.push_back(b);
    return variable(name);
  }

  AffineMatrix variable(const std::string& name) const {
    const auto& b = block(name);
    AffineMatrix out(b.rows, b.cols);
    int k = b.offset;
    if (b.symmetric) {
      for (Eigen::Index j = 0; j < b.cols; ++j)
        for (Eigen::Index i = 0; i <= j; ++i) {
          Mat e = Mat::Zero(b.rows, b.cols);
          e(i, j) = 1.0;
          e(j, i) = 1.0;
          out.add_term(k++, e);
        }
    } else {
      for (Eigen::Index i = 0; i < b.rows; ++i)
        for (Eigen::Index j = 0; j < b.cols; ++j) {
          Mat e = Mat::Zero(b.rows, b.cols);
          e(i, j) = 1.0;
          out.add_term(k++, e);
        }
    }
    return out;
  }

  void add_psd_constraint(const AffineMatrix& expr, const std::string& name = "") {
    require(expr.rows() == expr.cols() && expr.rows() > 0, "SemidefiniteProgram: PSD constraint must be square");
    const auto sym_err = [](const Mat& m) { return (m - m.transpose()).cwiseAbs().maxCoeff(); };
    require(sym_err(expr.constant()) <= 1e-12 * (1.0 + expr.constant().cwiseAbs().maxCoeff()),
            "SemidefiniteProgram: constraint " + name + " not symmetric");
    for (const auto& [k, m] : expr.terms()) {
      (void)k;
      require(sym_err(m) <= 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()),
              "SemidefiniteProgram: constraint " + name + " not symmetric");
    }
    constraints_.push_back({name.empty() ? "lmi_" + std::to_string(constraints_.size()) : name, expr});
  }

  /// Linear objective to minimize, given as a 1x1 affine expression.
  void set_objective(const AffineMatrix& obj) {
    require(obj.rows() == 1 && obj.cols() == 1, "SemidefiniteProgram: objective must be scalar");
    objective_ = obj;
  }

  Mat value(const std::string& name, const Vec& v) const { return variable(name).evaluate(v); }

  const SdpVariableBlock& block(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    throw ValidationError("SemidefiniteProgram: unknown block " + name);
  }

  int num_vars() const { return num_vars_; }
  const std::vector<SdpVariableBlock>& variable_blocks() const { return blocks_; }
  const std::vector<PsdConstraint>& constraints() const { return constraints_; }
  const std::optional<AffineMatrix>& objective() const { return objective_; }

  /// Smallest eigenvalue of each constraint at v.
  std::vector<double> min_eigenvalues(const Vec& v) const {
    std::vector<double> out;
    for (const auto& c : constraints_) {
      Eigen::SelfAdjointEigenSolver<Mat> eig(c.expr.evaluate(v), Eigen::EigenvaluesOnly);
      out.push_back(eig.eigenvalues().minCoeff());
    }
    return out;
  }

 private:
  std::vector<SdpVariableBlock> blocks_;
  std::vector<PsdConstraint> constraints_;
  std::optional<AffineMatrix> objective_;
  int num_vars_ = 0;
};

namespace detail {

/// Barrier problem: min tau*c'w - sum logdet G_k(w) - sum log(b^2 - w_i^2) over boxed coordinates.
class LogDetBarrier {
 public:
  struct Block {
    Mat constant;
    std::vector<std::pair<int, Mat>> terms;
  };

  LogDetBarrier(std::vector<Block> blocks, Vec cost, std::vector<int> boxed, double bound)
      : blocks_(std::move(blocks)), cost_(std::move(cost)), boxed_(std::move(boxed)), bound_(bound) {}

  int barrier_order() const {
    int m = 0;
    for (const auto& b : blocks_) m += static_cast<int>(b.constant.rows());
    return m + 2 * static_cast<int>(boxed_.size());
  }

  Mat eval_block(const Block& b, const Vec& w) const {
    Mat g = b.constant;
    for (const auto& [k, m] : b.terms) g += w(k) * m;
    return g;
  }

  /// Barrier value (without the tau term), +inf outside the domain.
  double barrier(const Vec& w) const {
    double f = 0.0;
    for (const auto& b : blocks_) {
      Eigen::LLT<Mat> llt(eval_block(b, w));
      if (llt.info() != Eigen::Success) return kInf;
      const Vec d = llt.matrixLLT().diagonal();
      if ((d.array() <= 0.0).any()) return kInf;
      f -= 2.0 * d.array().log().sum();
    }
    for (int i : boxed_) {
      const double r = bound_ * bound_ - w(i) * w(i);
      if (r <= 0.0) return kInf;
      f -= std::log(r);
    }
    return f;
  }

  /// Newton centering at fixed tau. Returns false on numerical failure.
  bool center(Vec& w, double tau, int& newton_steps, int max_steps) const {
    const auto n = w.size();
    for (int it = 0; it < max_steps; ++it) {
      Vec grad = tau * cost_;
      Mat hess = Mat::Zero(n, n);
      for (const auto& b : blocks_) {
        Eigen::LLT<Mat> llt(eval_block(b, w));
        if (llt.info() != Eigen::Success) return false;
        const auto nt = b.terms.size();
        std::vector<Mat> W(nt);
        for (std::size_t t = 0; t < nt; ++t) {
          // W_t = L^-1 G_t L^-T
          Mat tmp = llt.matrixL().solve(b.terms[t].second);
          W[t] = llt.matrixL().solve(Mat(tmp.transpose())).transpose();
          grad(b.terms[t].first) -= W[t].trace();
        }
        for (std::size_t s = 0; s < nt; ++s)
          for (std::size_t t = s; t < nt; ++t) {
            const double h = W[s].cwiseProduct(W[t].transpose()).sum();
            hess(b.terms[s].first, b.terms[t].first) += h;
            if (s != t) hess(b.terms[t].first, b.terms[s].first) += h;
          }
      }
      for (int i : boxed_) {
        const double r = bound_ * bound_ - w(i) * w(i);
        grad(i) += 2.0 * w(i) / r;
        hess(i, i) += 2.0 / r + 4.0 * w(i) * w(i) / (r * r);
      }
      hess.diagonal().array() += 1e-14 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
      Eigen::LDLT<Mat> ldlt(hess);
      Vec dw = -ldlt.solve(grad);
      if (!dw.allFinite()) return false;
      const double dec2 = -grad.dot(dw);
      ++newton_steps;
      if (dec2 / 2.0 <= 1e-10) return true;
      // Backtracking line search that stays inside the domain.
      const double f0 = tau * cost_.dot(w) + barrier(w);
      double a = 1.0;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        const Vec wn = w + a * dw;
        const double fb = barrier(wn);
        if (std::isfinite(fb) && tau * cost_.dot(wn) + fb <= f0 - 0.25 * a * dec2) {
          w = wn;
          accepted = true;
          break;
        }
        a *= 0.5;
      }
      if (!accepted) return dec2 < 1e-6;
    }
    return true;
  }

 private:
  std::vector<Block> blocks_;
  Vec cost_;
  std::vector<int> boxed_;
  double bound_;
};

inline std::vector<LogDetBarrier::Block> shifted_blocks(const SemidefiniteProgram& sdp, double shift, int t_index) {
  std::vector<LogDetBarrier::Block> out;
  for (const auto& c : sdp.constraints()) {
    LogDetBarrier::Block b;
    const auto r = c.expr.rows();
    b.constant = c.expr.constant() - shift * Mat::Identity(r, r);
    for (const auto& [k, m] : c.expr.terms()) b.terms.emplace_back(k, m);
    if (t_index >= 0) b.terms.emplace_back(t_index, -Mat::Identity(r, r));
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace detail

/**
 * Solve an SDP whose constraints are expr_k(v) ⪰ margin * I.
 *
 * Phase 1 maximizes t subject to expr_k(v) - t I ⪰ 0 with a log-det barrier
 * path-following method (every decision entry boxed by sdp_variable_bound).
 * The program is Infeasible when the certified upper bound on t stays below
 * the margin. If an objective is present, phase 2 minimizes it from the
 * phase-1 point along the barrier path of expr_k(v) ⪰ margin * I.
 */
inline SolveStatus solve_sdp(const SemidefiniteProgram& sdp, const SolverSettings& settings = {}) {
  require(settings.sdp_margin > 0.0, "solve_sdp: margin must be positive");
  SolveStatus out;
  const int nv = sdp.num_vars();
  const double eps = settings.sdp_margin;
  const double bound = settings.sdp_variable_bound;
  if (sdp.constraints().empty()) {
    out.status = Status::Optimal;
    out.primal = Vec::Zero(nv);
    out.objective = sdp.objective() ? sdp.objective()->evaluate(out.primal)(0, 0) : 0.0;
    out.primal_residual = 0.0;
    out.dual_residual = 0.0;
    return out;
  }

  std::vector<int> boxed(static_cast<std::size_t>(nv));
  for (int i = 0; i < nv; ++i) boxed[static_cast<std::size_t>(i)] = i;

  // Phase 1 over w = (v, t).
  Vec w = Vec::Zero(nv + 1);
  double lam0 = kInf;
  for (double l : sdp.min_eigenvalues(Vec::Zero(nv))) lam0 = std::min(lam0, l);
  w(nv) = lam0 - 1.0;
  Vec cost1 = Vec::Zero(nv + 1);
  cost1(nv) = -1.0;
  detail::LogDetBarrier phase1(detail::shifted_blocks(sdp, 0.0, nv), cost1, boxed, bound);
  const double m1 = phase1.barrier_order();
  double tau = 1.0;
  int steps = 0;
  bool ok = true;
  while (true) {
    if (!phase1.center(w, tau, steps, 200)) {
      ok = false;
      break;
    }
    const double t = w(nv);
    const double gap = m1 / tau;
    if (t + gap < eps) break;  // certified below the margin
    if (gap <= settings.gap_tol * (1.0 + std::abs(t))) break;
    if (steps > settings.max_iterations) break;
    tau *= 10.0;
  }
  out.iterations = steps;
  const double t_best = w(nv);
  Vec v = w.head(nv);
  if (!ok && t_best < eps) {
    out.status = Status::NumericalError;
    return out;
  }
  if (t_best < eps) {
    // Upper bound t + m/tau < eps certifies infeasibility within the variable box.
    out.status = (t_best + m1 / tau < eps) ? Status::Infeasible : Status::MaxIter;
    if (out.status == Status::MaxIter) out.primal = v;
    return out;
  }

  if (sdp.objective()) {
    const auto& obj = *sdp.objective();
    Vec cost2 = Vec::Zero(nv);
    for (const auto& [k, m] : obj.terms()) cost2(k) = m(0, 0);
    detail::LogDetBarrier phase2(detail::shifted_blocks(sdp, eps, -1), cost2, boxed, bound);
    const double m2 = phase2.barrier_order();
    double tau2 = 1.0;
    Vec v2 = v;
    // Phase 1 ended with t >= margin, so v should be inside the shifted domain.
    if (!std::isfinite(phase2.barrier(v2))) {
      out.status = Status::NumericalError;
      return out;
    }
    while (true) {
      if (!phase2.center(v2, tau2, steps, 200)) break;
      v = v2;
      if (m2 / tau2 <= settings.gap_tol * (1.0 + std::abs(cost2.dot(v)))) break;
      if (steps > settings.max_iterations) break;
      tau2 *= 10.0;
    }
    out.iterations = steps;
  }

  double min_lam = kInf;
  for (double l : sdp.min_eigenvalues(v)) min_lam = std::min(min_lam, l);
  out.primal = v;
  out.objective = sdp.objective() ? sdp.objective()->evaluate(v)(0, 0) : 0.0;
  out.primal_residual = std::max(0.0, eps - min_lam);
  out.dual_residual = 0.0;
  out.status = min_lam >= eps - 1e-7 ? Status::Optimal : Status::NumericalError;
  return out;
}

}  // namespace lpv_smpc::opt

#endif  // LPV_SMPC_OPT_SDP_HPP
