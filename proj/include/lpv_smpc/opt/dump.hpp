#ifndef LPV_SMPC_OPT_DUMP_HPP
#define LPV_SMPC_OPT_DUMP_HPP

#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

#include "lpv_smpc/opt/problems.hpp"
#include "lpv_smpc/opt/sdp.hpp"

namespace lpv_smpc::opt {

namespace detail {

inline std::string linear_form(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  std::ostringstream os;
  os << std::setprecision(17);
  bool first = true;
  for (Eigen::Index k = 0; k < row.size(); ++k) {
    if (row(k) == 0.0) continue;
    os << (first ? "" : " ") << (row(k) < 0 ? "- " : (first ? "" : "+ "));
    if (std::abs(row(k)) != 1.0) os << std::abs(row(k)) << " ";
    os << "x" << k;
    first = false;
  }
  if (first) os << "0";
  return os.str();
}

}  // namespace detail

/// Human-readable dump, one constraint per line.
inline void dump(std::ostream& os, const LinearProgram& lp) {
  os << std::setprecision(17);
  os << "LP vars " << lp.num_vars() << "\n";
  os << "min " << detail::linear_form(lp.cost.transpose()) << "\n";
  for (Eigen::Index i = 0; i < lp.A_ineq.rows(); ++i)
    os << "ineq " << i << ": " << detail::linear_form(lp.A_ineq.row(i)) << " <= " << lp.b_ineq(i) << "\n";
  for (Eigen::Index i = 0; i < lp.A_eq.rows(); ++i)
    os << "eq " << i << ": " << detail::linear_form(lp.A_eq.row(i)) << " = " << lp.b_eq(i) << "\n";
  for (Eigen::Index k = 0; k < lp.num_vars(); ++k)
    if (std::isfinite(lp.lower(k)) || std::isfinite(lp.upper(k)))
      os << "bound x" << k << ": " << lp.lower(k) << " <= x" << k << " <= " << lp.upper(k) << "\n";
}

inline void dump(std::ostream& os, const QuadraticProgram& qp) {
  os << std::setprecision(17);
  os << "QP vars " << qp.num_vars() << "\n";
  for (Eigen::Index i = 0; i < qp.hessian.rows(); ++i)
    os << "hessian row " << i << ": " << detail::linear_form(qp.hessian.row(i)) << "\n";
  os << "linear " << detail::linear_form(qp.linear.transpose()) << "\n";
  for (Eigen::Index i = 0; i < qp.A_ineq.rows(); ++i)
    os << "ineq " << i << ": " << detail::linear_form(qp.A_ineq.row(i)) << " <= " << qp.b_ineq(i) << "\n";
  for (Eigen::Index i = 0; i < qp.A_eq.rows(); ++i)
    os << "eq " << i << ": " << detail::linear_form(qp.A_eq.row(i)) << " = " << qp.b_eq(i) << "\n";
}

inline void dump(std::ostream& os, const SemidefiniteProgram& sdp) {
  os << std::setprecision(17);
  os << "SDP vars " << sdp.num_vars() << "\n";
  for (const auto& b : sdp.variable_blocks())
    os << "block " << b.name << " " << b.rows << "x" << b.cols << (b.symmetric ? " sym" : "") << " offset "
       << b.offset << "\n";
  for (const auto& c : sdp.constraints()) {
    os << "psd " << c.name << " size " << c.expr.rows() << ": const";
    for (Eigen::Index i = 0; i < c.expr.rows(); ++i) os << " [" << detail::linear_form(c.expr.constant().row(i)) << "]";
    for (const auto& [k, m] : c.expr.terms()) os << " + x" << k << "*(" << m.cwiseAbs().sum() << " abs-sum)";
    os << "\n";
  }
}

template <class Program>
std::string dump_string(const Program& p) {
  std::ostringstream os;
  dump(os, p);
  return os.str();
}

}  // namespace lpv_smpc::opt

#endif  // LPV_SMPC_OPT_DUMP_HPP
