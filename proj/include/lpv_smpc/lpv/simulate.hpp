#ifndef LPV_SMPC_LPV_SIMULATE_HPP
#define LPV_SMPC_LPV_SIMULATE_HPP

#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "lpv_smpc/io/csv.hpp"
#include "lpv_smpc/lpv/system.hpp"

namespace lpv_smpc::lpv {

/// Controller queried with the measured state, scheduling value and time index.
using Controller = std::function<Vec(const Vec& x, const Vec& theta, int k)>;

/// Raised when the controller cannot produce an input; carries the failing step.
class ControllerFailure : public NumericalError {
 public:
  ControllerFailure(int step, const std::string& what)
      : NumericalError("controller failed at step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/**
 * Run x(k+1) = A(theta(k)) x(k) + B(theta(k)) u(k) with u(k) = controller(x(k), theta(k), k)
 * for k = 0..K-1. theta_signal has at least K rows.
 */
inline Trajectory simulate_closed_loop(const LpvPlant& plant, const Controller& controller, const Mat& theta_signal,
                                       const Vec& x0, int K) {
  require(K >= 0, "simulate_closed_loop: negative horizon");
  require(theta_signal.rows() >= K && theta_signal.cols() == plant.n_theta(),
          "simulate_closed_loop: scheduling signal too short or wrong width");
  require(x0.size() == plant.n_x(), "simulate_closed_loop: x0 dimension mismatch");
  require(plant.state_set.contains(x0), "simulate_closed_loop: x0 outside the state set");
  Trajectory t;
  t.states.resize(K + 1, plant.n_x());
  t.inputs.resize(K, plant.n_u());
  t.scheds = theta_signal.topRows(K);
  t.states.row(0) = x0.transpose();
  Vec x = x0;
  for (int k = 0; k < K; ++k) {
    const Vec theta = theta_signal.row(k).transpose();
    Vec u;
    try {
      u = controller(x, theta, k);
    } catch (const ControllerFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw ControllerFailure(k, e.what());
    }
    if (u.size() != plant.n_u()) throw ControllerFailure(k, "input dimension mismatch");
    t.inputs.row(k) = u.transpose();
    x = step(plant, x, u, theta);
    t.states.row(k + 1) = x.transpose();
  }
  return t;
}

/// Open-loop replay of a recorded input sequence.
inline Trajectory simulate_open_loop(const LpvPlant& plant, const Mat& inputs, const Mat& theta_signal, const Vec& x0) {
  const int K = static_cast<int>(inputs.rows());
  return simulate_closed_loop(
      plant, [&inputs](const Vec&, const Vec&, int k) { return Vec(inputs.row(k).transpose()); }, theta_signal, x0, K);
}

inline io::CsvTable trajectory_table(const Trajectory& t) {
  io::CsvTable tab;
  const auto nx = t.states.cols(), nu = t.inputs.cols(), nt = t.scheds.cols();
  tab.header = {"k"};
  for (const auto& v : {io::numbered("x", nx), io::numbered("u", nu), io::numbered("theta", nt)})
    tab.header.insert(tab.header.end(), v.begin(), v.end());
  const auto K = t.inputs.rows();
  // The last row carries the terminal state; its input/scheduling cells are NaN.
  tab.data = Mat::Constant(K + 1, 1 + nx + nu + nt, std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index k = 0; k <= K; ++k) {
    tab.data(k, 0) = static_cast<double>(k);
    tab.data.row(k).segment(1, nx) = t.states.row(k);
    if (k < K) {
      tab.data.row(k).segment(1 + nx, nu) = t.inputs.row(k);
      tab.data.row(k).segment(1 + nx + nu, nt) = t.scheds.row(k);
    }
  }
  return tab;
}

}  // namespace lpv_smpc::lpv

#endif  // LPV_SMPC_LPV_SIMULATE_HPP
