#ifndef LPV_SMPC_LPV_BENCHMARKS_HPP
#define LPV_SMPC_LPV_BENCHMARKS_HPP

#include <cmath>
#include <numbers>
#include <string>

#include "lpv_smpc/lpv/data.hpp"
#include "lpv_smpc/lpv/system.hpp"

namespace lpv_smpc::lpv {

/// Parameter-varying double integrator: A affine in three scheduling variables, constant B.
inline LpvPlant double_integrator() {
  MatrixFunction f(2, 1, 3, [](const Vec& th) {
    Mat A(2, 2);
    A << 1.0, 1.0, 0.0, 1.0;
    A += 0.1 * th(0) * Mat::Identity(2, 2);
    A(0, 0) += 0.5 * th(1);
    A(0, 1) += 0.5 * th(1);
    A(1, 1) += 0.2 * th(2);
    Mat B(2, 1);
    B << 0.5, 1.0;
    return std::make_pair(A, B);
  });
  return LpvPlant("double_integrator", f, Box::symmetric(2, 6.0), Box::symmetric(1, 1.0), Box::symmetric(3, 1.0));
}

/// Two-state, two-input plant with trigonometric and polynomial scheduling dependence.
inline LpvPlant mimo_nonlinear() {
  MatrixFunction f(2, 2, 2, [](const Vec& th) {
    const double t1 = th(0), t2 = th(1);
    Mat A(2, 2), B(2, 2);
    A << std::sin(t1), t1 * t1 + t1 * t2, t2 * t2 * t2, std::cos(t1 + t2);
    B << t2 * t2 * t2 * t2, std::cos(t2), std::sin(t1 + t2), t1 * t1 * t1;
    return std::make_pair(A, B);
  });
  return LpvPlant("mimo_nonlinear", f, Box::symmetric(2, 6.0), Box::symmetric(2, 1.0), Box::symmetric(2, 1.0));
}

inline LpvPlant benchmark_plant(const std::string& id) {
  if (id == "double_integrator") return double_integrator();
  if (id == "mimo_nonlinear") return mimo_nonlinear();
  throw ValidationError("unknown plant id '" + id + "' (expected double_integrator or mimo_nonlinear)");
}

/// Identification experiment defaults for each benchmark.
inline ExcitationProtocol default_protocol(const std::string& id, std::uint64_t seed) {
  ExcitationProtocol p;
  p.seed = seed;
  if (id == "double_integrator") {
    // Slow sinusoids with distinct frequencies; offsets keep the open loop inside the state set.
    Vec omega(3);
    omega << 0.011, 0.017, 0.023;
    omega *= 2.0 * std::numbers::pi;
    p.scheduling = SchedulingGenerator::sinusoid(Vec((Vec(3) << 0.0, -0.5, -0.5).finished()),
                                                 Vec((Vec(3) << 1.0, 0.5, 0.5).finished()), omega, true);
    p.input.kind = InputGenerator::Kind::Prbs;
    p.input.amplitude = 0.01;
    p.samples = 500;
    p.train_count = 400;
    p.x0 = (Vec(2) << 2.7, 0.0).finished();
    return p;
  }
  if (id == "mimo_nonlinear") {
    p.scheduling = SchedulingGenerator::sinusoid(Vec::Zero(2), Vec::Ones(2), Vec((Vec(2) << 0.3, 0.7).finished()), false);
    p.input.kind = InputGenerator::Kind::Uniform;
    p.input.lower = -0.45;
    p.input.upper = 0.45;
    p.samples = 1100;
    p.train_count = 800;
    p.x0 = Vec::Zero(2);
    return p;
  }
  throw ValidationError("unknown plant id '" + id + "'");
}

}  // namespace lpv_smpc::lpv

#endif  // LPV_SMPC_LPV_BENCHMARKS_HPP
