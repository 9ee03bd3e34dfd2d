#ifndef LPV_SMPC_BNN_CALIBRATE_HPP
#define LPV_SMPC_BNN_CALIBRATE_HPP

#include <algorithm>
#include <sstream>
#include <vector>

#include "lpv_smpc/bnn/model.hpp"

namespace lpv_smpc::bnn {

/// 0.25, 0.5, ..., 8.
inline std::vector<double> beta_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 32; ++i) g.push_back(0.25 * i);
  return g;
}

struct CalibrationResult {
  Vec beta;                  // per channel
  Vec channel_rate;          // per-channel violation fraction at beta
  double delta_hat = 0.0;    // fraction of records with any channel outside its band
  bool admissible = false;   // beta * sigma below the state-set half width on every test record
  std::vector<double> grid;
  Mat grid_rates;            // channels x grid violation fractions
};

/// Fraction of records (columns) with |residual| > beta * sigma, per channel.
inline Vec violation_fraction(const Mat& abs_residual, const Mat& sigma, double beta) {
  const Mat out = (abs_residual.array() > beta * sigma.array()).cast<double>().matrix();
  return out.rowwise().mean();
}

/**
 * Smallest grid beta per channel with violation fraction at most delta_target, then the
 * admissibility check beta * sigma < half width of the state set. Throws NumericalError if
 * no grid value works.
 */
inline CalibrationResult calibrate_from_residuals(const Mat& residual, const Mat& sigma, double delta_target, const Box& state_set) {
  require(residual.cols() > 0, "calibrate: test set is empty");
  require(residual.rows() == sigma.rows() && residual.cols() == sigma.cols(), "calibrate: shape mismatch");
  require(residual.rows() == state_set.dim(), "calibrate: state set dimension mismatch");
  require(delta_target >= 0.0 && delta_target <= 1.0, "calibrate: delta_target must lie in [0, 1]");
  const Mat r = residual.cwiseAbs();
  CalibrationResult c;
  c.grid = beta_grid();
  const auto nx = residual.rows();
  c.grid_rates.resize(nx, static_cast<Eigen::Index>(c.grid.size()));
  for (std::size_t g = 0; g < c.grid.size(); ++g) c.grid_rates.col(static_cast<Eigen::Index>(g)) = violation_fraction(r, sigma, c.grid[g]);
  c.beta.resize(nx);
  for (Eigen::Index i = 0; i < nx; ++i) {
    Eigen::Index g = 0;
    while (g < c.grid_rates.cols() && c.grid_rates(i, g) > delta_target) ++g;
    if (g == c.grid_rates.cols()) {
      std::ostringstream os;
      os << "calibration failed on channel " << i + 1 << ": violation fraction " << c.grid_rates(i, g - 1)
         << " at beta = 8 exceeds " << delta_target << "; adjust the architecture or collect more data";
      throw NumericalError(os.str());
    }
    c.beta(i) = c.grid[static_cast<std::size_t>(g)];
  }
  c.channel_rate = Vec(nx);
  int bad = 0;
  for (Eigen::Index n = 0; n < r.cols(); ++n) {
    bool any = false;
    for (Eigen::Index i = 0; i < nx; ++i) any = any || r(i, n) > c.beta(i) * sigma(i, n);
    bad += any ? 1 : 0;
  }
  for (Eigen::Index i = 0; i < nx; ++i) c.channel_rate(i) = violation_fraction(r.row(i), sigma.row(i), c.beta(i))(0);
  c.delta_hat = static_cast<double>(bad) / static_cast<double>(r.cols());
  c.admissible = true;
  for (Eigen::Index i = 0; i < nx; ++i) {
    const double half = 0.5 * state_set.width()(i);
    if ((c.beta(i) * sigma.row(i).array()).maxCoeff() >= half) {
      std::ostringstream os;
      os << "calibration failed on channel " << i + 1 << ": beta * sigma reaches " << (c.beta(i) * sigma.row(i).array()).maxCoeff()
         << ", not below the state-set half width " << half << "; adjust the architecture or collect more data";
      throw NumericalError(os.str());
    }
  }
  return c;
}

inline CalibrationResult calibrate_beta(const BnnLpvModel& m, const Batch& test, double delta_target, const Box& state_set,
                                        int n_samples, std::uint64_t seed) {
  require(test.size() > 0, "calibrate_beta: test set is empty");
  const PosteriorPrediction p = predict_posterior(m, test.theta, test.x, test.u, n_samples, seed);
  return calibrate_from_residuals(test.xnext - p.mean, p.std, delta_target, state_set);
}

/// Fraction of records with every channel inside mean +- k * std.
inline double band_coverage(const Mat& reference, const PosteriorPrediction& p, double k) {
  const Mat r = (reference - p.mean).cwiseAbs();
  int in = 0;
  for (Eigen::Index n = 0; n < r.cols(); ++n) in += ((r.col(n).array() <= k * p.std.col(n).array()).all() ? 1 : 0);
  return static_cast<double>(in) / static_cast<double>(r.cols());
}

struct EnvelopeReport {
  bool contained = true;
  Mat lower;  // (K+1) x n_x
  Mat upper;
  std::vector<std::pair<int, int>> misses;  // (k, channel)
  int n_models = 0;
};

/**
 * Roll every model open loop from x0 under the recorded scheduling and inputs and check the
 * true state lies in the per-step min/max over the rollouts.
 */
inline EnvelopeReport envelope_check(const std::vector<lpv::MatrixFunction>& models, const Mat& theta_signal, const Vec& x0,
                                     const Mat& inputs, const Mat& true_states, double tol = 0.0) {
  require(!models.empty(), "envelope_check: no models");
  const auto K = inputs.rows();
  require(theta_signal.rows() >= K, "envelope_check: scheduling signal shorter than the input sequence");
  require(true_states.rows() == K + 1 && true_states.cols() == x0.size(), "envelope_check: true trajectory shape mismatch");
  EnvelopeReport rep;
  rep.n_models = static_cast<int>(models.size());
  rep.lower = Mat::Constant(K + 1, x0.size(), kInf);
  rep.upper = Mat::Constant(K + 1, x0.size(), -kInf);
  for (const auto& f : models) {
    Vec x = x0;
    for (Eigen::Index k = 0; k <= K; ++k) {
      rep.lower.row(k) = rep.lower.row(k).cwiseMin(x.transpose());
      rep.upper.row(k) = rep.upper.row(k).cwiseMax(x.transpose());
      if (k < K) x = f.next_state(theta_signal.row(k).transpose(), x, inputs.row(k).transpose());
    }
  }
  for (Eigen::Index k = 0; k <= K; ++k)
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
      const double v = true_states(k, i);
      if (v < rep.lower(k, i) - tol || v > rep.upper(k, i) + tol) rep.misses.emplace_back(static_cast<int>(k), static_cast<int>(i));
    }
  rep.contained = rep.misses.empty();
  return rep;
}

inline std::vector<lpv::MatrixFunction> sample_models(const BnnLpvModel& m, int n_models, std::uint64_t seed) {
  require(n_models >= 1, "sample_models: need at least one model");
  Rng root = Rng(seed).split("bnn.models");
  std::vector<lpv::MatrixFunction> out;
  out.reserve(static_cast<std::size_t>(n_models));
  for (int i = 0; i < n_models; ++i) out.push_back(sample_model(m, root.split(static_cast<std::uint64_t>(i)).next_u64()));
  return out;
}

inline EnvelopeReport envelope_check(const BnnLpvModel& m, const Mat& theta_signal, const Vec& x0, const Mat& inputs,
                                     int n_models, const Mat& true_states, std::uint64_t seed, double tol = 0.0) {
  return envelope_check(sample_models(m, n_models, seed), theta_signal, x0, inputs, true_states, tol);
}

inline io::Json calibration_json(const CalibrationResult& c) {
  return {{"beta", io::vec_json(c.beta)},
          {"channel_rate", io::vec_json(c.channel_rate)},
          {"delta_hat", c.delta_hat},
          {"admissible", c.admissible},
          {"grid", c.grid},
          {"grid_rates", io::mat_json(c.grid_rates)}};
}

}  // namespace lpv_smpc::bnn

#endif  // LPV_SMPC_BNN_CALIBRATE_HPP
