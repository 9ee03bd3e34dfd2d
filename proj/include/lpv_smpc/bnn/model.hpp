#ifndef LPV_SMPC_BNN_MODEL_HPP
#define LPV_SMPC_BNN_MODEL_HPP

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "lpv_smpc/bnn/network.hpp"
#include "lpv_smpc/lpv/data.hpp"
#include "lpv_smpc/lpv/system.hpp"

namespace lpv_smpc::bnn {

/// rho * N(0, sigma1^2) + (1 - rho) * N(0, sigma2^2).
struct MixturePrior {
  double rho = 0.5;
  double sigma1 = 0.3;
  double sigma2 = 0.1;

  void validate() const {
    require(rho >= 0.0 && rho <= 1.0, "MixturePrior: rho must lie in [0, 1]");
    require(sigma1 > 0.0 && sigma2 > 0.0, "MixturePrior: sigmas must be positive");
  }
};

namespace detail {
inline double log_normal(double w, double s) {
  return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(s) - 0.5 * (w / s) * (w / s);
}
}  // namespace detail

inline double prior_log_density(const MixturePrior& p, double w) {
  require(p.sigma1 > 0.0 && p.sigma2 > 0.0, "prior_log_density: sigmas must be positive");
  if (p.rho >= 1.0) return detail::log_normal(w, p.sigma1);
  if (p.rho <= 0.0) return detail::log_normal(w, p.sigma2);
  const double a = std::log(p.rho) + detail::log_normal(w, p.sigma1);
  const double b = std::log1p(-p.rho) + detail::log_normal(w, p.sigma2);
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// d/dw log p(w) = -w * sum_k r_k / sigma_k^2 with r_k the mixture responsibilities.
inline double prior_log_density_grad(const MixturePrior& p, double w) {
  if (p.rho >= 1.0) return -w / (p.sigma1 * p.sigma1);
  if (p.rho <= 0.0) return -w / (p.sigma2 * p.sigma2);
  const double a = std::log(p.rho) + detail::log_normal(w, p.sigma1);
  const double b = std::log1p(-p.rho) + detail::log_normal(w, p.sigma2);
  const double m = std::max(a, b);
  const double ea = std::exp(a - m), eb = std::exp(b - m);
  const double r1 = ea / (ea + eb);
  return -w * (r1 / (p.sigma1 * p.sigma1) + (1.0 - r1) / (p.sigma2 * p.sigma2));
}

/// Reparameterized weights w = mu + sigma * noise.
inline Mat sample_weights(const Mat& mu, const Mat& sigma, const Mat& noise) {
  require(mu.rows() == noise.rows() && mu.cols() == noise.cols() && sigma.rows() == mu.rows() && sigma.cols() == mu.cols(),
          "sample_weights: noise must be shaped like the mean");
  return mu + sigma.cwiseProduct(noise);
}

/// Noise for both networks of one weight draw.
struct ModelNoise {
  NetNoise a;
  NetNoise b;
};

/// Concrete weights of both networks.
struct ModelWeights {
  std::vector<LayerWeights> a;
  std::vector<LayerWeights> b;
};

/**
 * theta -> vec(A) and theta -> vec(B) networks; the next state is A(theta) x + B(theta) u.
 * Output rows are row-major vectorizations: row i*n_x + j holds A(i, j).
 */
struct BnnLpvModel {
  int n_x = 0;
  int n_u = 0;
  int n_theta = 0;
  std::string architecture;
  Network net_a;
  Network net_b;
  MixturePrior prior;
  double sigma_lik = 0.01;
  std::uint64_t seed = 0;

  void validate() const {
    require(n_x > 0 && n_u > 0 && n_theta > 0, "BnnLpvModel: dimensions must be positive");
    net_a.validate();
    net_b.validate();
    require(net_a.out_size() == n_x * n_x, "BnnLpvModel: A network must output n_x^2 values");
    require(net_b.out_size() == n_x * n_u, "BnnLpvModel: B network must output n_x*n_u values");
    require(net_a.input == NetInput::Constant || net_a.input_dim == n_theta, "BnnLpvModel: A network input size");
    require(net_b.input == NetInput::Constant || net_b.input_dim == n_theta, "BnnLpvModel: B network input size");
    require(sigma_lik > 0.0, "BnnLpvModel: sigma_lik must be positive");
    prior.validate();
  }

  ModelNoise draw_noise(Rng& rng) const { return {net_a.draw_noise(rng), net_b.draw_noise(rng)}; }
  ModelNoise zero_noise() const { return {net_a.zero_noise(), net_b.zero_noise()}; }
  ModelWeights concrete(const ModelNoise& n) const { return {net_a.concrete(n.a), net_b.concrete(n.b)}; }

  std::vector<Layer*> all_layers() {
    std::vector<Layer*> out;
    for (auto& l : net_a.layers) out.push_back(&l);
    for (auto& l : net_b.layers) out.push_back(&l);
    return out;
  }

  void set_sigma(double s) {
    for (auto* l : all_layers()) l->set_sigma(s);
  }
};

/// Column-batched records: theta (n_theta x N), x (n_x x N), u (n_u x N).
struct Batch {
  Mat theta;
  Mat x;
  Mat u;
  Mat xnext;

  Eigen::Index size() const { return x.cols(); }

  static Batch from_dataset(const lpv::Dataset& d, const std::vector<int>& rows) {
    Batch b;
    b.theta = lpv::Dataset::rows_of(d.theta, rows).transpose();
    b.x = lpv::Dataset::rows_of(d.x, rows).transpose();
    b.u = lpv::Dataset::rows_of(d.u, rows).transpose();
    b.xnext = lpv::Dataset::rows_of(d.xnext, rows).transpose();
    return b;
  }
  static Batch train(const lpv::Dataset& d) { return from_dataset(d, d.train); }
  static Batch test(const lpv::Dataset& d) { return from_dataset(d, d.test); }
};

namespace detail {
/// x+_i[n] = sum_j outA(i*nx+j, n) x_j[n] + sum_j outB(i*nu+j, n) u_j[n].
inline Mat bilinear(const Mat& out_a, const Mat& out_b, const Mat& x, const Mat& u) {
  const Eigen::Index nx = x.rows(), nu = u.rows(), N = x.cols();
  Mat y = Mat::Zero(nx, N);
  for (Eigen::Index i = 0; i < nx; ++i) {
    for (Eigen::Index j = 0; j < nx; ++j) y.row(i).array() += out_a.row(i * nx + j).array() * x.row(j).array();
    for (Eigen::Index j = 0; j < nu; ++j) y.row(i).array() += out_b.row(i * nu + j).array() * u.row(j).array();
  }
  return y;
}
}  // namespace detail

/// One-step predictions (n_x x N) of one concrete weight draw.
inline Mat predict_batch(const BnnLpvModel& m, const ModelWeights& w, const Mat& theta, const Mat& x, const Mat& u) {
  const Mat oa = forward(m.net_a, w.a, m.net_a.input_batch(theta));
  const Mat ob = forward(m.net_b, w.b, m.net_b.input_batch(theta));
  return detail::bilinear(oa, ob, x, u);
}

/// (A, B) of one concrete weight draw at one scheduling point.
inline std::pair<Mat, Mat> matrices_at(const BnnLpvModel& m, const ModelWeights& w, const Vec& theta) {
  const Mat th = theta;
  const Mat oa = forward(m.net_a, w.a, m.net_a.input_batch(th));
  const Mat ob = forward(m.net_b, w.b, m.net_b.input_batch(th));
  return {unvec_rowmajor(oa.col(0), m.n_x, m.n_x), unvec_rowmajor(ob.col(0), m.n_x, m.n_u)};
}

/// Frozen weight draw as a deterministic matrix function.
inline lpv::MatrixFunction as_matrix_function(const BnnLpvModel& m, const ModelWeights& w) {
  return lpv::MatrixFunction(m.n_x, m.n_u, m.n_theta, [m, w](const Vec& th) { return matrices_at(m, w, th); });
}

/// One weight draw from the variational posterior, frozen into a matrix function.
inline lpv::MatrixFunction sample_model(const BnnLpvModel& m, std::uint64_t seed) {
  Rng rng = Rng(seed).split("bnn.sample_model");
  return as_matrix_function(m, m.concrete(m.draw_noise(rng)));
}

/// Posterior-mean weights (noise zero).
inline lpv::MatrixFunction mean_model(const BnnLpvModel& m) { return as_matrix_function(m, m.concrete(m.zero_noise())); }

struct PosteriorPrediction {
  Mat mean;  // n_x x N
  Mat std;   // n_x x N, sample standard deviation
  int samples_used = 0;
};

/// Monte Carlo mean and standard deviation of the one-step prediction over weight draws.
inline PosteriorPrediction predict_posterior(const BnnLpvModel& m, const Mat& theta, const Mat& x, const Mat& u, int n_samples,
                                             std::uint64_t seed) {
  require(n_samples >= 2, "predict_posterior: need at least two samples");
  require(theta.cols() == x.cols() && x.cols() == u.cols(), "predict_posterior: batch sizes differ");
  require(x.rows() == m.n_x && u.rows() == m.n_u && theta.rows() == m.n_theta, "predict_posterior: dimension mismatch");
  Rng rng = Rng(seed).split("bnn.posterior");
  Mat mean = Mat::Zero(m.n_x, x.cols());
  Mat m2 = Mat::Zero(m.n_x, x.cols());
  for (int s = 0; s < n_samples; ++s) {
    const Mat y = predict_batch(m, m.concrete(m.draw_noise(rng)), theta, x, u);
    const Mat d = y - mean;
    mean += d / static_cast<double>(s + 1);
    m2.array() += d.array() * (y - mean).array();
  }
  return {mean, (m2 / static_cast<double>(n_samples - 1)).cwiseSqrt(), n_samples};
}

inline PosteriorPrediction predict_posterior(const BnnLpvModel& m, const Vec& theta, const Vec& x, const Vec& u, int n_samples,
                                             std::uint64_t seed) {
  return predict_posterior(m, Mat(theta), Mat(x), Mat(u), n_samples, seed);
}

/// Default architectures for the two benchmarks.
inline BnnLpvModel make_model(const std::string& architecture, int n_x, int n_u, int n_theta) {
  BnnLpvModel m;
  m.n_x = n_x;
  m.n_u = n_u;
  m.n_theta = n_theta;
  m.architecture = architecture;
  if (architecture == "affine") {
    // Variational linear map theta -> vec(A); constant-input dense layer for B.
    m.net_a.input = NetInput::Theta;
    m.net_a.input_dim = n_theta;
    m.net_a.layers.emplace_back(n_theta, n_x * n_x, true, Activation::None, true);
    m.net_b.input = NetInput::Constant;
    m.net_b.input_dim = n_theta;
    m.net_b.layers.emplace_back(1, n_x * n_u, false, Activation::None, false);
  } else if (architecture == "deep_elu") {
    for (auto* net : {&m.net_a, &m.net_b}) {
      const int out = net == &m.net_a ? n_x * n_x : n_x * n_u;
      net->input = NetInput::Theta;
      net->input_dim = n_theta;
      net->layers.emplace_back(n_theta, 32, true, Activation::Elu, true);
      net->layers.emplace_back(32, 32, true, Activation::Elu, false);
      net->layers.emplace_back(32, 32, true, Activation::Elu, false);
      net->layers.emplace_back(32, out, true, Activation::None, false);
    }
  } else {
    throw ValidationError("unknown BNN architecture '" + architecture + "' (expected affine or deep_elu)");
  }
  m.validate();
  return m;
}

inline void init_weights(BnnLpvModel& m, Rng& rng) {
  for (auto* l : m.all_layers()) l->init_glorot(rng);
}

inline io::Json model_json(const BnnLpvModel& m) {
  return {{"n_x", m.n_x},
          {"n_u", m.n_u},
          {"n_theta", m.n_theta},
          {"architecture", m.architecture},
          {"prior", {{"rho", m.prior.rho}, {"sigma1", m.prior.sigma1}, {"sigma2", m.prior.sigma2}}},
          {"sigma_lik", m.sigma_lik},
          {"seed", m.seed},
          {"net_a", network_json(m.net_a)},
          {"net_b", network_json(m.net_b)}};
}

inline BnnLpvModel json_model(const io::Json& j) {
  try {
    BnnLpvModel m;
    m.n_x = j.at("n_x").get<int>();
    m.n_u = j.at("n_u").get<int>();
    m.n_theta = j.at("n_theta").get<int>();
    m.architecture = j.at("architecture").get<std::string>();
    m.prior.rho = j.at("prior").at("rho").get<double>();
    m.prior.sigma1 = j.at("prior").at("sigma1").get<double>();
    m.prior.sigma2 = j.at("prior").at("sigma2").get<double>();
    m.sigma_lik = j.at("sigma_lik").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.net_a = json_network(j.at("net_a"));
    m.net_b = json_network(j.at("net_b"));
    m.validate();
    return m;
  } catch (const io::Json::exception& e) {
    throw ValidationError(std::string("BNN model JSON: ") + e.what());
  }
}

}  // namespace lpv_smpc::bnn

#endif  // LPV_SMPC_BNN_MODEL_HPP
