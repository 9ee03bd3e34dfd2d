#ifndef LPV_SMPC_TERMINAL_TRANSFORM_HPP
#define LPV_SMPC_TERMINAL_TRANSFORM_HPP

#include <vector>

#include "lpv_smpc/bnn/train.hpp"
#include "lpv_smpc/terminal/affine.hpp"

namespace lpv_smpc::terminal {

/// theta -> thetahat on the q-simplex: tanh hidden layers and a softmax output.
struct TransformNet {
  bnn::Network net;
  int q = 1;

  /// Simplex weights, one column per theta column.
  Mat operator()(const Mat& theta_cols) const { return softmax(bnn::forward(net, weights(), theta_cols)); }
  Vec operator()(const Vec& theta) const { return (*this)(Mat(theta)).col(0); }

  std::vector<bnn::LayerWeights> weights() const { return net.concrete(net.zero_noise()); }

  static Mat softmax(const Mat& z) {
    Mat s = (z.rowwise() - z.colwise().maxCoeff()).array().exp().matrix();
    return s.array().rowwise() / s.colwise().sum().array();
  }
};

inline TransformNet make_transform_net(int n_theta, int q, int hidden = 32, int layers = 2) {
  require(n_theta >= 1 && q >= 1 && hidden >= 1 && layers >= 1, "make_transform_net: sizes must be positive");
  TransformNet t;
  t.q = q;
  t.net.input = bnn::NetInput::Theta;
  t.net.input_dim = n_theta;
  int prev = n_theta;
  for (int l = 0; l < layers; ++l) {
    t.net.layers.emplace_back(prev, hidden, true, bnn::Activation::Tanh, false);
    prev = hidden;
  }
  t.net.layers.emplace_back(prev, q, true, bnn::Activation::None, false);
  t.net.validate();
  return t;
}

struct TransformConfig {
  int epochs = 5000;
  double lr = 1e-3;
  int hidden = 32;
  int layers = 2;
  double divergence_factor = 10.0;
  std::uint64_t seed = 1;
};

struct TransformReport {
  double train_mse = 0.0;
  double test_mse = 0.0;
  std::vector<double> loss;
};

namespace detail {

/// Per-vertex one-step predictions A_i x + B_i u, one matrix (n_x x N) per vertex.
inline std::vector<Mat> vertex_predictions(const AffineLpvModel& m, const bnn::Batch& b) {
  std::vector<Mat> y;
  for (const auto& [A, B] : m.vertices) y.push_back(A * b.x + B * b.u);
  return y;
}

inline Mat mix(const std::vector<Mat>& y, const Mat& s) {
  Mat xh = Mat::Zero(y.front().rows(), y.front().cols());
  for (std::size_t i = 0; i < y.size(); ++i) xh += y[i] * s.row(static_cast<Eigen::Index>(i)).asDiagonal();
  return xh;
}

}  // namespace detail

/// Mean over records of the squared one-step error norm of the mixed vertex model.
inline double transform_mse(const TransformNet& t, const AffineLpvModel& m, const bnn::Batch& b) {
  require(b.size() > 0, "transform_mse: empty batch");
  const Mat xh = detail::mix(detail::vertex_predictions(m, b), t(b.theta));
  return (b.xnext - xh).squaredNorm() / static_cast<double>(b.size());
}

/// MSE of a fixed weight vector (e.g. a single vertex).
inline double fixed_weight_mse(const AffineLpvModel& m, const Vec& weights, const bnn::Batch& b) {
  const auto [A, B] = m.at(weights);
  return (b.xnext - A * b.x - B * b.u).squaredNorm() / static_cast<double>(b.size());
}

/// Full-batch Adam on the one-step MSE of the vertex mixture.
inline TransformNet train_transform_net(const AffineLpvModel& m, const bnn::Batch& train, const bnn::Batch& test,
                                        const TransformConfig& cfg, TransformReport* report = nullptr) {
  m.validate();
  require(train.size() > 0, "train_transform_net: empty training set");
  require(train.x.rows() == m.n_x() && train.u.rows() == m.n_u(), "train_transform_net: dataset does not match the model");
  TransformNet t = make_transform_net(static_cast<int>(train.theta.rows()), m.q(), cfg.hidden, cfg.layers);
  Rng init = Rng(cfg.seed).split("transform.init");
  for (auto& l : t.net.layers) l.init_glorot(init);
  const auto y = detail::vertex_predictions(m, train);
  const double n = static_cast<double>(train.size());
  bnn::Adam opt(cfg.lr);
  TransformReport rep;
  double start = 0.0;
  for (int e = 0; e < cfg.epochs; ++e) {
    const auto w = t.weights();
    bnn::ForwardCache cache;
    const Mat z = bnn::forward(t.net, w, train.theta, &cache);
    const Mat s = TransformNet::softmax(z);
    const Mat r = detail::mix(y, s) - train.xnext;
    const double loss = r.squaredNorm() / n;
    if (e == 0) start = loss;
    bnn::detail::check_divergence("transform training", e, start, loss, cfg.divergence_factor);
    rep.loss.push_back(loss);
    Mat gs(m.q(), train.size());
    for (int i = 0; i < m.q(); ++i) gs.row(i) = (2.0 / n) * r.cwiseProduct(y[static_cast<std::size_t>(i)]).colwise().sum();
    const Mat gz = s.cwiseProduct(gs.rowwise() - s.cwiseProduct(gs).colwise().sum());
    const auto g = bnn::backward(t.net, w, cache, gz);
    std::vector<Mat*> p;
    std::vector<const Mat*> d;
    for (std::size_t k = 0; k < t.net.layers.size(); ++k) {
      p.push_back(&t.net.layers[k].W);
      d.push_back(&g.dW[k]);
      p.push_back(&t.net.layers[k].b);
      d.push_back(&g.db[k]);
    }
    opt.step(p, d);
  }
  rep.train_mse = transform_mse(t, m, train);
  rep.test_mse = test.size() > 0 ? transform_mse(t, m, test) : kInf;
  if (report) *report = std::move(rep);
  return t;
}

inline io::Json transform_json(const TransformNet& t) { return {{"q", t.q}, {"network", bnn::network_json(t.net)}}; }

inline TransformNet json_transform(const io::Json& j) {
  try {
    TransformNet t;
    t.q = j.at("q").get<int>();
    t.net = bnn::json_network(j.at("network"));
    t.net.validate();
    require(t.net.out_size() == t.q, "transform JSON: output size does not match q");
    return t;
  } catch (const io::Json::exception& e) {
    throw ValidationError(std::string("transform JSON: ") + e.what());
  }
}

}  // namespace lpv_smpc::terminal

#endif  // LPV_SMPC_TERMINAL_TRANSFORM_HPP
