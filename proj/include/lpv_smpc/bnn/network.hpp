#ifndef LPV_SMPC_BNN_NETWORK_HPP
#define LPV_SMPC_BNN_NETWORK_HPP

#include <cmath>
#include <string>
#include <vector>

#include "lpv_smpc/io/json.hpp"
#include "lpv_smpc/rng.hpp"

namespace lpv_smpc::bnn {

enum class Activation { None, Elu, Tanh };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::None: return "none";
    case Activation::Elu: return "elu";
    case Activation::Tanh: return "tanh";
  }
  return "none";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "none" || s == "linear") return Activation::None;
  if (s == "elu") return Activation::Elu;
  if (s == "tanh") return Activation::Tanh;
  throw ValidationError("unknown activation '" + s + "'");
}

inline void apply_activation(Activation a, const Mat& z, Mat& h) {
  switch (a) {
    case Activation::None: h = z; break;
    case Activation::Elu: h = (z.array() > 0.0).select(z.array(), z.array().min(0.0).exp() - 1.0).matrix(); break;
    case Activation::Tanh: h = z.array().tanh().matrix(); break;
  }
}

/// dL/dz given dL/dh, the pre-activation z and the activation output h.
inline Mat activation_backward(Activation a, const Mat& z, const Mat& h, const Mat& gh) {
  switch (a) {
    case Activation::None: return gh;
    case Activation::Elu: return (gh.array() * (z.array() > 0.0).select(1.0, h.array() + 1.0)).matrix();
    case Activation::Tanh: return (gh.array() * (1.0 - h.array().square())).matrix();
  }
  return gh;
}

inline double softplus(double r) { return r > 30.0 ? r : std::log1p(std::exp(r)); }
inline double softplus_inverse(double s) { return s > 30.0 ? s : std::log(std::expm1(s)); }
inline double sigmoid(double r) { return 1.0 / (1.0 + std::exp(-r)); }

/**
 * Dense layer z = W h + b. A variational layer stores the mean (W, b) and the
 * pre-softplus spread (rho_W, rho_b) of a factorized Gaussian over its weights.
 */
struct Layer {
  int in = 0;
  int out = 0;
  bool bias = true;
  Activation activation = Activation::None;
  bool variational = false;
  Mat W;      // out x in
  Mat b;      // out x 1 (empty when no bias)
  Mat rho_W;  // variational only
  Mat rho_b;

  Layer() = default;
  Layer(int in_, int out_, bool bias_, Activation act, bool variational_)
      : in(in_), out(out_), bias(bias_), activation(act), variational(variational_) {
    require(in > 0 && out > 0, "Layer: sizes must be positive");
    W = Mat::Zero(out, in);
    b = bias ? Mat::Zero(out, 1) : Mat(0, 1);
    if (variational) {
      rho_W = Mat::Zero(out, in);
      rho_b = Mat::Zero(b.rows(), 1);
    }
  }

  /// Glorot-uniform kernel, zero bias.
  void init_glorot(Rng& rng) {
    const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Eigen::Index j = 0; j < W.cols(); ++j)
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-lim, lim);
    b.setZero();
  }

  void set_sigma(double sigma) {
    if (!variational) return;
    rho_W.setConstant(softplus_inverse(sigma));
    rho_b.setConstant(softplus_inverse(sigma));
  }

  Mat sigma_W() const { return rho_W.unaryExpr([](double r) { return softplus(r); }); }
  Mat sigma_b() const { return rho_b.unaryExpr([](double r) { return softplus(r); }); }

  Eigen::Index num_weights() const { return W.size() + b.size(); }
};

enum class NetInput { Theta, Constant };

/// Concrete weights for one forward pass.
struct LayerWeights {
  Mat W;
  Mat b;
};

/// Standard-normal noise for the variational layers of one network (empty for deterministic layers).
struct NetNoise {
  std::vector<Mat> eps_W;
  std::vector<Mat> eps_b;
};

struct Network {
  NetInput input = NetInput::Theta;
  int input_dim = 0;  // theta dimension (ignored for Constant input, which feeds a single 1)
  std::vector<Layer> layers;

  int in_size() const { return input == NetInput::Constant ? 1 : input_dim; }
  int out_size() const { return layers.empty() ? in_size() : layers.back().out; }

  void validate() const {
    require(!layers.empty(), "Network: no layers");
    int prev = in_size();
    for (const auto& l : layers) {
      require(l.in == prev, "Network: layer sizes do not chain");
      prev = l.out;
    }
  }

  bool has_variational() const {
    for (const auto& l : layers)
      if (l.variational) return true;
    return false;
  }

  Mat input_batch(const Mat& theta_cols) const {
    if (input == NetInput::Constant) return Mat::Ones(1, theta_cols.cols());
    require(theta_cols.rows() == input_dim, "Network: input dimension mismatch");
    return theta_cols;
  }

  NetNoise draw_noise(Rng& rng) const {
    NetNoise n;
    for (const auto& l : layers) {
      if (l.variational) {
        n.eps_W.push_back(rng.normal_mat(l.W.rows(), l.W.cols()));
        n.eps_b.push_back(rng.normal_mat(l.b.rows(), 1));
      } else {
        n.eps_W.emplace_back();
        n.eps_b.emplace_back();
      }
    }
    return n;
  }

  NetNoise zero_noise() const {
    NetNoise n;
    for (const auto& l : layers) {
      n.eps_W.push_back(l.variational ? Mat(Mat::Zero(l.W.rows(), l.W.cols())) : Mat());
      n.eps_b.push_back(l.variational ? Mat(Mat::Zero(l.b.rows(), 1)) : Mat());
    }
    return n;
  }

  /// w = mu + softplus(rho) * eps for variational layers, the point weights otherwise.
  std::vector<LayerWeights> concrete(const NetNoise& noise) const {
    std::vector<LayerWeights> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.variational) {
        out.push_back({l.W + l.sigma_W().cwiseProduct(noise.eps_W[i]), l.b + l.sigma_b().cwiseProduct(noise.eps_b[i])});
      } else {
        out.push_back({l.W, l.b});
      }
    }
    return out;
  }
};

/// Forward pass record for backpropagation.
struct ForwardCache {
  std::vector<Mat> inputs;  // h_{l-1}
  std::vector<Mat> pre;     // z_l
  std::vector<Mat> post;    // h_l
};

inline Mat forward(const Network& net, const std::vector<LayerWeights>& w, const Mat& input, ForwardCache* cache = nullptr) {
  Mat h = input;
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->post.clear();
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    Mat z = w[i].W * h;
    if (l.bias) z.colwise() += w[i].b.col(0);
    Mat hn;
    apply_activation(l.activation, z, hn);
    if (cache) {
      cache->inputs.push_back(std::move(h));
      cache->pre.push_back(std::move(z));
      cache->post.push_back(hn);
    }
    h = std::move(hn);
  }
  return h;
}

/// Gradients w.r.t. the concrete weights of each layer.
struct WeightGrads {
  std::vector<Mat> dW;
  std::vector<Mat> db;
};

inline WeightGrads backward(const Network& net, const std::vector<LayerWeights>& w, const ForwardCache& cache, Mat g_out) {
  const auto L = net.layers.size();
  WeightGrads g;
  g.dW.resize(L);
  g.db.resize(L);
  Mat gh = std::move(g_out);
  for (std::size_t k = L; k-- > 0;) {
    const auto& l = net.layers[k];
    const Mat gz = activation_backward(l.activation, cache.pre[k], cache.post[k], gh);
    g.dW[k].noalias() = gz * cache.inputs[k].transpose();
    g.db[k] = l.bias ? Mat(gz.rowwise().sum()) : Mat(0, 1);
    if (k > 0) gh.noalias() = w[k].W.transpose() * gz;
  }
  return g;
}

/// Adam with Keras defaults (beta1 0.9, beta2 0.999, eps 1e-7).
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

  void step(const std::vector<Mat*>& params, const std::vector<const Mat*>& grads) {
    require(params.size() == grads.size(), "Adam: params/grads mismatch");
    if (m_.empty()) {
      for (auto* p : params) {
        m_.push_back(Mat::Zero(p->rows(), p->cols()));
        v_.push_back(Mat::Zero(p->rows(), p->cols()));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    const double lr_t = lr_ * std::sqrt(c2) / c1;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->size() == 0) continue;
      m_[i] = b1_ * m_[i] + (1.0 - b1_) * *grads[i];
      v_[i] = b2_ * v_[i] + (1.0 - b2_) * grads[i]->cwiseAbs2();
      params[i]->array() -= lr_t * m_[i].array() / (v_[i].array().sqrt() + eps_);
    }
  }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::vector<Mat> m_, v_;
};

inline io::Json layer_json(const Layer& l) {
  io::Json j{{"in", l.in},         {"out", l.out}, {"bias", l.bias}, {"activation", to_string(l.activation)},
             {"variational", l.variational}, {"W", io::mat_json(l.W)}, {"b", io::mat_json(l.b)}};
  if (l.variational) {
    j["rho_W"] = io::mat_json(l.rho_W);
    j["rho_b"] = io::mat_json(l.rho_b);
  }
  return j;
}

inline Layer json_layer(const io::Json& j) {
  Layer l(j.at("in").get<int>(), j.at("out").get<int>(), j.at("bias").get<bool>(),
          activation_from_string(j.at("activation").get<std::string>()), j.at("variational").get<bool>());
  l.W = io::json_mat(j.at("W"));
  l.b = io::json_mat(j.at("b"));
  if (l.variational) {
    l.rho_W = io::json_mat(j.at("rho_W"));
    l.rho_b = io::json_mat(j.at("rho_b"));
  }
  require(l.W.rows() == l.out && l.W.cols() == l.in, "layer JSON: weight shape mismatch");
  return l;
}

inline io::Json network_json(const Network& n) {
  io::Json layers = io::Json::array();
  for (const auto& l : n.layers) layers.push_back(layer_json(l));
  return {{"input", n.input == NetInput::Constant ? "constant" : "theta"}, {"input_dim", n.input_dim}, {"layers", layers}};
}

inline Network json_network(const io::Json& j) {
  Network n;
  n.input = j.at("input").get<std::string>() == "constant" ? NetInput::Constant : NetInput::Theta;
  n.input_dim = j.at("input_dim").get<int>();
  for (const auto& lj : j.at("layers")) n.layers.push_back(json_layer(lj));
  n.validate();
  return n;
}

}  // namespace lpv_smpc::bnn

#endif  // LPV_SMPC_BNN_NETWORK_HPP
