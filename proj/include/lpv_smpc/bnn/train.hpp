#ifndef LPV_SMPC_BNN_TRAIN_HPP
#define LPV_SMPC_BNN_TRAIN_HPP

#include <cmath>
#include <sstream>
#include <vector>

#include "lpv_smpc/bnn/model.hpp"

namespace lpv_smpc::bnn {

/// Per-layer gradients in the order of BnnLpvModel::all_layers(); rho entries are empty for point layers.
struct ModelGrads {
  std::vector<Mat> dW, db, drho_W, drho_b;

  static ModelGrads zeros_like(BnnLpvModel& m) {
    ModelGrads g;
    for (auto* l : m.all_layers()) {
      g.dW.push_back(Mat::Zero(l->W.rows(), l->W.cols()));
      g.db.push_back(Mat::Zero(l->b.rows(), 1));
      g.drho_W.push_back(l->variational ? Mat(Mat::Zero(l->W.rows(), l->W.cols())) : Mat());
      g.drho_b.push_back(l->variational ? Mat(Mat::Zero(l->b.rows(), 1)) : Mat());
    }
    return g;
  }
};

struct ElboTerms {
  double loss = 0.0;
  double log_q = 0.0;
  double log_prior = 0.0;
  double log_lik = 0.0;
};

namespace detail {

/// dL/d(network outputs) from dL/dy for y = bilinear(outA, outB, x, u).
inline void bilinear_backward(const Mat& gy, const Mat& x, const Mat& u, Mat& g_a, Mat& g_b) {
  const Eigen::Index nx = x.rows(), nu = u.rows(), N = x.cols();
  g_a.resize(nx * nx, N);
  g_b.resize(nx * nu, N);
  for (Eigen::Index i = 0; i < nx; ++i) {
    for (Eigen::Index j = 0; j < nx; ++j) g_a.row(i * nx + j) = gy.row(i).cwiseProduct(x.row(j));
    for (Eigen::Index j = 0; j < nu; ++j) g_b.row(i * nu + j) = gy.row(i).cwiseProduct(u.row(j));
  }
}

/// Forward both networks on a batch; fills caches and returns the predictions.
inline Mat forward_model(const BnnLpvModel& m, const ModelWeights& w, const Batch& batch, ForwardCache& ca, ForwardCache& cb) {
  const Mat oa = forward(m.net_a, w.a, m.net_a.input_batch(batch.theta), &ca);
  const Mat ob = forward(m.net_b, w.b, m.net_b.input_batch(batch.theta), &cb);
  return bilinear(oa, ob, batch.x, batch.u);
}

}  // namespace detail

/**
 * Monte Carlo ELBO estimate with the given noise draws:
 * mean over draws of kl_scale * (log q(w) - log p(w)) - log p(D | w).
 * Point layers contribute only through the likelihood.
 */
inline ElboTerms elbo_loss(BnnLpvModel& m, const Batch& batch, const std::vector<ModelNoise>& noises, ModelGrads* grad,
                           double kl_scale = 1.0) {
  require(!noises.empty(), "elbo_loss: need at least one Monte Carlo draw");
  const double inv_n = 1.0 / static_cast<double>(noises.size());
  const double s2 = m.sigma_lik * m.sigma_lik;
  const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi) - std::log(m.sigma_lik);
  auto layers = m.all_layers();
  const std::size_t la = m.net_a.layers.size();
  if (grad) *grad = ModelGrads::zeros_like(m);
  ElboTerms t;
  ForwardCache ca, cb;
  for (const auto& noise : noises) {
    const ModelWeights w = m.concrete(noise);
    const Mat y = detail::forward_model(m, w, batch, ca, cb);
    const Mat r = y - batch.xnext;
    const double ll = static_cast<double>(r.size()) * log_norm - 0.5 * r.squaredNorm() / s2;
    t.log_lik += inv_n * ll;

    WeightGrads ga, gb;
    if (grad) {
      Mat g_a, g_b;
      detail::bilinear_backward(r / s2, batch.x, batch.u, g_a, g_b);
      ga = backward(m.net_a, w.a, ca, std::move(g_a));
      gb = backward(m.net_b, w.b, cb, std::move(g_b));
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const Layer& l = *layers[k];
      const bool in_a = k < la;
      const std::size_t kk = in_a ? k : k - la;
      const LayerWeights& lw = in_a ? w.a[kk] : w.b[kk];
      const NetNoise& nz = in_a ? noise.a : noise.b;
      const WeightGrads& gl = in_a ? ga : gb;
      if (!l.variational) {
        if (grad) {
          grad->dW[k] += inv_n * gl.dW[kk];
          if (l.bias) grad->db[k] += inv_n * gl.db[kk];
        }
        continue;
      }
      auto handle = [&](const Mat& wv, const Mat& rho, const Mat& eps, const Mat* g_lik, Mat* d_mu, Mat* d_rho) {
        double lq = 0.0, lp = 0.0;
        for (Eigen::Index i = 0; i < wv.size(); ++i) {
          const double sig = softplus(rho(i));
          lq += -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sig) - 0.5 * eps(i) * eps(i);
          lp += prior_log_density(m.prior, wv(i));
          if (grad) {
            // eps fixed: log q depends on sigma only, d/dsigma = -1/sigma.
            const double gw = (*g_lik)(i)-kl_scale * prior_log_density_grad(m.prior, wv(i));
            (*d_mu)(i) += inv_n * gw;
            (*d_rho)(i) += inv_n * (gw * eps(i) - kl_scale / sig) * sigmoid(rho(i));
          }
        }
        t.log_q += inv_n * lq;
        t.log_prior += inv_n * lp;
      };
      handle(lw.W, l.rho_W, nz.eps_W[kk], grad ? &gl.dW[kk] : nullptr, grad ? &grad->dW[k] : nullptr,
             grad ? &grad->drho_W[k] : nullptr);
      if (l.bias)
        handle(lw.b, l.rho_b, nz.eps_b[kk], grad ? &gl.db[kk] : nullptr, grad ? &grad->db[k] : nullptr,
               grad ? &grad->drho_b[k] : nullptr);
    }
  }
  t.loss = kl_scale * (t.log_q - t.log_prior) - t.log_lik;
  return t;
}

inline ElboTerms elbo_loss(BnnLpvModel& m, const Batch& batch, int n_mc, Rng& rng, ModelGrads* grad, double kl_scale = 1.0) {
  require(n_mc >= 1, "elbo_loss: n_mc must be at least 1");
  std::vector<ModelNoise> noises;
  for (int i = 0; i < n_mc; ++i) noises.push_back(m.draw_noise(rng));
  return elbo_loss(m, batch, noises, grad, kl_scale);
}

/// Mean squared one-step error of the point network (variational layers at their means).
inline double mse_loss(BnnLpvModel& m, const Batch& batch, ModelGrads* grad) {
  const ModelWeights w = m.concrete(m.zero_noise());
  ForwardCache ca, cb;
  const Mat r = detail::forward_model(m, w, batch, ca, cb) - batch.xnext;
  const double scale = 1.0 / static_cast<double>(r.size());
  if (grad) {
    *grad = ModelGrads::zeros_like(m);
    Mat g_a, g_b;
    detail::bilinear_backward(2.0 * scale * r, batch.x, batch.u, g_a, g_b);
    const WeightGrads ga = backward(m.net_a, w.a, ca, std::move(g_a));
    const WeightGrads gb = backward(m.net_b, w.b, cb, std::move(g_b));
    const std::size_t la = m.net_a.layers.size();
    for (std::size_t k = 0; k < grad->dW.size(); ++k) {
      const WeightGrads& g = k < la ? ga : gb;
      const std::size_t kk = k < la ? k : k - la;
      grad->dW[k] = g.dW[kk];
      grad->db[k] = g.db[kk];
    }
  }
  return scale * r.squaredNorm();
}

struct TrainConfig {
  int pretrain_epochs = 1000;
  double pretrain_lr = 0.01;
  int epochs = 1000;
  double lr = 0.01;
  int n_mc = 5;
  double sigma_init = 0.02;
  double kl_scale = 1.0;  // full batch
  double divergence_factor = 10.0;
  std::uint64_t seed = 0;

  void validate() const {
    require(pretrain_epochs >= 0 && epochs >= 0, "TrainConfig: epochs must be non-negative");
    require(pretrain_lr > 0.0 && lr > 0.0, "TrainConfig: learning rates must be positive");
    require(n_mc >= 1, "TrainConfig: n_mc must be at least 1");
    require(sigma_init > 0.0, "TrainConfig: sigma_init must be positive");
    require(divergence_factor > 1.0, "TrainConfig: divergence_factor must exceed 1");
  }
};

struct TrainHistory {
  std::vector<double> pretrain_loss;
  std::vector<double> elbo_loss;
};

namespace detail {

/// Loss rose by the divergence factor relative to its starting magnitude, or stopped being finite.
inline void check_divergence(const char* phase, int epoch, double start, double loss, double factor) {
  if (!std::isfinite(loss) || loss > start + (factor - 1.0) * std::abs(start)) {
    std::ostringstream os;
    os << "training diverged in " << phase << " at epoch " << epoch << ": loss " << loss << " (start " << start << ")";
    throw NumericalError(os.str());
  }
}

inline void adam_step(Adam& opt, BnnLpvModel& m, const ModelGrads& g, bool with_rho) {
  std::vector<Mat*> p;
  std::vector<const Mat*> d;
  auto layers = m.all_layers();
  for (std::size_t k = 0; k < layers.size(); ++k) {
    p.push_back(&layers[k]->W);
    d.push_back(&g.dW[k]);
    p.push_back(&layers[k]->b);
    d.push_back(&g.db[k]);
    if (with_rho) {
      p.push_back(&layers[k]->rho_W);
      d.push_back(&g.drho_W[k]);
      p.push_back(&layers[k]->rho_b);
      d.push_back(&g.drho_b[k]);
    }
  }
  opt.step(p, d);
}

}  // namespace detail

/**
 * Pretrain the point network by MSE, then start the variational means there with a small
 * uniform spread and minimize the ELBO with Adam. Weights are Glorot-initialized from the seed.
 */
inline TrainHistory train(BnnLpvModel& m, const lpv::Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  m.validate();
  require(!data.train.empty(), "train: dataset has no training records");
  require(data.n_x() == m.n_x && data.n_u() == m.n_u && data.n_theta() == m.n_theta, "train: dataset dimensions do not match model");
  const Batch batch = Batch::train(data);
  Rng root(cfg.seed);
  Rng init = root.split("bnn.init");
  init_weights(m, init);
  m.seed = cfg.seed;

  TrainHistory h;
  {
    Adam opt(cfg.pretrain_lr);
    ModelGrads g;
    double start = 0.0;
    for (int e = 0; e < cfg.pretrain_epochs; ++e) {
      const double loss = mse_loss(m, batch, &g);
      if (e == 0) start = loss;
      detail::check_divergence("pretraining", e, start, loss, cfg.divergence_factor);
      h.pretrain_loss.push_back(loss);
      detail::adam_step(opt, m, g, false);
    }
  }
  m.set_sigma(cfg.sigma_init);
  {
    Adam opt(cfg.lr);
    Rng noise = root.split("bnn.elbo");
    ModelGrads g;
    double start = 0.0;
    for (int e = 0; e < cfg.epochs; ++e) {
      const ElboTerms t = elbo_loss(m, batch, cfg.n_mc, noise, &g, cfg.kl_scale);
      if (e == 0) start = t.loss;
      detail::check_divergence("ELBO training", e, start, t.loss, cfg.divergence_factor);
      h.elbo_loss.push_back(t.loss);
      detail::adam_step(opt, m, g, true);
    }
  }
  return h;
}

}  // namespace lpv_smpc::bnn

#endif  // LPV_SMPC_BNN_TRAIN_HPP
