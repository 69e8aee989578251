#include "chaosnet/nn.hpp"

#include <algorithm>
#include <cmath>

#include "chaosnet/errors.hpp"

namespace chaosnet {

void Layer::zero_grad() {
  for (Parameter& p : params_) p.grad.fill(0.0);
}

std::size_t Layer::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

void Layer::require_forward(const char* layer) const {
  if (!has_cache_) throw StateError(std::string(layer) + ": backward called before forward");
}

void init_uniform(Tensor& t, double bound, Rng& rng) {
  for (double& v : t.values()) v = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// RbfLayer

RbfLayer::RbfLayer(const RbfLayerConfig& cfg) : cfg_(cfg) {
  if (cfg.in_dim == 0 || cfg.num_kernels == 0 || cfg.out_features == 0) {
    throw ContractError("RbfLayer: in_dim, num_kernels and out_features must be >= 1");
  }
  if (cfg.kernel.kind != RadialKernelKind::thin_plate_spline && !(cfg.kernel.sigma > 0.0)) {
    throw DomainError("RbfLayer: initial sigma must be > 0");
  }
  const double sigma0 = cfg.kernel.kind == RadialKernelKind::thin_plate_spline ? 1.0 : cfg.kernel.sigma;
  params_.emplace_back("centers", Tensor::matrix(cfg.num_kernels, cfg.in_dim));
  params_.emplace_back("weights", Tensor::matrix(cfg.out_features, cfg.num_kernels));
  params_.emplace_back("log_sigma", Tensor::scalar(std::log(sigma0)));
}

double RbfLayer::sigma() const { return std::exp(params_[2].value[0]); }

Tensor RbfLayer::forward(const Tensor& x, Mode, Rng*) {
  require_cols(x, cfg_.in_dim, "RbfLayer::forward");
  const std::size_t batch = x.rows();
  const std::size_t K = cfg_.num_kernels;
  const Tensor& centers = params_[0].value;
  const Tensor& weights = params_[1].value;
  const RadialKernel kernel{cfg_.kernel.kind, sigma()};

  x_ = x;
  diff_sq_ = Tensor::matrix(batch, K);
  phi_ = Tensor::matrix(batch, K);
  psi_ = Tensor::matrix(batch, K);
  d_dsq_ = Tensor::matrix(batch, K);
  d_dlog_sigma_ = Tensor::matrix(batch, K);
  sums_.assign(batch, 0.0);

  Tensor out = Tensor::matrix(batch, cfg_.out_features);
  for (std::size_t b = 0; b < batch; ++b) {
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      // Euclidean norm, squared; the only norm kind supported.
      double s = 0.0;
      for (std::size_t d = 0; d < cfg_.in_dim; ++d) {
        const double diff = x.at(b, d) - centers.at(k, d);
        s += diff * diff;
      }
      const KernelJet jet = eval_kernel_jet(kernel, s);
      diff_sq_.at(b, k) = s;
      phi_.at(b, k) = jet.value;
      d_dsq_.at(b, k) = jet.d_dsq;
      d_dlog_sigma_.at(b, k) = jet.d_dlog_sigma;
      sum += jet.value;
    }
    sums_[b] = sum;
    const double denom = cfg_.normalize ? std::max(sum, kRbfNormalizeEpsilon) : 1.0;
    for (std::size_t k = 0; k < K; ++k) psi_.at(b, k) = phi_.at(b, k) / denom;
    for (std::size_t f = 0; f < cfg_.out_features; ++f) {
      double acc = 0.0;
      for (std::size_t k = 0; k < K; ++k) acc += weights.at(f, k) * psi_.at(b, k);
      out.at(b, f) = acc;
    }
  }
  has_cache_ = true;
  return out;
}

Tensor RbfLayer::backward(const Tensor& upstream) {
  require_forward("RbfLayer");
  const std::size_t batch = x_.rows();
  const std::size_t K = cfg_.num_kernels;
  if (upstream.rank() != 2 || upstream.rows() != batch || upstream.cols() != cfg_.out_features) {
    throw ContractError("RbfLayer::backward: upstream shape " + shape_string(upstream.shape()) +
                        " does not match output shape [" + std::to_string(batch) + ", " +
                        std::to_string(cfg_.out_features) + "]");
  }
  const Tensor& centers = params_[0].value;
  const Tensor& weights = params_[1].value;
  Tensor& g_centers = params_[0].grad;
  Tensor& g_weights = params_[1].grad;
  double& g_log_sigma = params_[2].grad[0];

  Tensor dx = Tensor::matrix(batch, cfg_.in_dim);
  std::vector<double> g_psi(K), g_phi(K);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < K; ++k) {
      double acc = 0.0;
      for (std::size_t f = 0; f < cfg_.out_features; ++f) {
        g_weights.at(f, k) += upstream.at(b, f) * psi_.at(b, k);
        acc += weights.at(f, k) * upstream.at(b, f);
      }
      g_psi[k] = acc;
    }
    if (cfg_.normalize && sums_[b] > kRbfNormalizeEpsilon) {
      // psi = phi / S  =>  dL/dphi_k = (g_psi_k - sum_j g_psi_j psi_j) / S
      double dot = 0.0;
      for (std::size_t k = 0; k < K; ++k) dot += g_psi[k] * psi_.at(b, k);
      for (std::size_t k = 0; k < K; ++k) g_phi[k] = (g_psi[k] - dot) / sums_[b];
    } else {
      const double denom = cfg_.normalize ? kRbfNormalizeEpsilon : 1.0;
      for (std::size_t k = 0; k < K; ++k) g_phi[k] = g_psi[k] / denom;
    }
    for (std::size_t k = 0; k < K; ++k) {
      const double g_s = g_phi[k] * d_dsq_.at(b, k);
      for (std::size_t d = 0; d < cfg_.in_dim; ++d) {
        const double g = 2.0 * g_s * (x_.at(b, d) - centers.at(k, d));
        dx.at(b, d) += g;
        g_centers.at(k, d) -= g;
      }
      g_log_sigma += g_phi[k] * d_dlog_sigma_.at(b, k);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// AttentionLayer

AttentionLayer::AttentionLayer(std::size_t features) : features_(features) {
  if (features == 0) throw ContractError("AttentionLayer: feature width must be >= 1");
  params_.emplace_back("score_weights", Tensor::matrix(features, features));
  params_.emplace_back("score_bias", Tensor({features}));
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ContractError("softmax_rows: expected rank-2 tensor");
  Tensor out = logits;
  for (std::size_t b = 0; b < out.rows(); ++b) {
    auto row = out.row(b);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : row) v /= sum;
  }
  return out;
}

Tensor AttentionLayer::forward(const Tensor& h, Mode, Rng*) {
  require_cols(h, features_, "AttentionLayer::forward");
  const Tensor& W = params_[0].value;
  const Tensor& bias = params_[1].value;
  const std::size_t batch = h.rows();
  Tensor logits = Tensor::matrix(batch, features_);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < features_; ++i) {
      double acc = bias[i];
      for (std::size_t j = 0; j < features_; ++j) acc += W.at(i, j) * h.at(b, j);
      logits.at(b, i) = acc;
    }
  }
  h_ = h;
  scores_ = softmax_rows(logits);
  Tensor out = Tensor::matrix(batch, features_);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores_[i] * h[i];
  has_cache_ = true;
  return out;
}

Tensor AttentionLayer::backward(const Tensor& upstream) {
  require_forward("AttentionLayer");
  require_same_shape(upstream, h_, "AttentionLayer::backward");
  const Tensor& W = params_[0].value;
  Tensor& gW = params_[0].grad;
  Tensor& gb = params_[1].grad;
  const std::size_t batch = h_.rows();
  Tensor dh = Tensor::matrix(batch, features_);
  std::vector<double> g_logit(features_);
  for (std::size_t b = 0; b < batch; ++b) {
    // out = s (.) h: direct path plus path through the scores.
    double dot = 0.0;
    for (std::size_t i = 0; i < features_; ++i) dot += scores_.at(b, i) * upstream.at(b, i) * h_.at(b, i);
    for (std::size_t i = 0; i < features_; ++i) {
      const double g_s = upstream.at(b, i) * h_.at(b, i);
      g_logit[i] = scores_.at(b, i) * (g_s - dot);
      dh.at(b, i) += upstream.at(b, i) * scores_.at(b, i);
    }
    for (std::size_t i = 0; i < features_; ++i) {
      gb[i] += g_logit[i];
      for (std::size_t j = 0; j < features_; ++j) {
        gW.at(i, j) += g_logit[i] * h_.at(b, j);
        dh.at(b, j) += W.at(i, j) * g_logit[i];
      }
    }
  }
  return dh;
}

// ---------------------------------------------------------------------------
// LinearLayer

LinearLayer::LinearLayer(std::size_t in, std::size_t out) : in_(in), out_(out) {
  if (in == 0 || out == 0) throw ContractError("LinearLayer: widths must be >= 1");
  params_.emplace_back("weight", Tensor::matrix(out, in));
  params_.emplace_back("bias", Tensor({out}));
}

Tensor LinearLayer::forward(const Tensor& x, Mode, Rng*) {
  require_cols(x, in_, "LinearLayer::forward");
  const Tensor& W = params_[0].value;
  const Tensor& bias = params_[1].value;
  Tensor out = Tensor::matrix(x.rows(), out_);
  for (std::size_t b = 0; b < x.rows(); ++b) {
    const auto xr = x.row(b);
    for (std::size_t o = 0; o < out_; ++o) {
      double acc = bias[o];
      const auto wr = W.row(o);
      for (std::size_t i = 0; i < in_; ++i) acc += wr[i] * xr[i];
      out.at(b, o) = acc;
    }
  }
  x_ = x;
  has_cache_ = true;
  return out;
}

Tensor LinearLayer::backward(const Tensor& upstream) {
  require_forward("LinearLayer");
  require_cols(upstream, out_, "LinearLayer::backward");
  if (upstream.rows() != x_.rows()) {
    throw ContractError("LinearLayer::backward: upstream batch " + std::to_string(upstream.rows()) +
                        " vs forward batch " + std::to_string(x_.rows()));
  }
  const Tensor& W = params_[0].value;
  Tensor& gW = params_[0].grad;
  Tensor& gb = params_[1].grad;
  Tensor dx = Tensor::matrix(x_.rows(), in_);
  for (std::size_t b = 0; b < x_.rows(); ++b) {
    const auto xr = x_.row(b);
    auto dxr = dx.row(b);
    for (std::size_t o = 0; o < out_; ++o) {
      const double g = upstream.at(b, o);
      if (g == 0.0) continue;
      gb[o] += g;
      auto gwr = gW.row(o);
      const auto wr = W.row(o);
      for (std::size_t i = 0; i < in_; ++i) {
        gwr[i] += g * xr[i];
        dxr[i] += g * wr[i];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Activations

Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor tanh(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.values()) v = std::tanh(v);
  return y;
}

Tensor ReluLayer::forward(const Tensor& x, Mode, Rng*) {
  x_ = x;
  has_cache_ = true;
  return relu(x);
}

const Tensor& ReluLayer::input() const {
  require_forward("ReluLayer");
  return x_;
}

Tensor ReluLayer::backward(const Tensor& upstream) {
  require_forward("ReluLayer");
  require_same_shape(upstream, x_, "ReluLayer::backward");
  Tensor dx = upstream;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    if (!(x_[i] > 0.0)) dx[i] = 0.0;
  }
  return dx;
}

Tensor TanhLayer::forward(const Tensor& x, Mode, Rng*) {
  y_ = tanh(x);
  has_cache_ = true;
  return y_;
}

Tensor TanhLayer::backward(const Tensor& upstream) {
  require_forward("TanhLayer");
  require_same_shape(upstream, y_, "TanhLayer::backward");
  Tensor dx = upstream;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= 1.0 - y_[i] * y_[i];
  return dx;
}

// ---------------------------------------------------------------------------
// DropoutLayer

DropoutLayer::DropoutLayer(DropoutConfig cfg) : cfg_(cfg) {
  if (!(cfg.p >= 0.0 && cfg.p < 1.0)) {
    throw DomainError("DropoutLayer: p must lie in [0, 1), got " + std::to_string(cfg.p));
  }
}

Tensor DropoutLayer::forward(const Tensor& x, Mode mode, Rng* rng) {
  has_cache_ = true;
  if (mode == Mode::eval || cfg_.p == 0.0) {
    mask_ = Tensor{};
    return x;
  }
  if (rng == nullptr) throw StateError("DropoutLayer: train-mode forward requires an Rng");
  const double keep_scale = 1.0 / (1.0 - cfg_.p);
  mask_ = Tensor(x.shape());
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mask_[i] = rng->bernoulli(cfg_.p) ? 0.0 : keep_scale;
    y[i] *= mask_[i];
  }
  return y;
}

Tensor DropoutLayer::backward(const Tensor& upstream) {
  require_forward("DropoutLayer");
  if (mask_.size() == 0) return upstream;
  require_same_shape(upstream, mask_, "DropoutLayer::backward");
  Tensor dx = upstream;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

}  // namespace chaosnet
