#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chaosnet/rbf_core.hpp"
#include "chaosnet/rng.hpp"
#include "chaosnet/tensor.hpp"

namespace chaosnet {

enum class Mode { train, eval };

// A learnable tensor and its gradient buffer (always the same shape).
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
};

// Base for differentiable layers. forward() caches what backward() needs;
// backward() returns the gradient with respect to the layer input and adds
// parameter gradients into Parameter::grad (call zero_grad() between steps).
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view kind() const = 0;
  // `rng` is required only by layers that draw random numbers in train mode.
  virtual Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) = 0;
  virtual Tensor backward(const Tensor& upstream) = 0;

  std::vector<Parameter>& parameters() noexcept { return params_; }
  const std::vector<Parameter>& parameters() const noexcept { return params_; }
  void zero_grad();
  std::size_t parameter_count() const;

 protected:
  Layer() = default;
  Layer(const Layer&) = default;
  Layer& operator=(const Layer&) = default;

  void require_forward(const char* layer) const;

  std::vector<Parameter> params_;
  bool has_cache_ = false;
};

struct RbfLayerConfig {
  std::size_t in_dim = 2;
  std::size_t num_kernels = 32;
  std::size_t out_features = 32;
  RadialKernel kernel{};  // kernel.sigma is the initial shape parameter
  NormKind norm = NormKind::euclidean;
  bool normalize = true;
};

inline constexpr double kRbfNormalizeEpsilon = 1e-12;

// phi_k = kernel(|x - center_k|) with sigma = exp(log_sigma), optionally divided by
// max(sum_j phi_j, 1e-12); output = weights * phi.
// Parameters, in order: centers [K, in_dim], weights [F_o, K], log_sigma [1].
class RbfLayer final : public Layer {
 public:
  explicit RbfLayer(const RbfLayerConfig& cfg);

  std::string_view kind() const override { return "rbf"; }
  Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& upstream) override;

  const RbfLayerConfig& config() const noexcept { return cfg_; }
  Tensor& centers() { return params_[0].value; }
  Tensor& weights() { return params_[1].value; }
  double& log_sigma() { return params_[2].value[0]; }
  double sigma() const;

  // Kernel activations (after normalisation, if enabled) from the last forward, [batch, K].
  const Tensor& activations() const { return psi_; }
  // Per-sample sum of raw kernel values from the last forward. The thin plate
  // spline goes negative for r < 1, so with normalize the clamp at 1e-12 can engage.
  const std::vector<double>& kernel_sums() const { return sums_; }

 private:
  RbfLayerConfig cfg_;
  Tensor x_, diff_sq_, phi_, psi_, d_dsq_, d_dlog_sigma_;
  std::vector<double> sums_;
};

// Feature-wise gate: s = softmax(score_weights * h + score_bias), output = s (.) h.
// Parameters: score_weights [F, F], score_bias [F].
class AttentionLayer final : public Layer {
 public:
  explicit AttentionLayer(std::size_t features);

  std::string_view kind() const override { return "attention"; }
  Tensor forward(const Tensor& h, Mode mode = Mode::eval, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& upstream) override;

  std::size_t features() const noexcept { return features_; }
  Tensor& score_weights() { return params_[0].value; }
  Tensor& score_bias() { return params_[1].value; }
  // Attention scores from the last forward, [batch, F]; rows sum to 1.
  const Tensor& scores() const { return scores_; }

 private:
  std::size_t features_;
  Tensor h_, scores_;
};

// y = weight * x + bias. Parameters: weight [out, in], bias [out].
class LinearLayer final : public Layer {
 public:
  LinearLayer(std::size_t in, std::size_t out);

  std::string_view kind() const override { return "linear"; }
  Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& upstream) override;

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  Tensor& weight() { return params_[0].value; }
  Tensor& bias() { return params_[1].value; }

 private:
  std::size_t in_, out_;
  Tensor x_;
};

// max(0, x). The derivative at exactly 0 is taken as 0.
class ReluLayer final : public Layer {
 public:
  std::string_view kind() const override { return "relu"; }
  Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& upstream) override;

  // Pre-activation from the last forward call.
  const Tensor& input() const;

 private:
  Tensor x_;
};

class TanhLayer final : public Layer {
 public:
  std::string_view kind() const override { return "tanh"; }
  Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& upstream) override;

 private:
  Tensor y_;
};

struct DropoutConfig {
  double p = 0.3;
};

// Inverted dropout: in train mode each element is zeroed with probability p and
// survivors are scaled by 1/(1-p); eval mode is the identity.
class DropoutLayer final : public Layer {
 public:
  explicit DropoutLayer(DropoutConfig cfg = {});

  std::string_view kind() const override { return "dropout"; }
  Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& upstream) override;

  const DropoutConfig& config() const noexcept { return cfg_; }

 private:
  DropoutConfig cfg_;
  Tensor mask_;  // 0 or 1/(1-p) per element; empty after an eval-mode forward
};

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

// Row-wise numerically stable softmax of a rank-2 tensor.
Tensor softmax_rows(const Tensor& logits);

}  // namespace chaosnet

namespace chaosnet {

// Fills `t` with draws from U(-bound, bound).
void init_uniform(Tensor& t, double bound, Rng& rng);

}  // namespace chaosnet
