#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaosnet/data.hpp"
#include "chaosnet/model.hpp"

namespace chaosnet {

struct MseResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d pred = 2 (pred - target) / numel
};

// Mean of squared errors over every scalar element. Throws ContractError on
// mismatched or empty shapes.
MseResult mse(const Tensor& pred, const Tensor& target);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// First and second moment buffers, one per parameter tensor, plus the step count.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t t = 0;
};

// One Adam update over `params` (buffers are created zeroed on first use):
//   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2;  t += 1
//   m_hat = m / (1 - b1^t);  v_hat = v / (1 - b2^t)
//   theta -= lr * m_hat / (sqrt(v_hat) + eps)
// Throws NumericError naming the parameter if any gradient is NaN or infinite;
// nothing is modified in that case.
void adam_step(const AdamHyper& hyper, AdamState& state, std::span<const ParameterRef> params);

struct TrainConfig {
  std::size_t epochs = 2000;
  std::size_t batch_size = 512;
  std::uint64_t seed = 42;
  bool shuffle = true;
  // When false, LossRecord::seconds stays 0 so loss files are reproducible byte for byte.
  bool record_wall_clock = false;

  void validate() const;
};

struct LossRecord {
  std::size_t epoch = 0;      // 1-based
  std::size_t iteration = 0;  // optimiser steps taken by the end of this epoch
  double train_loss = 0.0;    // mean batch loss over the epoch (train mode)
  std::optional<double> test_loss;  // eval-mode MSE on the test windows
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<LossRecord> epochs;
  std::vector<double> batch_losses;  // one per optimiser step

  friend bool operator==(const TrainHistory& a, const TrainHistory& b);
};

bool operator==(const LossRecord& a, const LossRecord& b);

// Called after every epoch with the 1-based epoch number.
using EpochCallback = std::function<void(std::size_t epoch, Model& model)>;

// Mini-batch training: each epoch reshuffles the training windows (seeded by
// cfg.seed), then runs forward(train) -> mse -> backward -> adam_step per batch.
// Throws NumericError with epoch and batch index on a non-finite loss.
TrainHistory train(Model& model, std::span<const Window> train_windows,
                   std::span<const Window> test_windows, const TrainConfig& cfg,
                   const AdamHyper& hyper, const EpochCallback& on_epoch = {});

// Eval-mode MSE over `windows`, batched.
double evaluate_mse(Model& model, std::span<const Window> windows, std::size_t batch_size = 512);

Tensor windows_to_inputs(std::span<const Window> windows);
Tensor windows_to_targets(std::span<const Window> windows);

// Loss file: header `epoch,iteration,split,loss,seconds`; one `batch` row per
// optimiser step, then per epoch a `train` row and, if evaluated, a `test` row.
void write_loss_csv(std::ostream& out, const TrainHistory& history);
TrainHistory read_loss_csv(std::istream& in);

// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double analytic, double numeric);

struct GradCheckEntry {
  std::string parameter;  // qualified parameter name, or "input"
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  double worst_rel_error = 0.0;
  GradCheckEntry worst;
  double max_abs_analytic = 0.0;
  std::vector<GradCheckEntry> failures;  // entries with rel_error >= tol

  bool passed() const noexcept { return failures.empty(); }
};

// Smallest |pre-activation| seen by any ReLU in the model's last forward pass,
// or +inf if the model has none. Finite differences straddling a kink are meaningless.
double relu_margin(Model& model);

struct GradCheckSample {
  Tensor inputs;   // [batch, 3], U(-1, 1)
  Tensor targets;  // [batch, 3], U(-1, 1)
};

// Draws a sample and initializes `model` on it, redrawing (at most 100 times)
// until relu_margin >= margin. Throws NumericError if no draw qualifies.
GradCheckSample draw_gradcheck_sample(Model& model, std::size_t batch, Rng& rng, double margin);

// Eval-mode forward pass recomputed in long double directly from the parameter
// tensors, independent of the layer classes. Row-major [batch, 3].
std::vector<long double> reference_forward(Model& model, const Tensor& x);

// Compares the analytic gradient of mse(model.forward(inputs, eval), targets)
// with central differences of step h, for every parameter and every input entry.
// The differenced loss is evaluated through reference_forward so rounding in the
// forward pass does not swamp gradients near the 1e-8 relative-error floor.
GradCheckReport gradient_check(Model& model, const Tensor& inputs, const Tensor& targets,
                               double h = 1e-5, double tol = 1e-4);

// Same for a single layer under the scalar loss sum(weights (.) layer(input)).
// Every forward is run with a fresh Rng(seed) so stochastic layers see the same mask.
GradCheckReport check_layer_gradients(Layer& layer, const Tensor& input, const Tensor& weights,
                                      Mode mode = Mode::eval, std::uint64_t seed = 0,
                                      double h = 1e-5, double tol = 1e-4);

}  // namespace chaosnet
