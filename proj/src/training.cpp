#include "chaosnet/training.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "chaosnet/errors.hpp"

namespace chaosnet {

MseResult mse(const Tensor& pred, const Tensor& target) {
  require_same_shape(pred, target, "mse");
  if (pred.size() == 0) throw ContractError("mse: empty tensors");
  const double n = static_cast<double>(pred.size());
  MseResult r{0.0, Tensor(pred.shape())};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    r.loss += e * e;
    r.grad[i] = 2.0 * e / n;
  }
  r.loss /= n;
  return r;
}

// ---------------------------------------------------------------------------
// Adam

void AdamHyper::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("adam: learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("adam: epsilon must be > 0");
}

void adam_step(const AdamHyper& hyper, AdamState& state, std::span<const ParameterRef> params) {
  if (state.m.empty()) {
    for (const ParameterRef& p : params) {
      state.m.emplace_back(p.parameter->value.shape());
      state.v.emplace_back(p.parameter->value.shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw StateError("adam_step: optimiser state tracks " + std::to_string(state.m.size()) +
                     " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i].parameter;
    if (!p.grad.same_shape(p.value) || !state.m[i].same_shape(p.value)) {
      throw ContractError("adam_step: shape mismatch for " + params[i].qualified_name());
    }
    for (double g : p.grad.values()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam_step: non-finite gradient in " + params[i].qualified_name());
      }
    }
  }

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i].parameter;
    auto& m = state.m[i].values();
    auto& v = state.v[i].values();
    auto& theta = p.value.values();
    const auto& g = p.grad.values();
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      theta[k] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
}

bool operator==(const LossRecord& a, const LossRecord& b) {
  return a.epoch == b.epoch && a.iteration == b.iteration && a.train_loss == b.train_loss &&
         a.test_loss == b.test_loss && a.seconds == b.seconds;
}

bool operator==(const TrainHistory& a, const TrainHistory& b) {
  return a.epochs == b.epochs && a.batch_losses == b.batch_losses;
}

Tensor windows_to_inputs(std::span<const Window> windows) {
  return Tensor({windows.size(), 3}, stack_inputs(windows));
}

Tensor windows_to_targets(std::span<const Window> windows) {
  return Tensor({windows.size(), 3}, stack_targets(windows));
}

namespace {

Tensor gather(std::span<const Window> windows, std::span<const std::size_t> idx, bool targets) {
  Tensor out = Tensor::matrix(idx.size(), 3);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& src = targets ? windows[idx[r]].target : windows[idx[r]].input;
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

double evaluate_mse(Model& model, std::span<const Window> windows, std::size_t batch_size) {
  if (windows.empty()) throw ContractError("evaluate_mse: no windows");
  double sum = 0.0;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    const auto chunk = windows.subspan(start, std::min(batch_size, windows.size() - start));
    const Tensor pred = model.forward(windows_to_inputs(chunk), Mode::eval);
    const Tensor target = windows_to_targets(chunk);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double e = pred[i] - target[i];
      sum += e * e;
    }
  }
  return sum / static_cast<double>(windows.size() * 3);
}

TrainHistory train(Model& model, std::span<const Window> train_windows,
                   std::span<const Window> test_windows, const TrainConfig& cfg,
                   const AdamHyper& hyper, const EpochCallback& on_epoch) {
  cfg.validate();
  hyper.validate();
  if (train_windows.empty()) throw DataError("train: empty training set");

  // Distinct stream from the one used for initialisation with the same seed.
  Rng rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  AdamState state;
  const std::vector<ParameterRef> params = model.parameters();
  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.shuffle) rng.shuffle(std::span<std::size_t>(order));
    double epoch_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const auto idx = std::span<const std::size_t>(order).subspan(
          start, std::min(cfg.batch_size, order.size() - start));
      const Tensor x = gather(train_windows, idx, false);
      const Tensor y = gather(train_windows, idx, true);

      model.zero_grad();
      const Tensor pred = model.forward(x, Mode::train, &rng);
      const MseResult loss = mse(pred, y);
      if (!std::isfinite(loss.loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches + 1));
      }
      model.backward(loss.grad);
      adam_step(hyper, state, params);

      history.batch_losses.push_back(loss.loss);
      epoch_sum += loss.loss;
      ++batches;
    }

    LossRecord rec;
    rec.epoch = epoch;
    rec.iteration = history.batch_losses.size();
    rec.train_loss = epoch_sum / static_cast<double>(batches);
    if (!test_windows.empty()) {
      rec.test_loss = evaluate_mse(model, test_windows, cfg.batch_size);
      if (!std::isfinite(*rec.test_loss)) {
        throw NumericError("train: non-finite test loss at epoch " + std::to_string(epoch));
      }
    }
    if (cfg.record_wall_clock) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(epoch, model);
  }
  return history;
}

// ---------------------------------------------------------------------------
// Loss CSV

namespace {

void put_double(std::ostream& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.write(buf, res.ptr - buf);
}

double get_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("loss CSV line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

void write_loss_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,iteration,split,loss,seconds\n";
  std::size_t step = 0;
  for (const LossRecord& rec : history.epochs) {
    for (; step < rec.iteration && step < history.batch_losses.size(); ++step) {
      out << rec.epoch << ',' << step + 1 << ",batch,";
      put_double(out, history.batch_losses[step]);
      out << ",0\n";
    }
    out << rec.epoch << ',' << rec.iteration << ",train,";
    put_double(out, rec.train_loss);
    out << ',';
    put_double(out, rec.seconds);
    out << '\n';
    if (rec.test_loss) {
      out << rec.epoch << ',' << rec.iteration << ",test,";
      put_double(out, *rec.test_loss);
      out << ',';
      put_double(out, rec.seconds);
      out << '\n';
    }
  }
}

TrainHistory read_loss_csv(std::istream& in) {
  TrainHistory h;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || line.rfind("epoch,iteration,split,loss,seconds", 0) != 0) {
    throw DataError("loss CSV: missing header");
  }
  ++line_no;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      f.push_back(rest.substr(0, pos));
    }
    f.push_back(rest);
    if (f.size() != 5) throw DataError("loss CSV line " + std::to_string(line_no) + ": expected 5 fields");
    const auto epoch = static_cast<std::size_t>(get_double(f[0], line_no));
    const auto iteration = static_cast<std::size_t>(get_double(f[1], line_no));
    const double loss = get_double(f[3], line_no);
    const double seconds = get_double(f[4], line_no);
    if (f[2] == "batch") {
      h.batch_losses.push_back(loss);
    } else if (f[2] == "train") {
      h.epochs.push_back({epoch, iteration, loss, std::nullopt, seconds});
    } else if (f[2] == "test") {
      if (h.epochs.empty() || h.epochs.back().epoch != epoch) {
        throw DataError("loss CSV line " + std::to_string(line_no) + ": test row without train row");
      }
      h.epochs.back().test_loss = loss;
    } else {
      throw DataError("loss CSV line " + std::to_string(line_no) + ": unknown split '" + std::string(f[2]) + "'");
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Gradient checks

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

void record(GradCheckReport& report, GradCheckEntry entry, double tol) {
  ++report.checked;
  report.max_abs_analytic = std::max(report.max_abs_analytic, std::abs(entry.analytic));
  if (report.checked == 1 || entry.rel_error > report.worst_rel_error) {
    report.worst_rel_error = entry.rel_error;
    report.worst = entry;
  }
  if (entry.rel_error >= tol) report.failures.push_back(std::move(entry));
}

// Central difference of `loss` with respect to `slot`, restoring it afterwards.
// The loss is reduced in long double: with a double-rounded loss of magnitude ~1
// the quotient's noise floor (~1e-11 at h = 1e-5) would swamp small gradients.
template <typename LossFn>
double central_difference(double& slot, double h, LossFn&& loss) {
  const double saved = slot;
  slot = saved + h;
  const long double plus = loss();
  slot = saved - h;
  const long double minus = loss();
  slot = saved;
  // (saved + h) - (saved - h) is the step actually taken after rounding.
  const long double step = static_cast<long double>(saved + h) - static_cast<long double>(saved - h);
  return static_cast<double>((plus - minus) / step);
}


}  // namespace

double relu_margin(Model& model) {
  double margin = std::numeric_limits<double>::infinity();
  for (const NamedLayer& nl : model.layers()) {
    if (auto* relu_layer = dynamic_cast<ReluLayer*>(nl.layer)) {
      for (double v : relu_layer->input().values()) margin = std::min(margin, std::abs(v));
    }
  }
  return margin;
}

GradCheckSample draw_gradcheck_sample(Model& model, std::size_t batch, Rng& rng, double margin) {
  GradCheckSample sample{Tensor::matrix(batch, 3), Tensor::matrix(batch, 3)};
  for (int attempt = 0; attempt < 100; ++attempt) {
    for (double& v : sample.inputs.values()) v = rng.uniform(-1.0, 1.0);
    for (double& v : sample.targets.values()) v = rng.uniform(-1.0, 1.0);
    model.initialize(sample.inputs, rng);
    model.forward(sample.inputs, Mode::eval);
    if (relu_margin(model) >= margin) return sample;
  }
  throw NumericError("gradcheck: no draw keeps ReLU inputs " + std::to_string(margin) + " away from 0");
}

GradCheckReport gradient_check(Model& model, const Tensor& inputs, const Tensor& targets, double h,
                               double tol) {
  Tensor x = inputs;
  require_same_shape(inputs, targets, "gradient_check");
  auto loss = [&] {
    const std::vector<long double> pred = reference_forward(model, x);
    long double sum = 0.0L;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const long double e = pred[i] - targets[i];
      sum += e * e;
    }
    return sum / static_cast<long double>(pred.size());
  };

  model.zero_grad();
  const MseResult base = mse(model.forward(x, Mode::eval), targets);
  const Tensor dx = model.backward(base.grad);

  GradCheckReport report;
  for (const ParameterRef& ref : model.parameters()) {
    Parameter& p = *ref.parameter;
    const Tensor analytic = p.grad;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double numeric = central_difference(p.value[i], h, loss);
      record(report, {ref.qualified_name(), i, analytic[i], numeric, relative_error(analytic[i], numeric)}, tol);
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double numeric = central_difference(x[i], h, loss);
    record(report, {"input", i, dx[i], numeric, relative_error(dx[i], numeric)}, tol);
  }
  return report;
}

GradCheckReport check_layer_gradients(Layer& layer, const Tensor& input, const Tensor& weights, Mode mode,
                                      std::uint64_t seed, double h, double tol) {
  Tensor x = input;
  auto loss = [&] {
    Rng rng(seed);
    const Tensor y = layer.forward(x, mode, &rng);
    require_same_shape(y, weights, "check_layer_gradients");
    long double s = 0.0L;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<long double>(weights[i]) * y[i];
    return s;
  };

  layer.zero_grad();
  {
    Rng rng(seed);
    const Tensor y = layer.forward(x, mode, &rng);
    require_same_shape(y, weights, "check_layer_gradients");
  }
  const Tensor dx = layer.backward(weights);

  GradCheckReport report;
  for (Parameter& p : layer.parameters()) {
    const Tensor analytic = p.grad;
    const std::string name = std::string(layer.kind()) + "." + p.name;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double numeric = central_difference(p.value[i], h, loss);
      record(report, {name, i, analytic[i], numeric, relative_error(analytic[i], numeric)}, tol);
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double numeric = central_difference(x[i], h, loss);
    record(report, {"input", i, dx[i], numeric, relative_error(dx[i], numeric)}, tol);
  }
  return report;
}

}  // namespace chaosnet
