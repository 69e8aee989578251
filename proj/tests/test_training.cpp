#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "chaosnet/errors.hpp"
#include "chaosnet/training.hpp"

using namespace chaosnet;

namespace {

ModelConfig small(Architecture a = Architecture::multi_branch) {
  ModelConfig c;
  c.architecture = a;
  c.num_kernels = c.rbf_out = c.hidden = c.branch_out = c.merge = 8;
  return c;
}

std::vector<Window> cycle_windows(std::size_t rows) {
  return prepare_dataset(synthetic_limit_cycle(rows, 0.01, 7), object_mapping(1), {.train_fraction = 0.99}).train;
}

}  // namespace

TEST(Mse, Examples) {
  const Tensor t = Tensor::from_rows({{0.5, -1.0}});
  EXPECT_EQ(mse(t, t).loss, 0.0);
  const MseResult r = mse(Tensor::from_rows({{1.0, 2.0}}), Tensor::from_rows({{0.0, 0.0}}));
  EXPECT_EQ(r.loss, 2.5);
  EXPECT_EQ(r.grad, Tensor::from_rows({{1.0, 2.0}}));
  EXPECT_THROW(mse(Tensor::matrix(1, 2), Tensor::matrix(2, 1)), ContractError);
}

TEST(Adam, HandStepsOnScalar) {
  LinearLayer holder(1, 1);
  Parameter& p = holder.parameters()[1];
  const std::vector<ParameterRef> refs{{"x", &p}};
  AdamState st;
  const AdamHyper hyper;

  p.grad[0] = 1.0;
  adam_step(hyper, st, refs);
  EXPECT_EQ(st.t, 1u);
  EXPECT_NEAR(st.m[0][0], 0.1, 1e-15);
  EXPECT_NEAR(st.v[0][0], 0.001, 1e-15);
  EXPECT_NEAR(p.value[0], -0.001 / (1.0 + 1e-8), 1e-12);

  adam_step(hyper, st, refs);
  EXPECT_NEAR(st.m[0][0], 0.19, 1e-15);
  EXPECT_NEAR(st.v[0][0], 0.001999, 1e-15);
  // m_hat = 0.19/0.19 = 1, v_hat = 0.001999/0.001999 = 1
  EXPECT_NEAR(p.value[0], -2.0 * 0.001 / (1.0 + 1e-8), 1e-12);
}

TEST(Adam, ZeroGradientIsNoOp) {
  LinearLayer holder(2, 2);
  holder.parameters()[0].value.fill(0.5);
  const std::vector<ParameterRef> refs{{"l", &holder.parameters()[0]}};
  AdamState st;
  adam_step(AdamHyper{}, st, refs);
  for (double v : holder.parameters()[0].value.values()) EXPECT_EQ(v, 0.5);
  for (double v : st.m[0].values()) EXPECT_EQ(v, 0.0);
  for (double v : st.v[0].values()) EXPECT_EQ(v, 0.0);
}

TEST(Adam, NanGradientNamesParameter) {
  LinearLayer holder(1, 1);
  holder.parameters()[0].grad[0] = std::nan("");
  const std::vector<ParameterRef> refs{{"merge", &holder.parameters()[0]}};
  AdamState st;
  try {
    adam_step(AdamHyper{}, st, refs);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("merge.weight"), std::string::npos) << e.what();
  }
  EXPECT_EQ(holder.parameters()[0].value[0], 0.0);
}

TEST(Adam, RejectsBadHyperparameters) {
  EXPECT_THROW((AdamHyper{.learning_rate = -1.0}.validate()), ConfigError);
  EXPECT_THROW((AdamHyper{.beta1 = 1.0}.validate()), ConfigError);
  EXPECT_THROW((AdamHyper{.epsilon = 0.0}.validate()), ConfigError);
}

TEST(Train, SameSeedSameHistory) {
  const auto windows = cycle_windows(200);
  const TrainConfig cfg{.epochs = 3, .batch_size = 32, .seed = 5};
  auto run = [&] {
    auto m = make_model(small());
    Rng init(cfg.seed);
    m->initialize(windows_to_inputs(windows), init);
    return train(*m, windows, {}, cfg, AdamHyper{});
  };
  const TrainHistory a = run(), b = run();
  EXPECT_EQ(a.batch_losses, b.batch_losses);
  ASSERT_EQ(a.epochs.size(), 3u);
  EXPECT_EQ(a.epochs.back().iteration, 3u * 7u);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const auto windows = cycle_windows(200);
  const std::vector<Window> one(windows.begin(), windows.begin() + 1);
  auto m = make_model(small());
  Rng init(1);
  m->initialize(windows_to_inputs(windows), init);
  auto before = m->clone();
  const auto h = train(*m, one, {}, {.epochs = 1, .batch_size = 8, .seed = 1}, {.learning_rate = 0.0});
  EXPECT_EQ(h.batch_losses.size(), 1u);
  EXPECT_EQ(h.epochs.size(), 1u);
  const auto pa = m->parameters(), pb = before->parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i].parameter->value, pb[i].parameter->value);
}

TEST(Train, FitsLinearTarget) {
  // y = 0.5 * x, a smooth map the network represents easily.
  std::vector<Window> windows;
  Rng rng(3);
  for (int i = 0; i < 1024; ++i) {
    Window w;
    for (double& v : w.input) v = rng.uniform(-1.0, 1.0);
    for (std::size_t j = 0; j < 3; ++j) w.target[j] = 0.5 * w.input[j];
    windows.push_back(w);
  }
  auto m = make_model(ModelConfig{});
  Rng init(3);
  m->initialize(windows_to_inputs(windows), init);
  const auto h = train(*m, windows, {}, {.epochs = 200, .batch_size = 32, .seed = 3}, AdamHyper{});
  EXPECT_LT(h.epochs.back().train_loss, 0.01 * h.epochs.front().train_loss);
}

TEST(Train, RecordsTestLoss) {
  const auto ds = prepare_dataset(synthetic_limit_cycle(120, 0.01, 2), object_mapping(2), {});
  auto m = make_model(small());
  Rng init(4);
  m->initialize(windows_to_inputs(ds.train), init);
  const auto h = train(*m, ds.train, ds.test, {.epochs = 2, .batch_size = 16, .seed = 4}, AdamHyper{});
  ASSERT_TRUE(h.epochs[1].test_loss);
  EXPECT_DOUBLE_EQ(*h.epochs[1].test_loss, evaluate_mse(*m, ds.test, 16));
  EXPECT_EQ(h.epochs[1].seconds, 0.0);
}

TEST(Train, EmptyTrainingSetIsAnError) {
  auto m = make_model(small());
  EXPECT_THROW(train(*m, {}, {}, {.epochs = 1}, AdamHyper{}), DataError);
}

TEST(LossCsv, RoundTrip) {
  TrainHistory h;
  h.batch_losses = {0.5, 0.25, 0.125, 1.0 / 3.0};
  h.epochs.push_back({1, 2, 0.375, 0.4, 0.0});
  h.epochs.push_back({2, 4, 0.1, std::nullopt, 1.5});
  std::stringstream buf;
  write_loss_csv(buf, h);
  const std::string text = buf.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "epoch,iteration,split,loss,seconds");
  const TrainHistory back = read_loss_csv(buf);
  EXPECT_EQ(back.batch_losses, h.batch_losses);
  ASSERT_EQ(back.epochs.size(), 2u);
  EXPECT_EQ(back.epochs[0].train_loss, 0.375);
  EXPECT_EQ(back.epochs[0].test_loss, std::optional<double>(0.4));
  EXPECT_FALSE(back.epochs[1].test_loss);
  EXPECT_EQ(back.epochs[1].iteration, 4u);
  EXPECT_EQ(back.epochs[1].seconds, 1.5);
}

TEST(GradCheck, LinearLayerIsExact) {
  LinearLayer l(4, 3);
  Rng rng(1);
  for (Parameter& p : l.parameters()) {
    for (double& v : p.value.values()) v = rng.uniform(-1.0, 1.0);
  }
  Tensor x = Tensor::matrix(5, 4), w = Tensor::matrix(5, 3);
  for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
  for (double& v : w.values()) v = rng.uniform(-1.0, 1.0);
  const auto r = check_layer_gradients(l, x, w);
  EXPECT_LT(r.worst_rel_error, 1e-8);
  EXPECT_EQ(r.checked, 12u + 3u + 20u);
}

TEST(GradCheck, DefaultSmallModels) {
  for (auto a : {Architecture::multi_branch, Architecture::single_sequential}) {
    auto m = make_model(small(a));
    Rng rng(99);
    const auto s = draw_gradcheck_sample(*m, 4, rng, 1e-3);
    const auto r = gradient_check(*m, s.inputs, s.targets);
    EXPECT_LT(r.worst_rel_error, 1e-4) << to_string(a) << " at " << r.worst.parameter;
    EXPECT_EQ(r.checked, m->count_parameters() + 12u);
  }
}

TEST(GradCheck, ZeroResidualGivesZeroGradient) {
  auto m = make_model(small());
  Rng rng(5);
  const auto s = draw_gradcheck_sample(*m, 4, rng, 1e-3);
  const Tensor target = m->forward(s.inputs);
  const auto r = gradient_check(*m, s.inputs, target);
  EXPECT_LT(r.max_abs_analytic, 1e-10);
}

TEST(GradCheck, RelativeError) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 2.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 1e-12), 1e-12 / 1e-8);
}
