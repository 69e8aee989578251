#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "chaosnet/errors.hpp"
#include "chaosnet/nn.hpp"
#include "chaosnet/rng.hpp"
#include "chaosnet/training.hpp"

using namespace chaosnet;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

void randomize(Layer& layer, Rng& rng) {
  for (Parameter& p : layer.parameters()) {
    for (double& v : p.value.values()) v = rng.uniform(-1.0, 1.0);
  }
}

}  // namespace

TEST(Rbf, SingleCenterAtInput) {
  RbfLayer layer({.in_dim = 2, .num_kernels = 1, .out_features = 1,
                  .kernel = {RadialKernelKind::gaussian, 1.0}, .normalize = false});
  layer.centers() = Tensor::from_rows({{0.3, -0.4}});
  layer.weights() = Tensor::from_rows({{2.5}});
  const Tensor y = layer.forward(Tensor::from_rows({{0.3, -0.4}}));
  EXPECT_EQ(y.at(0, 0), 2.5);
}

TEST(Rbf, NormalizedEquidistantCenters) {
  RbfLayer layer({.in_dim = 2, .num_kernels = 2, .out_features = 2, .normalize = true});
  layer.centers() = Tensor::from_rows({{3.0, 0.0}, {0.0, -3.0}});
  layer.weights() = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  layer.forward(Tensor::from_rows({{0.0, 0.0}}));
  EXPECT_DOUBLE_EQ(layer.activations().at(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(layer.activations().at(0, 1), 0.5);
}

TEST(Rbf, InverseMultiquadricExample) {
  RbfLayer layer({.in_dim = 2, .num_kernels = 2, .out_features = 2,
                  .kernel = {RadialKernelKind::inverse_multiquadric, 1.0}, .normalize = false});
  layer.centers() = Tensor::from_rows({{1.0, 0.0}, {0.0, 2.0}});
  layer.weights() = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const Tensor y = layer.forward(Tensor::from_rows({{0.0, 0.0}}));
  EXPECT_NEAR(y.at(0, 0), 0.70710678118654752, 1e-15);
  EXPECT_NEAR(y.at(0, 1), 0.44721359549995794, 1e-15);
  EXPECT_DOUBLE_EQ(layer.sigma(), 1.0);
}

TEST(Rbf, ParameterCount) {
  RbfLayer layer({.in_dim = 2, .num_kernels = 8, .out_features = 16});
  EXPECT_EQ(layer.parameter_count(), 8u * 2u + 16u * 8u + 1u);  // 145
  ASSERT_EQ(layer.parameters().size(), 3u);
  EXPECT_EQ(layer.parameters()[0].name, "centers");
  EXPECT_EQ(layer.parameters()[1].name, "weights");
  EXPECT_EQ(layer.parameters()[2].name, "log_sigma");
}

TEST(Rbf, RejectsWrongWidth) {
  RbfLayer layer({.in_dim = 2});
  EXPECT_THROW(layer.forward(Tensor::matrix(4, 3)), ContractError);
}

TEST(Attention, ZeroParametersGiveUniformScores) {
  AttentionLayer layer(4);
  const Tensor h = Tensor::from_rows({{1.0, -2.0, 3.0, 4.0}});
  const Tensor y = layer.forward(h);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(layer.scores().at(0, i), 0.25);
    EXPECT_DOUBLE_EQ(y.at(0, i), h.at(0, i) / 4.0);
  }
}

TEST(Attention, ZeroInputGivesZeroOutput) {
  AttentionLayer layer(3);
  Rng rng(1);
  randomize(layer, rng);
  const Tensor y = layer.forward(Tensor::matrix(2, 3));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Attention, LogThreeExample) {
  AttentionLayer layer(2);
  layer.score_bias()[0] = std::log(3.0);
  const Tensor y = layer.forward(Tensor::from_rows({{2.0, 2.0}}));
  EXPECT_NEAR(layer.scores().at(0, 0), 0.75, 1e-15);
  EXPECT_NEAR(layer.scores().at(0, 1), 0.25, 1e-15);
  EXPECT_NEAR(y.at(0, 0), 1.5, 1e-15);
}

TEST(Attention, ScoresSumToOne) {
  AttentionLayer layer(5);
  Rng rng(3);
  randomize(layer, rng);
  layer.forward(random_matrix(7, 5, rng, -30.0, 30.0));
  for (std::size_t b = 0; b < 7; ++b) {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += layer.scores().at(b, i);
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
}

TEST(Linear, Examples) {
  LinearLayer id(2, 2);
  id.weight() = Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
  const Tensor x = Tensor::from_rows({{0.25, -7.0}});
  EXPECT_EQ(id.forward(x), x);

  LinearLayer bias_only(3, 2);
  bias_only.bias().values() = {4.0, -1.0};
  const Tensor y = bias_only.forward(Tensor::from_rows({{1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(y, Tensor::from_rows({{4.0, -1.0}, {4.0, -1.0}}));

  LinearLayer l(2, 1);
  l.weight() = Tensor::from_rows({{1.0, 2.0}});
  l.bias()[0] = 3.0;
  EXPECT_EQ(l.forward(Tensor::from_rows({{4.0, 5.0}})).at(0, 0), 17.0);
  EXPECT_EQ(LinearLayer(4, 3).parameter_count(), 15u);
}

TEST(Activation, Values) {
  EXPECT_EQ(relu(Tensor::from_rows({{-1.0, 2.0, 0.0}})), Tensor::from_rows({{0.0, 2.0, 0.0}}));
  EXPECT_EQ(tanh(Tensor::from_rows({{0.0}})).at(0, 0), 0.0);
  EXPECT_NEAR(tanh(Tensor::from_rows({{1.0}})).at(0, 0), 0.76159415595576489, 1e-15);
}

TEST(Activation, ReluSubgradientAtZeroIsZero) {
  ReluLayer r;
  r.forward(Tensor::from_rows({{0.0, 1.0, -1.0}}));
  EXPECT_EQ(r.backward(Tensor::from_rows({{5.0, 5.0, 5.0}})), Tensor::from_rows({{0.0, 5.0, 0.0}}));
}

TEST(Dropout, EvalAndZeroRateAreIdentity) {
  Rng rng(9);
  const Tensor x = random_matrix(10, 4, rng);
  DropoutLayer d({.p = 0.3});
  EXPECT_EQ(d.forward(x, Mode::eval), x);
  DropoutLayer none({.p = 0.0});
  EXPECT_EQ(none.forward(x, Mode::train, &rng), x);
}

TEST(Dropout, InvertedScalingPreservesMean) {
  DropoutLayer d({.p = 0.3});
  Rng rng(123);
  const Tensor y = d.forward(Tensor::matrix(1000, 1000, 1.0), Mode::train, &rng);
  double sum = 0.0;
  for (double v : y.values()) {
    ASSERT_TRUE(v == 0.0 || std::abs(v - 1.0 / 0.7) < 1e-15);
    sum += v;
  }
  EXPECT_NEAR(sum / 1e6, 1.0, 0.01);
}

TEST(Dropout, TrainModeNeedsRng) {
  DropoutLayer d({.p = 0.3});
  EXPECT_THROW(d.forward(Tensor::matrix(2, 2, 1.0), Mode::train), StateError);
  EXPECT_THROW(DropoutLayer({.p = 1.0}), DomainError);
}

TEST(Layers, BackwardBeforeForwardIsRejected) {
  RbfLayer rbf({.in_dim = 2, .num_kernels = 2, .out_features = 2});
  AttentionLayer att(2);
  LinearLayer lin(2, 2);
  ReluLayer re;
  TanhLayer th;
  DropoutLayer dr({.p = 0.3});
  const Tensor g = Tensor::matrix(1, 2);
  for (Layer* l : std::initializer_list<Layer*>{&rbf, &att, &lin, &re, &th, &dr}) {
    EXPECT_THROW(l->backward(g), StateError) << l->kind();
  }
}

TEST(Layers, BackwardAccumulatesGradients) {
  LinearLayer l(2, 1);
  l.weight() = Tensor::from_rows({{1.0, 1.0}});
  const Tensor x = Tensor::from_rows({{2.0, 3.0}});
  l.forward(x);
  l.backward(Tensor::from_rows({{1.0}}));
  l.forward(x);
  l.backward(Tensor::from_rows({{1.0}}));
  EXPECT_EQ(l.parameters()[0].grad, Tensor::from_rows({{4.0, 6.0}}));
  l.zero_grad();
  EXPECT_EQ(l.parameters()[0].grad, Tensor::from_rows({{0.0, 0.0}}));
}

class LayerGradients : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradients, MatchFiniteDifferences) {
  Rng rng(GetParam());
  const std::size_t batch = 4;

  for (auto kind : {RadialKernelKind::gaussian, RadialKernelKind::multiquadric,
                    RadialKernelKind::inverse_multiquadric, RadialKernelKind::thin_plate_spline}) {
    for (bool normalize : {false, true}) {
      RbfLayer rbf({.in_dim = 2, .num_kernels = 5, .out_features = 3,
                    .kernel = {kind, 0.9}, .normalize = normalize});
      // Redraw until every kernel sum is clear of the normalisation clamp.
      Tensor x;
      do {
        randomize(rbf, rng);
        rbf.log_sigma() = rng.uniform(-0.3, 0.3);
        x = random_matrix(batch, 2, rng);
        rbf.forward(x);
      } while (*std::min_element(rbf.kernel_sums().begin(), rbf.kernel_sums().end()) < 0.05);
      const auto r = check_layer_gradients(rbf, x, random_matrix(batch, 3, rng));
      EXPECT_TRUE(r.passed()) << to_string(kind) << " normalize=" << normalize << " worst "
                              << r.worst_rel_error << " at " << r.worst.parameter;
    }
  }

  AttentionLayer att(6);
  randomize(att, rng);
  auto r = check_layer_gradients(att, random_matrix(batch, 6, rng), random_matrix(batch, 6, rng));
  EXPECT_TRUE(r.passed()) << "attention worst " << r.worst_rel_error;

  LinearLayer lin(5, 3);
  randomize(lin, rng);
  r = check_layer_gradients(lin, random_matrix(batch, 5, rng), random_matrix(batch, 3, rng));
  EXPECT_LT(r.worst_rel_error, 1e-8);

  TanhLayer th;
  r = check_layer_gradients(th, random_matrix(batch, 4, rng), random_matrix(batch, 4, rng));
  EXPECT_TRUE(r.passed()) << "tanh worst " << r.worst_rel_error;

  ReluLayer re;
  Tensor x = random_matrix(batch, 4, rng);
  for (double& v : x.values()) v = std::copysign(std::max(std::abs(v), 1e-2), v);
  r = check_layer_gradients(re, x, random_matrix(batch, 4, rng));
  EXPECT_TRUE(r.passed()) << "relu worst " << r.worst_rel_error;

  DropoutLayer dr({.p = 0.3});
  r = check_layer_gradients(dr, random_matrix(batch, 4, rng), random_matrix(batch, 4, rng), Mode::train,
                            static_cast<std::uint64_t>(GetParam()));
  EXPECT_TRUE(r.passed()) << "dropout worst " << r.worst_rel_error;
}

INSTANTIATE_TEST_SUITE_P(Seeds, LayerGradients, ::testing::Range(0, 10));
