#include <gtest/gtest.h>

#include <cmath>

#include "chaosnet/errors.hpp"
#include "chaosnet/model.hpp"
#include "chaosnet/training.hpp"

using namespace chaosnet;

namespace {

ModelConfig small(Architecture a, std::size_t w = 8) {
  ModelConfig c;
  c.architecture = a;
  c.num_kernels = c.rbf_out = c.hidden = c.branch_out = c.merge = w;
  return c;
}

Tensor random_inputs(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::matrix(n, 3);
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

std::unique_ptr<Model> initialized(const ModelConfig& cfg, std::uint64_t seed) {
  auto m = make_model(cfg);
  Rng rng(seed);
  m->initialize(random_inputs(64, rng), rng);
  return m;
}

}  // namespace

TEST(SplitInput, ColumnsInOrder) {
  const auto cols = split_input(Tensor::from_rows({{1, 2, 3}, {4, 5, 6}}));
  EXPECT_EQ(cols[0], Tensor::from_rows({{1}, {4}}));
  EXPECT_EQ(cols[1], Tensor::from_rows({{2}, {5}}));
  EXPECT_EQ(cols[2], Tensor::from_rows({{3}, {6}}));

  const auto big = split_input(Tensor::matrix(512, 3));
  for (const Tensor& c : big) EXPECT_EQ(c.shape(), (std::vector<std::size_t>{512, 1}));
  EXPECT_THROW(split_input(Tensor::matrix(2, 4)), ContractError);
}

TEST(MultiBranch, DefaultLayout) {
  MultiBranchModel m(ModelConfig{});
  std::vector<std::string> names;
  for (const auto& l : m.layers()) names.push_back(l.name);
  const std::vector<std::string> head{"branch1.rbf", "branch1.dropout", "branch1.attention",
                                      "branch1.linear1", "branch1.relu", "branch1.linear2", "branch1.tanh"};
  ASSERT_GE(names.size(), head.size());
  EXPECT_TRUE(std::equal(head.begin(), head.end(), names.begin()));
  EXPECT_EQ(names.back(), "head");
  EXPECT_EQ(m.branch(0).columns(), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(m.branch(1).columns(), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(m.branch(2).columns(), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(m.merge().in_features(), 48u);
  EXPECT_EQ(m.head().out_features(), 3u);
}

TEST(MultiBranch, ParameterCountIsSumOfTensors) {
  MultiBranchModel m(ModelConfig{});
  std::size_t expected = 0;
  for (const auto& l : m.layers()) expected += l.layer->parameter_count();
  EXPECT_EQ(m.count_parameters(), expected);
  // rbf 32*2+32*32+1, attention 32*32+32, linear1 32*32+32, linear2 32*16+16
  const std::size_t branch = 1089 + 1056 + 1056 + 528;
  EXPECT_EQ(m.count_parameters(), 3 * branch + (48 * 32 + 32) + (32 * 3 + 3));
}

TEST(MultiBranch, PairsMustCoverEachPairOnce) {
  using P = MultiBranchModel::Pair;
  EXPECT_NO_THROW(MultiBranchModel(ModelConfig{}, {P{1, 2}, P{0, 1}, P{2, 0}}));
  EXPECT_THROW(MultiBranchModel(ModelConfig{}, {P{0, 1}, P{0, 1}, P{1, 2}}), ContractError);
  EXPECT_THROW(MultiBranchModel(ModelConfig{}, {P{0, 0}, P{0, 2}, P{1, 2}}), ContractError);
  EXPECT_THROW(MultiBranchModel(ModelConfig{}, {P{0, 3}, P{0, 2}, P{1, 2}}), ContractError);
}

TEST(SingleSequential, Layout) {
  SingleSequentialModel m(small(Architecture::single_sequential));
  EXPECT_EQ(m.branch().columns(), (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(m.merge().in_features(), 8u);
  EXPECT_EQ(m.head().out_features(), 3u);
}

TEST(Model, ZeroHeadOutputsBias) {
  for (auto a : {Architecture::multi_branch, Architecture::single_sequential}) {
    auto m = initialized(small(a), 1);
    LinearLayer& head = a == Architecture::multi_branch ? dynamic_cast<MultiBranchModel&>(*m).head()
                                                        : dynamic_cast<SingleSequentialModel&>(*m).head();
    head.weight().fill(0.0);
    head.bias().values() = {0.1, -0.2, 0.3};
    Rng rng(2);
    const Tensor y = m->forward(random_inputs(5, rng));
    for (std::size_t b = 0; b < 5; ++b) {
      EXPECT_EQ(y.at(b, 0), 0.1);
      EXPECT_EQ(y.at(b, 1), -0.2);
      EXPECT_EQ(y.at(b, 2), 0.3);
    }
  }
}

TEST(Model, BranchOutputsStayInTanhRange) {
  auto m = initialized(ModelConfig{}, 3);
  auto& mb = dynamic_cast<MultiBranchModel&>(*m);
  Rng rng(4);
  for (int draw = 0; draw < 1000; ++draw) {
    const Tensor x = random_inputs(1, rng, -5.0, 5.0);
    for (std::size_t i = 0; i < 3; ++i) {
      const Tensor y = mb.branch(i).forward(x, Mode::eval, nullptr);
      for (double v : y.values()) {
        ASSERT_GT(v, -1.0);
        ASSERT_LT(v, 1.0);
      }
    }
  }
}

TEST(Model, FiniteOnRandomInputs) {
  for (auto a : {Architecture::multi_branch, Architecture::single_sequential}) {
    auto m = initialized(small(a), 5);
    Rng rng(6);
    for (int draw = 0; draw < 1000; ++draw) {
      const Tensor y = m->forward(random_inputs(1, rng, -100.0, 100.0));
      for (double v : y.values()) ASSERT_TRUE(std::isfinite(v));
    }
  }
}

TEST(Model, GradientsReachEveryParameter) {
  for (auto a : {Architecture::multi_branch, Architecture::single_sequential}) {
    auto m = initialized(small(a), 7);
    Rng rng(8);
    const Tensor x = random_inputs(16, rng);
    m->zero_grad();
    const Tensor y = m->forward(x, Mode::train, &rng);
    m->backward(Tensor::matrix(y.rows(), 3, 1.0));
    for (const ParameterRef& p : m->parameters()) {
      double mag = 0.0;
      for (double g : p.parameter->grad.values()) mag += std::abs(g);
      EXPECT_GT(mag, 0.0) << p.qualified_name();
    }
  }
}

TEST(Model, InitializationIsDeterministic) {
  auto a = initialized(ModelConfig{}, 42);
  auto b = initialized(ModelConfig{}, 42);
  auto c = initialized(ModelConfig{}, 43);
  const auto pa = a->parameters(), pb = b->parameters(), pc = c->parameters();
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].parameter->value, pb[i].parameter->value) << pa[i].qualified_name();
    differs |= !(pa[i].parameter->value == pc[i].parameter->value);
  }
  EXPECT_TRUE(differs);
}

TEST(Model, CentersAreDistinctInputRows) {
  auto m = make_model(ModelConfig{});
  Rng rng(10);
  const Tensor x = random_inputs(100, rng);
  m->initialize(x, rng);
  auto& rbf = dynamic_cast<MultiBranchModel&>(*m).branch(1).rbf;
  const Tensor& c = rbf.centers();
  for (std::size_t k = 0; k < c.rows(); ++k) {
    bool found = false;
    for (std::size_t r = 0; r < x.rows() && !found; ++r) found = c.at(k, 0) == x.at(r, 0) && c.at(k, 1) == x.at(r, 2);
    EXPECT_TRUE(found) << "center " << k;
    for (std::size_t j = 0; j < k; ++j) EXPECT_FALSE(c.at(k, 0) == c.at(j, 0) && c.at(k, 1) == c.at(j, 1));
  }
}

TEST(Model, CloneIsIndependent) {
  auto m = initialized(small(Architecture::multi_branch), 11);
  auto copy = m->clone();
  dynamic_cast<MultiBranchModel&>(*copy).head().bias()[0] += 1.0;
  EXPECT_NE(dynamic_cast<MultiBranchModel&>(*m).head().bias()[0],
            dynamic_cast<MultiBranchModel&>(*copy).head().bias()[0]);
}

TEST(Model, ReferenceForwardAgrees) {
  for (auto a : {Architecture::multi_branch, Architecture::single_sequential}) {
    auto m = initialized(ModelConfig{.architecture = a}, 12);
    Rng rng(13);
    const Tensor x = random_inputs(9, rng);
    const Tensor y = m->forward(x);
    const auto ref = reference_forward(*m, x);
    ASSERT_EQ(ref.size(), y.size());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], static_cast<double>(ref[i]), 1e-13);
  }
}

TEST(Model, GradientCheckBothArchitectures) {
  for (auto a : {Architecture::multi_branch, Architecture::single_sequential}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto m = make_model(small(a));
      Rng rng(seed);
      const auto s = draw_gradcheck_sample(*m, 4, rng, 1e-3);
      const auto r = gradient_check(*m, s.inputs, s.targets);
      EXPECT_TRUE(r.passed()) << to_string(a) << " seed " << seed << " worst " << r.worst_rel_error
                              << " at " << r.worst.parameter;
    }
  }
}

TEST(Architecture, Names) {
  EXPECT_EQ(parse_architecture("multi_branch"), Architecture::multi_branch);
  EXPECT_EQ(parse_architecture("single_sequential"), Architecture::single_sequential);
  EXPECT_FALSE(parse_architecture("transformer"));
}
