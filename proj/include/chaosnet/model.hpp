#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "chaosnet/nn.hpp"

namespace chaosnet {

enum class Architecture { multi_branch, single_sequential };

std::string_view to_string(Architecture a);
std::optional<Architecture> parse_architecture(std::string_view name);

inline constexpr std::size_t kModelFeatures = 3;

// Architecture and layer widths. Every branch is
//   rbf(in -> rbf_out) -> dropout -> attention(rbf_out) -> linear(rbf_out -> hidden) -> relu
//   -> linear(hidden -> branch_out) -> tanh
// followed by merge linear(branches * branch_out -> merge) -> relu -> head linear(merge -> 3).
struct ModelConfig {
  Architecture architecture = Architecture::multi_branch;
  RadialKernel kernel{RadialKernelKind::inverse_multiquadric, 1.0};
  NormKind norm = NormKind::euclidean;
  bool normalize = true;
  std::size_t num_kernels = 32;
  std::size_t rbf_out = 32;
  std::size_t hidden = 32;
  std::size_t branch_out = 16;
  std::size_t merge = 32;
  DropoutConfig dropout{};

  friend bool operator==(const ModelConfig& a, const ModelConfig& b);
};

// One-line human readable descriptor, used in compatibility errors.
std::string describe(const ModelConfig& cfg);

// A layer in canonical order with its qualified name ("branch1.rbf", "merge", ...).
struct NamedLayer {
  std::string name;
  Layer* layer;
};

struct ParameterRef {
  std::string layer;
  Parameter* parameter;
  std::string qualified_name() const { return layer + "." + parameter->name; }
};

// Splits [batch, 3] into three [batch, 1] columns.
std::array<Tensor, 3> split_input(const Tensor& x);

// Column-selecting branch stack. `columns` are 0-based indices into the model input.
class Branch {
 public:
  Branch(std::vector<std::size_t> columns, const ModelConfig& cfg);

  // x is the full [batch, 3] model input; the branch selects its own columns.
  Tensor forward(const Tensor& x, Mode mode, Rng* rng);
  // Returns the gradient with respect to the full [batch, 3] input.
  Tensor backward(const Tensor& upstream);

  const std::vector<std::size_t>& columns() const noexcept { return columns_; }
  std::vector<NamedLayer> layers(const std::string& prefix);

  RbfLayer rbf;
  DropoutLayer dropout;
  AttentionLayer attention;
  LinearLayer hidden;
  ReluLayer hidden_act;
  LinearLayer output;
  TanhLayer output_act;

 private:
  std::vector<std::size_t> columns_;
  std::size_t batch_ = 0;
};

class Model {
 public:
  virtual ~Model() = default;

  virtual std::unique_ptr<Model> clone() const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) = 0;
  // Backpropagates d loss / d output, accumulating parameter gradients;
  // returns d loss / d input.
  virtual Tensor backward(const Tensor& grad_output) = 0;
  virtual std::vector<NamedLayer> layers() = 0;

  // Places RBF centers on distinct rows of `train_inputs` ([n, 3]) and draws
  // all other weights from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void initialize(const Tensor& train_inputs, Rng& rng);

  const ModelConfig& config() const noexcept { return cfg_; }
  Architecture architecture() const noexcept { return cfg_.architecture; }

  std::vector<ParameterRef> parameters();
  std::size_t count_parameters();
  void zero_grad();

 protected:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}
  Model(const Model&) = default;

  virtual std::vector<Branch*> branches() = 0;

  ModelConfig cfg_;
};

class MultiBranchModel final : public Model {
 public:
  using Pair = std::array<std::size_t, 2>;
  static constexpr std::array<Pair, 3> kDefaultPairs{{{0, 1}, {0, 2}, {1, 2}}};

  // Pairs are 0-based and must cover {0,1}, {0,2}, {1,2} exactly once each.
  explicit MultiBranchModel(ModelConfig cfg, std::array<Pair, 3> pairs = kDefaultPairs);

  std::unique_ptr<Model> clone() const override { return std::make_unique<MultiBranchModel>(*this); }
  Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<NamedLayer> layers() override;

  Branch& branch(std::size_t i) { return branches_.at(i); }
  LinearLayer& merge() { return merge_; }
  LinearLayer& head() { return head_; }

 private:
  std::vector<Branch*> branches() override;

  std::vector<Branch> branches_;
  LinearLayer merge_;
  ReluLayer merge_act_;
  LinearLayer head_;
};

class SingleSequentialModel final : public Model {
 public:
  explicit SingleSequentialModel(ModelConfig cfg);

  std::unique_ptr<Model> clone() const override {
    return std::make_unique<SingleSequentialModel>(*this);
  }
  Tensor forward(const Tensor& x, Mode mode = Mode::eval, Rng* rng = nullptr) override;
  Tensor backward(const Tensor& grad_output) override;
  std::vector<NamedLayer> layers() override;

  Branch& branch() { return branch_; }
  LinearLayer& merge() { return merge_; }
  LinearLayer& head() { return head_; }

 private:
  std::vector<Branch*> branches() override { return {&branch_}; }

  Branch branch_;
  LinearLayer merge_;
  ReluLayer merge_act_;
  LinearLayer head_;
};

// Builds the architecture named in cfg (parameters zeroed; call initialize()).
std::unique_ptr<Model> make_model(const ModelConfig& cfg);

}  // namespace chaosnet
