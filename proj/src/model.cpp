#include "chaosnet/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "chaosnet/errors.hpp"

namespace chaosnet {

std::string_view to_string(Architecture a) {
  return a == Architecture::multi_branch ? "multi_branch" : "single_sequential";
}

std::optional<Architecture> parse_architecture(std::string_view name) {
  if (name == "multi_branch") return Architecture::multi_branch;
  if (name == "single_sequential") return Architecture::single_sequential;
  return std::nullopt;
}

bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.architecture == b.architecture && a.kernel.kind == b.kernel.kind &&
         a.kernel.sigma == b.kernel.sigma && a.norm == b.norm && a.normalize == b.normalize &&
         a.num_kernels == b.num_kernels && a.rbf_out == b.rbf_out && a.hidden == b.hidden &&
         a.branch_out == b.branch_out && a.merge == b.merge && a.dropout.p == b.dropout.p;
}

std::string describe(const ModelConfig& cfg) {
  std::ostringstream os;
  os << to_string(cfg.architecture) << "(kernel=" << to_string(cfg.kernel.kind)
     << ", normalize=" << (cfg.normalize ? "true" : "false") << ", num_kernels=" << cfg.num_kernels
     << ", rbf_out=" << cfg.rbf_out << ", hidden=" << cfg.hidden << ", branch_out=" << cfg.branch_out
     << ", merge=" << cfg.merge << ")";
  return os.str();
}

std::array<Tensor, 3> split_input(const Tensor& x) {
  require_cols(x, kModelFeatures, "split_input");
  std::array<Tensor, 3> cols;
  for (std::size_t c = 0; c < 3; ++c) {
    const std::array<std::size_t, 1> idx{c};
    cols[c] = select_columns(x, idx);
  }
  return cols;
}

// ---------------------------------------------------------------------------
// Branch

namespace {
RbfLayerConfig rbf_config(std::size_t in_dim, const ModelConfig& cfg) {
  return RbfLayerConfig{in_dim, cfg.num_kernels, cfg.rbf_out, cfg.kernel, cfg.norm, cfg.normalize};
}
}  // namespace

Branch::Branch(std::vector<std::size_t> columns, const ModelConfig& cfg)
    : rbf(rbf_config(columns.size(), cfg)),
      dropout(cfg.dropout),
      attention(cfg.rbf_out),
      hidden(cfg.rbf_out, cfg.hidden),
      output(cfg.hidden, cfg.branch_out),
      columns_(std::move(columns)) {
  for (std::size_t c : columns_) {
    if (c >= kModelFeatures) throw ContractError("Branch: column index out of range");
  }
}

Tensor Branch::forward(const Tensor& x, Mode mode, Rng* rng) {
  require_cols(x, kModelFeatures, "Branch::forward");
  batch_ = x.rows();
  Tensor h = rbf.forward(select_columns(x, columns_), mode, rng);
  h = dropout.forward(h, mode, rng);
  h = attention.forward(h, mode, rng);
  h = hidden_act.forward(hidden.forward(h, mode, rng), mode, rng);
  return output_act.forward(output.forward(h, mode, rng), mode, rng);
}

Tensor Branch::backward(const Tensor& upstream) {
  Tensor g = output.backward(output_act.backward(upstream));
  g = hidden.backward(hidden_act.backward(g));
  g = attention.backward(g);
  g = dropout.backward(g);
  g = rbf.backward(g);
  Tensor dx = Tensor::matrix(batch_, kModelFeatures);
  for (std::size_t b = 0; b < batch_; ++b) {
    for (std::size_t j = 0; j < columns_.size(); ++j) dx.at(b, columns_[j]) += g.at(b, j);
  }
  return dx;
}

std::vector<NamedLayer> Branch::layers(const std::string& prefix) {
  return {{prefix + ".rbf", &rbf},         {prefix + ".dropout", &dropout},
          {prefix + ".attention", &attention}, {prefix + ".linear1", &hidden},
          {prefix + ".relu", &hidden_act}, {prefix + ".linear2", &output},
          {prefix + ".tanh", &output_act}};
}

// ---------------------------------------------------------------------------
// Model

std::vector<ParameterRef> Model::parameters() {
  std::vector<ParameterRef> refs;
  for (const NamedLayer& nl : layers()) {
    for (Parameter& p : nl.layer->parameters()) refs.push_back({nl.name, &p});
  }
  return refs;
}

std::size_t Model::count_parameters() {
  std::size_t n = 0;
  for (const ParameterRef& ref : parameters()) n += ref.parameter->value.size();
  return n;
}

void Model::zero_grad() {
  for (const NamedLayer& nl : layers()) nl.layer->zero_grad();
}

void Model::initialize(const Tensor& train_inputs, Rng& rng) {
  require_cols(train_inputs, kModelFeatures, "Model::initialize");
  const std::size_t n = train_inputs.rows();
  for (Branch* br : branches()) {
    Tensor& centers = br->rbf.centers();
    const std::size_t K = centers.rows();
    if (n >= K) {
      // Partial Fisher-Yates: K distinct rows, uniformly without replacement.
      std::vector<std::size_t> idx(n);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.index(n - k));
        std::swap(idx[k], idx[j]);
        for (std::size_t d = 0; d < br->columns().size(); ++d) {
          centers.at(k, d) = train_inputs.at(idx[k], br->columns()[d]);
        }
      }
    } else {
      for (double& v : centers.values()) v = rng.normal();
    }
    br->rbf.log_sigma() =
        cfg_.kernel.kind == RadialKernelKind::thin_plate_spline ? 0.0 : std::log(cfg_.kernel.sigma);
  }
  for (const NamedLayer& nl : layers()) {
    if (auto* rbf = dynamic_cast<RbfLayer*>(nl.layer)) {
      init_uniform(rbf->weights(), 1.0 / std::sqrt(double(rbf->config().num_kernels)), rng);
    } else if (auto* att = dynamic_cast<AttentionLayer*>(nl.layer)) {
      const double bound = 1.0 / std::sqrt(double(att->features()));
      init_uniform(att->score_weights(), bound, rng);
      init_uniform(att->score_bias(), bound, rng);
    } else if (auto* lin = dynamic_cast<LinearLayer*>(nl.layer)) {
      const double bound = 1.0 / std::sqrt(double(lin->in_features()));
      init_uniform(lin->weight(), bound, rng);
      init_uniform(lin->bias(), bound, rng);
    }
  }
  zero_grad();
}

// ---------------------------------------------------------------------------
// MultiBranchModel

namespace {
void validate_pairs(const std::array<MultiBranchModel::Pair, 3>& pairs) {
  std::array<bool, 3> seen{};
  for (const auto& [a, b] : pairs) {
    const std::size_t lo = std::min(a, b), hi = std::max(a, b);
    if (a == b || hi >= 3) {
      throw ContractError("MultiBranchModel: invalid column pair (" + std::to_string(a + 1) + ", " +
                          std::to_string(b + 1) + ")");
    }
    // (0,1) -> 0, (0,2) -> 1, (1,2) -> 2
    const std::size_t slot = lo + hi - 1;
    if (seen[slot]) {
      throw ContractError("MultiBranchModel: column pair (" + std::to_string(lo + 1) + ", " +
                          std::to_string(hi + 1) + ") assigned to more than one branch");
    }
    seen[slot] = true;
  }
}
}  // namespace

MultiBranchModel::MultiBranchModel(ModelConfig cfg, std::array<Pair, 3> pairs)
    : Model(std::move(cfg)),
      merge_(3 * cfg_.branch_out, cfg_.merge),
      head_(cfg_.merge, kModelFeatures) {
  cfg_.architecture = Architecture::multi_branch;
  validate_pairs(pairs);
  for (const auto& [a, b] : pairs) branches_.emplace_back(std::vector<std::size_t>{a, b}, cfg_);
}

Tensor MultiBranchModel::forward(const Tensor& x, Mode mode, Rng* rng) {
  require_cols(x, kModelFeatures, "MultiBranchModel::forward");
  std::array<Tensor, 3> outs;
  for (std::size_t i = 0; i < 3; ++i) outs[i] = branches_[i].forward(x, mode, rng);
  const Tensor merged = merge_act_.forward(merge_.forward(concat_columns(outs), mode, rng), mode, rng);
  return head_.forward(merged, mode, rng);
}

Tensor MultiBranchModel::backward(const Tensor& grad_output) {
  const Tensor g_concat = merge_.backward(merge_act_.backward(head_.backward(grad_output)));
  const std::size_t width = cfg_.branch_out;
  const std::size_t batch = g_concat.rows();
  Tensor dx = Tensor::matrix(batch, kModelFeatures);
  for (std::size_t i = 0; i < 3; ++i) {
    Tensor g = Tensor::matrix(batch, width);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t j = 0; j < width; ++j) g.at(b, j) = g_concat.at(b, i * width + j);
    }
    const Tensor gi = branches_[i].backward(g);
    for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += gi[k];
  }
  return dx;
}

std::vector<NamedLayer> MultiBranchModel::layers() {
  std::vector<NamedLayer> out;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto bl = branches_[i].layers("branch" + std::to_string(i + 1));
    out.insert(out.end(), bl.begin(), bl.end());
  }
  out.push_back({"merge", &merge_});
  out.push_back({"merge_relu", &merge_act_});
  out.push_back({"head", &head_});
  return out;
}

std::vector<Branch*> MultiBranchModel::branches() {
  std::vector<Branch*> out;
  for (Branch& b : branches_) out.push_back(&b);
  return out;
}

// ---------------------------------------------------------------------------
// SingleSequentialModel

SingleSequentialModel::SingleSequentialModel(ModelConfig cfg)
    : Model(std::move(cfg)),
      branch_({0, 1, 2}, cfg_),
      merge_(cfg_.branch_out, cfg_.merge),
      head_(cfg_.merge, kModelFeatures) {
  cfg_.architecture = Architecture::single_sequential;
}

Tensor SingleSequentialModel::forward(const Tensor& x, Mode mode, Rng* rng) {
  const Tensor h = branch_.forward(x, mode, rng);
  return head_.forward(merge_act_.forward(merge_.forward(h, mode, rng), mode, rng), mode, rng);
}

Tensor SingleSequentialModel::backward(const Tensor& grad_output) {
  return branch_.backward(merge_.backward(merge_act_.backward(head_.backward(grad_output))));
}

std::vector<NamedLayer> SingleSequentialModel::layers() {
  auto out = branch_.layers("branch1");
  out.push_back({"merge", &merge_});
  out.push_back({"merge_relu", &merge_act_});
  out.push_back({"head", &head_});
  return out;
}

std::unique_ptr<Model> make_model(const ModelConfig& cfg) {
  if (cfg.architecture == Architecture::multi_branch) return std::make_unique<MultiBranchModel>(cfg);
  return std::make_unique<SingleSequentialModel>(cfg);
}

}  // namespace chaosnet
