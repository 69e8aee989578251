#include "chaosnet/config.hpp"

#include <fstream>
#include <sstream>

#include <boost/program_options.hpp>

#include "chaosnet/errors.hpp"

namespace po = boost::program_options;

namespace chaosnet {

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

std::array<Column, 3> parse_columns(const std::string& key, const std::string& value) {
  const auto names = split_list(value);
  if (names.size() != 3) throw ConfigError(key + ": expected exactly 3 column names, got '" + value + "'");
  std::array<Column, 3> cols{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto c = parse_column(names[i]);
    if (!c) throw ConfigError(key + ": unknown column '" + names[i] + "'");
    cols[i] = *c;
  }
  return cols;
}

std::string join(const std::array<Column, 3>& cols) {
  return std::string(to_string(cols[0])) + "," + std::string(to_string(cols[1])) + "," +
         std::string(to_string(cols[2]));
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  std::string dataset, models, input_columns, target_columns, architecture, kernel, norm, out;

  po::options_description desc;
  // clang-format off
  desc.add_options()
    ("data.path", po::value(&dataset))
    ("data.models", po::value(&models))
    ("data.input_columns", po::value(&input_columns))
    ("data.target_columns", po::value(&target_columns))
    ("data.lag", po::value(&cfg.lag))
    ("data.gap_factor", po::value(&cfg.data.gap_factor))
    ("data.train_fraction", po::value(&cfg.data.train_fraction))
    ("model.architecture", po::value(&architecture))
    ("model.kernel", po::value(&kernel))
    ("model.sigma", po::value(&cfg.model.kernel.sigma))
    ("model.norm", po::value(&norm))
    ("model.normalize", po::value(&cfg.model.normalize))
    ("model.num_kernels", po::value(&cfg.model.num_kernels))
    ("model.rbf_out", po::value(&cfg.model.rbf_out))
    ("model.hidden", po::value(&cfg.model.hidden))
    ("model.branch_out", po::value(&cfg.model.branch_out))
    ("model.merge", po::value(&cfg.model.merge))
    ("model.dropout", po::value(&cfg.model.dropout.p))
    ("train.epochs", po::value(&cfg.train.epochs))
    ("train.batch_size", po::value(&cfg.train.batch_size))
    ("train.seed", po::value(&cfg.train.seed))
    ("train.shuffle", po::value(&cfg.train.shuffle))
    ("train.checkpoint_every", po::value(&cfg.checkpoint_every))
    ("train.record_wall_clock", po::value(&cfg.train.record_wall_clock))
    ("adam.learning_rate", po::value(&cfg.adam.learning_rate))
    ("adam.beta1", po::value(&cfg.adam.beta1))
    ("adam.beta2", po::value(&cfg.adam.beta2))
    ("adam.epsilon", po::value(&cfg.adam.epsilon))
    ("run.out", po::value(&out))
    ("forecast.steps", po::value(&cfg.rollout_steps))
    ("gradcheck.h", po::value(&cfg.gradcheck.h))
    ("gradcheck.tol", po::value(&cfg.gradcheck.tol))
    ("gradcheck.width", po::value(&cfg.gradcheck.width))
    ("gradcheck.batch", po::value(&cfg.gradcheck.batch));
  // clang-format on

  try {
    po::variables_map vm;
    po::store(po::parse_config_file(in, desc, /*allow_unregistered=*/false), vm);
    po::notify(vm);
  } catch (const po::error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };
  if (!dataset.empty()) cfg.dataset = resolve(dataset);
  if (!out.empty()) cfg.out_dir = resolve(out);
  if (!models.empty()) cfg.models = split_list(models);
  if (!input_columns.empty()) cfg.custom_mapping.input = parse_columns("data.input_columns", input_columns);
  if (!target_columns.empty()) cfg.custom_mapping.target = parse_columns("data.target_columns", target_columns);
  cfg.custom_mapping.lag = cfg.lag;
  if (!architecture.empty()) {
    const auto a = parse_architecture(architecture);
    if (!a) throw ConfigError("model.architecture: unknown value '" + architecture + "'");
    cfg.model.architecture = *a;
  }
  if (!kernel.empty()) {
    const auto k = parse_kernel_kind(kernel);
    if (!k) throw ConfigError("model.kernel: unknown value '" + kernel + "'");
    cfg.model.kernel.kind = *k;
  }
  if (!norm.empty()) {
    const auto n = parse_norm_kind(norm);
    if (!n) throw ConfigError("model.norm: unknown value '" + norm + "'");
    cfg.model.norm = *n;
  }
  validate(cfg);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return parse_config(in, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void validate(const RunConfig& cfg) {
  if (cfg.models.empty()) throw ConfigError("data.models: at least one model is required");
  for (const std::string& m : cfg.models) {
    if (m != "object1" && m != "object2" && m != "custom") {
      throw ConfigError("data.models: unknown model '" + m + "' (expected object1, object2 or custom)");
    }
  }
  if (cfg.lag < 1) throw ConfigError("data.lag: must be >= 1");
  if (!(cfg.data.gap_factor > 1.0)) throw ConfigError("data.gap_factor: must be > 1");
  if (!(cfg.data.train_fraction > 0.0 && cfg.data.train_fraction < 1.0)) {
    throw ConfigError("data.train_fraction: must lie in (0, 1)");
  }
  const ModelConfig& m = cfg.model;
  if (m.kernel.kind != RadialKernelKind::thin_plate_spline && !(m.kernel.sigma > 0.0)) {
    throw ConfigError("model.sigma: must be > 0");
  }
  if (m.num_kernels < 1 || m.rbf_out < 1 || m.hidden < 1 || m.branch_out < 1 || m.merge < 1) {
    throw ConfigError("model: every width must be >= 1");
  }
  if (!(m.dropout.p >= 0.0 && m.dropout.p < 1.0)) throw ConfigError("model.dropout: must lie in [0, 1)");
  try {
    cfg.train.validate();
    cfg.adam.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("train/adam: ") + e.what());
  }
  if (cfg.rollout_steps < 1) throw ConfigError("forecast.steps: must be >= 1");
  if (!(cfg.gradcheck.h > 0.0) || !(cfg.gradcheck.tol > 0.0) || cfg.gradcheck.width < 1 ||
      cfg.gradcheck.batch < 1) {
    throw ConfigError("gradcheck: h, tol, width and batch must be positive");
  }
}

std::vector<std::pair<std::string, ColumnMapping>> model_mappings(const RunConfig& cfg) {
  std::vector<std::pair<std::string, ColumnMapping>> out;
  for (const std::string& name : cfg.models) {
    if (name == "object1") {
      out.emplace_back(name, object_mapping(1, cfg.lag));
    } else if (name == "object2") {
      out.emplace_back(name, object_mapping(2, cfg.lag));
    } else {
      out.emplace_back(name, cfg.custom_mapping);
    }
  }
  return out;
}

std::string echo(const RunConfig& cfg) {
  std::ostringstream os;
  std::string models;
  for (const auto& m : cfg.models) models += (models.empty() ? "" : ",") + m;
  os << "data.path = " << cfg.dataset.generic_string() << '\n'
     << "data.models = " << models << '\n'
     << "data.input_columns = " << join(cfg.custom_mapping.input) << '\n'
     << "data.target_columns = " << join(cfg.custom_mapping.target) << '\n'
     << "data.lag = " << cfg.lag << '\n'
     << "data.gap_factor = " << num(cfg.data.gap_factor) << '\n'
     << "data.train_fraction = " << num(cfg.data.train_fraction) << '\n'
     << "model.architecture = " << to_string(cfg.model.architecture) << '\n'
     << "model.kernel = " << to_string(cfg.model.kernel.kind) << '\n'
     << "model.sigma = " << num(cfg.model.kernel.sigma) << '\n'
     << "model.norm = " << to_string(cfg.model.norm) << '\n'
     << "model.normalize = " << (cfg.model.normalize ? "true" : "false") << '\n'
     << "model.num_kernels = " << cfg.model.num_kernels << '\n'
     << "model.rbf_out = " << cfg.model.rbf_out << '\n'
     << "model.hidden = " << cfg.model.hidden << '\n'
     << "model.branch_out = " << cfg.model.branch_out << '\n'
     << "model.merge = " << cfg.model.merge << '\n'
     << "model.dropout = " << num(cfg.model.dropout.p) << '\n'
     << "train.epochs = " << cfg.train.epochs << '\n'
     << "train.batch_size = " << cfg.train.batch_size << '\n'
     << "train.seed = " << cfg.train.seed << '\n'
     << "train.shuffle = " << (cfg.train.shuffle ? "true" : "false") << '\n'
     << "train.checkpoint_every = " << cfg.checkpoint_every << '\n'
     << "train.record_wall_clock = " << (cfg.train.record_wall_clock ? "true" : "false") << '\n'
     << "adam.learning_rate = " << num(cfg.adam.learning_rate) << '\n'
     << "adam.beta1 = " << num(cfg.adam.beta1) << '\n'
     << "adam.beta2 = " << num(cfg.adam.beta2) << '\n'
     << "adam.epsilon = " << num(cfg.adam.epsilon) << '\n'
     << "run.out = " << cfg.out_dir.generic_string() << '\n'
     << "forecast.steps = " << cfg.rollout_steps << '\n'
     << "gradcheck.h = " << num(cfg.gradcheck.h) << '\n'
     << "gradcheck.tol = " << num(cfg.gradcheck.tol) << '\n'
     << "gradcheck.width = " << cfg.gradcheck.width << '\n'
     << "gradcheck.batch = " << cfg.gradcheck.batch << '\n';
  return os.str();
}

}  // namespace chaosnet
