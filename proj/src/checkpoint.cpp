#include "chaosnet/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "chaosnet/errors.hpp"

namespace chaosnet {

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kFormat = "chaosnet.checkpoint";
constexpr int kVersion = 1;

json columns_json(const std::array<Column, 3>& cols) {
  json arr = json::array();
  for (Column c : cols) arr.push_back(std::string(to_string(c)));
  return arr;
}

std::array<Column, 3> columns_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ConfigError("checkpoint: mapping needs 3 column names");
  std::array<Column, 3> out{};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto c = parse_column(j[i].get<std::string>());
    if (!c) throw ConfigError("checkpoint: unknown column '" + j[i].get<std::string>() + "'");
    out[i] = *c;
  }
  return out;
}

}  // namespace

Checkpoint make_checkpoint(Model& model, const ColumnMapping& mapping, const Scaler& scaler) {
  Checkpoint ckpt{model.config(), mapping, scaler, {}};
  for (const ParameterRef& ref : model.parameters()) {
    ckpt.parameters.push_back({ref.layer, ref.parameter->name, ref.parameter->value});
  }
  return ckpt;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const ModelConfig& m = ckpt.model;
  json j;
  j["format"] = kFormat;
  j["version"] = kVersion;
  j["architecture"] = {
      {"kind", std::string(to_string(m.architecture))},
      {"kernel", std::string(to_string(m.kernel.kind))},
      {"sigma", m.kernel.sigma},
      {"norm", std::string(to_string(m.norm))},
      {"normalize", m.normalize},
      {"num_kernels", m.num_kernels},
      {"rbf_out", m.rbf_out},
      {"hidden", m.hidden},
      {"branch_out", m.branch_out},
      {"merge", m.merge},
      {"dropout", m.dropout.p},
  };
  j["mapping"] = {{"input", columns_json(ckpt.mapping.input)},
                  {"target", columns_json(ckpt.mapping.target)},
                  {"lag", ckpt.mapping.lag}};
  json scaler = json::array();
  for (const auto& r : ckpt.scaler.ranges()) {
    scaler.push_back({{"column", std::string(to_string(r.column))}, {"min", r.min}, {"max", r.max}});
  }
  j["scaler"] = std::move(scaler);
  json params = json::array();
  for (const auto& p : ckpt.parameters) {
    params.push_back({{"layer", p.layer}, {"name", p.name}, {"shape", p.value.shape()},
                      {"values", p.value.values()}});
  }
  j["parameters"] = std::move(params);
  out << j.dump(1) << '\n';
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(out, ckpt);
  if (!out) throw std::runtime_error("error writing checkpoint '" + path.string() + "'");
}

Checkpoint read_checkpoint(std::istream& in) {
  try {
    const json j = json::parse(in);
    if (j.at("format") != kFormat) throw ConfigError("checkpoint: unrecognised format tag");
    if (j.at("version") != kVersion) throw ConfigError("checkpoint: unsupported version");

    Checkpoint ckpt;
    const json& a = j.at("architecture");
    const auto arch = parse_architecture(a.at("kind").get<std::string>());
    const auto kernel = parse_kernel_kind(a.at("kernel").get<std::string>());
    const auto norm = parse_norm_kind(a.at("norm").get<std::string>());
    if (!arch || !kernel || !norm) throw ConfigError("checkpoint: unknown architecture, kernel or norm");
    ckpt.model.architecture = *arch;
    ckpt.model.kernel = {*kernel, a.at("sigma").get<double>()};
    ckpt.model.norm = *norm;
    ckpt.model.normalize = a.at("normalize").get<bool>();
    ckpt.model.num_kernels = a.at("num_kernels").get<std::size_t>();
    ckpt.model.rbf_out = a.at("rbf_out").get<std::size_t>();
    ckpt.model.hidden = a.at("hidden").get<std::size_t>();
    ckpt.model.branch_out = a.at("branch_out").get<std::size_t>();
    ckpt.model.merge = a.at("merge").get<std::size_t>();
    ckpt.model.dropout.p = a.at("dropout").get<double>();

    const json& m = j.at("mapping");
    ckpt.mapping.input = columns_from(m.at("input"));
    ckpt.mapping.target = columns_from(m.at("target"));
    ckpt.mapping.lag = m.at("lag").get<std::size_t>();

    std::vector<Scaler::Range> ranges;
    for (const json& r : j.at("scaler")) {
      const auto c = parse_column(r.at("column").get<std::string>());
      if (!c) throw ConfigError("checkpoint: unknown scaler column");
      ranges.push_back({*c, r.at("min").get<double>(), r.at("max").get<double>()});
    }
    ckpt.scaler = Scaler(std::move(ranges));

    for (const json& p : j.at("parameters")) {
      ckpt.parameters.push_back({p.at("layer").get<std::string>(), p.at("name").get<std::string>(),
                                 Tensor(p.at("shape").get<std::vector<std::size_t>>(),
                                        p.at("values").get<std::vector<double>>())});
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("checkpoint: malformed JSON: ") + e.what());
  } catch (const ContractError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

void restore(Model& model, const Checkpoint& ckpt) {
  const auto refs = model.parameters();
  if (refs.size() != ckpt.parameters.size()) {
    throw ConfigError("checkpoint holds " + std::to_string(ckpt.parameters.size()) +
                      " parameter tensors, model " + describe(model.config()) + " expects " +
                      std::to_string(refs.size()));
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& src = ckpt.parameters[i];
    Parameter& dst = *refs[i].parameter;
    if (src.layer != refs[i].layer || src.name != dst.name || !src.value.same_shape(dst.value)) {
      throw ConfigError("checkpoint tensor " + src.layer + "." + src.name + " " +
                        shape_string(src.value.shape()) + " does not match model tensor " +
                        refs[i].qualified_name() + " " + shape_string(dst.value.shape()));
    }
  }
  for (std::size_t i = 0; i < refs.size(); ++i) refs[i].parameter->value = ckpt.parameters[i].value;
  model.zero_grad();
}

std::unique_ptr<Model> instantiate(const Checkpoint& ckpt) {
  auto model = make_model(ckpt.model);
  restore(*model, ckpt);
  return model;
}

}  // namespace chaosnet
