#include "chaosnet/commands.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "chaosnet/checkpoint.hpp"
#include "chaosnet/errors.hpp"
#include "chaosnet/forecast.hpp"

namespace chaosnet {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "chaosnet 1.0.0";

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

struct LoadedData {
  std::vector<Record> records;
  std::string sha256;
};

LoadedData load_data(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw DataError("no dataset configured (data.path)");
  if (!fs::is_regular_file(cfg.dataset)) throw DataError("dataset not found: " + cfg.dataset.string());
  return {parse_csv_file(cfg.dataset), sha256_file(cfg.dataset)};
}

json config_json(const RunConfig& cfg) {
  json j = json::object();
  std::istringstream in(echo(cfg));
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

struct TrainedRun {
  std::string name;
  Architecture architecture;
  std::size_t parameters = 0;
  std::size_t train_windows = 0, test_windows = 0, skipped_segments = 0;
  TrainHistory history;
  std::string checkpoint_file, losses_file;
};

double best_train_loss(const TrainHistory& h) {
  double best = INFINITY;
  for (const auto& r : h.epochs) best = std::min(best, r.train_loss);
  return best;
}

json run_json(const TrainedRun& r) {
  const auto& last = r.history.epochs.back();
  json j = {{"name", r.name},
            {"architecture", std::string(to_string(r.architecture))},
            {"parameters", r.parameters},
            {"train_windows", r.train_windows},
            {"test_windows", r.test_windows},
            {"skipped_segments", r.skipped_segments},
            {"epochs", r.history.epochs.size()},
            {"iterations", r.history.batch_losses.size()},
            {"final_train_loss", last.train_loss},
            {"best_train_loss", best_train_loss(r.history)}};
  if (last.test_loss) j["final_test_loss"] = *last.test_loss;
  j["checkpoint"] = r.checkpoint_file;
  j["losses"] = r.losses_file;
  return j;
}

void write_manifest(const fs::path& path, const std::string& command, const RunConfig& cfg,
                    const LoadedData& data, const std::vector<TrainedRun>& runs) {
  json j;
  j["tool"] = kVersion;
  j["command"] = command;
  j["seed"] = cfg.train.seed;
  j["dataset"] = {{"path", cfg.dataset.generic_string()}, {"sha256", data.sha256}, {"records", data.records.size()}};
  j["config"] = config_json(cfg);
  json arr = json::array();
  for (const auto& r : runs) arr.push_back(run_json(r));
  j["runs"] = std::move(arr);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write manifest '" + path.string() + "'");
  out << j.dump(1) << '\n';
}

PlotSpec epoch_loss_plot(const std::string& title, const TrainHistory& h) {
  PlotSeries train{"train", {}, {}, false}, test{"test", {}, {}, false};
  for (const auto& r : h.epochs) {
    train.x.push_back(static_cast<double>(r.epoch));
    train.y.push_back(r.train_loss);
    if (r.test_loss) {
      test.x.push_back(static_cast<double>(r.epoch));
      test.y.push_back(*r.test_loss);
    }
  }
  PlotSpec spec{title, "epoch", "MSE (scaled units)", {train}, true};
  if (!test.x.empty()) spec.series.push_back(test);
  return spec;
}

// Trains one model on one mapping and writes `<stem>.checkpoint.json`, `<stem>.losses.csv`.
TrainedRun train_one(const std::string& name, const std::string& stem, const ColumnMapping& mapping,
                     const ModelConfig& model_cfg, const RunConfig& cfg, const LoadedData& data,
                     std::ostream& log) {
  const Dataset ds = prepare_dataset(data.records, mapping, cfg.data);
  if (ds.skipped_segments > 0) {
    log << "warning: " << ds.skipped_segments << " segment(s) shorter than lag + 1 were skipped\n";
  }
  auto model = make_model(model_cfg);
  Rng init_rng(cfg.train.seed);
  model->initialize(windows_to_inputs(ds.train), init_rng);

  TrainedRun run;
  run.name = name;
  run.architecture = model_cfg.architecture;
  run.parameters = model->count_parameters();
  run.train_windows = ds.train.size();
  run.test_windows = ds.test.size();
  run.skipped_segments = ds.skipped_segments;
  log << "[" << stem << "] " << describe(model_cfg) << ", " << run.parameters << " parameters, "
      << run.train_windows << " train / " << run.test_windows << " test windows\n";

  const auto on_epoch = [&](std::size_t epoch, Model& m) {
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && epoch != cfg.train.epochs) {
      std::ostringstream fname;
      fname << stem << ".epoch" << std::setw(5) << std::setfill('0') << epoch << ".checkpoint.json";
      save_checkpoint(cfg.out_dir / fname.str(), make_checkpoint(m, mapping, ds.scaler));
    }
  };
  run.history = train(*model, ds.train, ds.test, cfg.train, cfg.adam, on_epoch);
  const auto& last = run.history.epochs.back();
  log << "[" << stem << "] epoch " << last.epoch << ": train " << last.train_loss;
  if (last.test_loss) log << ", test " << *last.test_loss;
  log << '\n';

  run.checkpoint_file = stem + ".checkpoint.json";
  run.losses_file = stem + ".losses.csv";
  save_checkpoint(cfg.out_dir / run.checkpoint_file, make_checkpoint(*model, mapping, ds.scaler));
  export_losses(run.history, cfg.out_dir / run.losses_file);
  render_plot(epoch_loss_plot(stem + " loss", run.history), cfg.out_dir / (stem + ".losses.svg"));
  return run;
}

void ensure_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.out_dir.string() + "': " + ec.message());
}

bool compatible(const ModelConfig& a, const ModelConfig& b) {
  return a.architecture == b.architecture && a.kernel.kind == b.kernel.kind && a.norm == b.norm &&
         a.normalize == b.normalize && a.num_kernels == b.num_kernels && a.rbf_out == b.rbf_out &&
         a.hidden == b.hidden && a.branch_out == b.branch_out && a.merge == b.merge;
}

struct LoadedModel {
  Checkpoint checkpoint;
  std::unique_ptr<Model> model;
  std::string stem;
};

LoadedModel load_model(const RunConfig& cfg, const CommandOptions& opts) {
  fs::path path;
  if (opts.checkpoint) {
    path = *opts.checkpoint;
  } else {
    path = cfg.out_dir / (model_mappings(cfg).front().first + ".checkpoint.json");
  }
  LoadedModel lm{load_checkpoint(path), nullptr, path.filename().string()};
  if (const auto pos = lm.stem.find(".checkpoint.json"); pos != std::string::npos) lm.stem.erase(pos);
  if (!compatible(lm.checkpoint.model, cfg.model)) {
    throw ConfigError("checkpoint architecture " + describe(lm.checkpoint.model) +
                      " is incompatible with configured architecture " + describe(cfg.model));
  }
  lm.model = instantiate(lm.checkpoint);
  return lm;
}

}  // namespace

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

RunConfig resolve_config(const CommandOptions& opts) {
  RunConfig cfg = opts.config.empty() ? RunConfig{} : load_config(opts.config);
  if (opts.seed) cfg.train.seed = *opts.seed;
  if (opts.out) cfg.out_dir = *opts.out;
  if (opts.steps) cfg.rollout_steps = *opts.steps;
  validate(cfg);
  return cfg;
}

int cmd_train(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve_config(opts);
    const LoadedData data = load_data(cfg);
    ensure_out_dir(cfg);
    std::vector<TrainedRun> runs;
    for (const auto& [name, mapping] : model_mappings(cfg)) {
      runs.push_back(train_one(name, name, mapping, cfg.model, cfg, data, log));
    }
    write_manifest(cfg.out_dir / "manifest.json", "train", cfg, data, runs);
    return int(kExitOk);
  });
}

int cmd_compare(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve_config(opts);
    const LoadedData data = load_data(cfg);
    ensure_out_dir(cfg);
    const auto [name, mapping] = model_mappings(cfg).front();

    std::vector<TrainedRun> runs;
    for (Architecture arch : {Architecture::single_sequential, Architecture::multi_branch}) {
      ModelConfig mc = cfg.model;
      mc.architecture = arch;
      runs.push_back(train_one(name, name + "." + std::string(to_string(arch)), mapping, mc, cfg, data, log));
    }

    std::ofstream summary(cfg.out_dir / "compare_summary.csv", std::ios::binary);
    summary << "architecture,parameters,final_train_loss,best_train_loss,final_test_loss\n";
    log << std::left << std::setw(20) << "architecture" << std::setw(12) << "parameters" << std::setw(18)
        << "final_train_loss" << std::setw(18) << "best_train_loss" << "final_test_loss\n";
    PlotSpec plot{name + ": loss over iterations", "iteration", "batch MSE (scaled units)", {}, true};
    for (const TrainedRun& r : runs) {
      const auto& last = r.history.epochs.back();
      const double test = last.test_loss.value_or(NAN);
      summary << to_string(r.architecture) << ',' << r.parameters << ',' << std::setprecision(17)
              << last.train_loss << ',' << best_train_loss(r.history) << ',' << test << '\n';
      log << std::left << std::setw(20) << to_string(r.architecture) << std::setw(12) << r.parameters
          << std::setw(18) << last.train_loss << std::setw(18) << best_train_loss(r.history) << test << '\n';
      PlotSeries s{std::string(to_string(r.architecture)), {}, r.history.batch_losses, false};
      for (std::size_t i = 0; i < s.y.size(); ++i) s.x.push_back(static_cast<double>(i + 1));
      plot.series.push_back(std::move(s));
    }
    render_plot(plot, cfg.out_dir / (name + ".compare.svg"));
    write_manifest(cfg.out_dir / "manifest.json", "compare", cfg, data, runs);
    return int(kExitOk);
  });
}

int cmd_rollout(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve_config(opts);
    LoadedModel lm = load_model(cfg, opts);
    const LoadedData data = load_data(cfg);
    ensure_out_dir(cfg);
    const Checkpoint& ck = lm.checkpoint;
    const Dataset ds = prepare_dataset(data.records, ck.mapping, cfg.data, ck.scaler);

    const Rollout r = rollout_from(*lm.model, ck.scaler, ck.mapping, ds.test, 0, cfg.rollout_steps);
    if (r.truncated_at) log << "warning: rollout truncated at step " << *r.truncated_at << " (non-finite output)\n";
    export_trajectory(r, cfg.out_dir / (lm.stem + ".trajectory.csv"));

    PlotSpec plot{lm.stem + ": closed-loop rollout", std::string(to_string(r.columns[1])),
                  std::string(to_string(r.columns[2])), {}, false};
    if (r.truth) {
      PlotSeries truth{"observed", {}, {}, true};
      for (const Vec3& v : *r.truth) truth.x.push_back(v[1]), truth.y.push_back(v[2]);
      plot.series.push_back(std::move(truth));
    }
    PlotSeries pred{"predicted", {}, {}, false};
    for (const Vec3& v : r.predictions) pred.x.push_back(v[1]), pred.y.push_back(v[2]);
    plot.series.push_back(std::move(pred));
    render_plot(plot, cfg.out_dir / (lm.stem + ".trajectory.svg"));

    log << "rollout: " << r.predictions.size() << " steps written to "
        << (cfg.out_dir / (lm.stem + ".trajectory.csv")).string() << '\n';
    if (r.truth) {
      const MetricsReport m = rollout_metrics(r);
      std::ofstream(cfg.out_dir / (lm.stem + ".rollout_metrics.json"), std::ios::binary) << metrics_json(m);
      log << "rollout MSE (data units): " << m.overall_mse << '\n';
    }
    return int(r.truncated_at ? kExitNumeric : kExitOk);
  });
}

int cmd_evaluate(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve_config(opts);
    LoadedModel lm = load_model(cfg, opts);
    const LoadedData data = load_data(cfg);
    ensure_out_dir(cfg);
    const Checkpoint& ck = lm.checkpoint;
    const Dataset ds = prepare_dataset(data.records, ck.mapping, cfg.data, ck.scaler);
    const MetricsReport m = one_step_metrics(*lm.model, ck.scaler, ck.mapping, ds.test);
    std::ofstream(cfg.out_dir / (lm.stem + ".metrics.json"), std::ios::binary) << metrics_json(m);
    log << "one-step MSE over " << m.samples << " test windows: " << m.overall_mse << " (";
    for (std::size_t d = 0; d < 3; ++d) log << (d ? ", " : "") << to_string(m.columns[d]) << ' ' << m.mse[d];
    log << ")\n";
    return int(kExitOk);
  });
}

int cmd_gradcheck(const CommandOptions& opts, std::ostream& log, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = resolve_config(opts);
    ModelConfig mc = cfg.model;
    const std::size_t w = cfg.gradcheck.width;
    for (std::size_t* width : {&mc.num_kernels, &mc.rbf_out, &mc.hidden, &mc.branch_out, &mc.merge}) {
      *width = std::min(*width, w);
    }
    auto model = make_model(mc);
    Rng rng(cfg.train.seed);
    // Central differences are meaningless across a ReLU kink; keep every
    // pre-activation at least 100 steps away from it.
    const GradCheckSample s = draw_gradcheck_sample(*model, cfg.gradcheck.batch, rng, 100.0 * cfg.gradcheck.h);
    const GradCheckReport report = gradient_check(*model, s.inputs, s.targets, cfg.gradcheck.h, cfg.gradcheck.tol);
    log << "gradcheck " << describe(mc) << ": " << report.checked << " entries, worst relative error "
        << report.worst_rel_error << " at " << report.worst.parameter << "[" << report.worst.index
        << "] (tolerance " << cfg.gradcheck.tol << ")\n";
    if (!report.passed()) {
      err << "gradcheck failed: " << report.failures.size() << " entries at or above tolerance\n";
      return int(kExitNumeric);
    }
    return int(kExitOk);
  });
}

}  // namespace chaosnet
