#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "chaosnet/data.hpp"
#include "chaosnet/model.hpp"
#include "chaosnet/training.hpp"

namespace chaosnet {

using Vec3 = std::array<double, 3>;

inline constexpr std::size_t kDefaultRolloutSteps = 100;

// Closed-loop trajectory: x_0 = seed, x_{k+1} = model(x_k).
struct Rollout {
  std::array<Column, 3> columns{};
  Vec3 seed_input{};                 // scaled
  std::size_t steps = 0;             // requested
  std::vector<Vec3> scaled;          // raw model outputs x_1 .. x_n
  std::vector<Vec3> predictions;     // scaled outputs mapped back to data units
  std::optional<std::vector<Vec3>> truth;  // data units, same length as predictions
  std::optional<std::size_t> truncated_at;  // 1-based step whose output was non-finite
};

// Throws ConfigError when the mapping's input and target columns differ (the
// output cannot be fed back) or steps == 0. Stops early on a non-finite output.
Rollout rollout(Model& model, const Scaler& scaler, const ColumnMapping& mapping, const Vec3& seed_input,
                std::size_t steps);

// Seeds from windows[start].input and attaches the observed continuation when
// every step lies in the same segment as the seed.
Rollout rollout_from(Model& model, const Scaler& scaler, const ColumnMapping& mapping,
                     std::span<const Window> windows, std::size_t start, std::size_t steps);

struct MetricsReport {
  std::array<Column, 3> columns{};
  std::size_t samples = 0;
  Vec3 mse{};
  Vec3 rmse{};
  double overall_mse = 0.0;
  std::vector<double> horizon;  // mean squared error across dimensions per rollout step
};

// One-step-ahead errors in data units over the test windows (eval mode).
MetricsReport one_step_metrics(Model& model, const Scaler& scaler, const ColumnMapping& mapping,
                               std::span<const Window> test_windows);

// Per-dimension errors and the horizon curve of a rollout carrying ground truth.
MetricsReport rollout_metrics(const Rollout& r);

// Flat JSON object: columns, samples, mse_<col>, rmse_<col>, mse_overall, horizon_mse.
std::string metrics_json(const MetricsReport& report);

// `step,pred_1,pred_2,pred_3[,true_1,true_2,true_3]`, one row per predicted step.
void write_trajectory_csv(std::ostream& out, const Rollout& r);
void export_trajectory(const Rollout& r, const std::filesystem::path& path);
// Reads back predictions (and truth, when present) from a trajectory file.
Rollout read_trajectory_csv(std::istream& in);

void export_losses(const TrainHistory& history, const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool points = false;  // scatter markers instead of a polyline
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;  // at most two
  bool log_y = false;
};

// Self-contained SVG line/scatter figure with axes, ticks, labels and a legend.
void write_svg(std::ostream& out, const PlotSpec& spec);
void render_plot(const PlotSpec& spec, const std::filesystem::path& path);

}  // namespace chaosnet
