#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "chaosnet/data.hpp"
#include "chaosnet/model.hpp"
#include "chaosnet/training.hpp"

namespace chaosnet {

struct GradcheckConfig {
  double h = 1e-5;
  double tol = 1e-4;
  std::size_t width = 8;  // every layer width is capped at this value
  std::size_t batch = 4;
};

// Everything a run needs. Loaded from an INI-style file:
//
//   [data]      path, models, input_columns, target_columns, lag, gap_factor, train_fraction
//   [model]     architecture, kernel, sigma, norm, normalize, num_kernels, rbf_out,
//               hidden, branch_out, merge, dropout
//   [train]     epochs, batch_size, seed, shuffle, checkpoint_every, record_wall_clock
//   [adam]      learning_rate, beta1, beta2, epsilon
//   [run]       out
//   [forecast]  steps
//   [gradcheck] h, tol, width, batch
//
// Unknown sections or keys are rejected. Relative paths resolve against the
// directory holding the config file.
struct RunConfig {
  std::filesystem::path dataset;
  // Named mappings to train: object1, object2, or custom (input_columns/target_columns).
  std::vector<std::string> models{"object1", "object2"};
  ColumnMapping custom_mapping;
  std::size_t lag = 1;
  DataOptions data;
  ModelConfig model;
  TrainConfig train;
  AdamHyper adam;
  std::filesystem::path out_dir = "runs/default";
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only
  std::size_t rollout_steps = 100;
  GradcheckConfig gradcheck;
};

// Throws ConfigError with the offending key on any parse or validation failure.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);
void validate(const RunConfig& cfg);

// Resolved (name, mapping) pairs in the configured order.
std::vector<std::pair<std::string, ColumnMapping>> model_mappings(const RunConfig& cfg);

// Canonical `section.key = value` listing of every resolved setting, one per line.
std::string echo(const RunConfig& cfg);

}  // namespace chaosnet
