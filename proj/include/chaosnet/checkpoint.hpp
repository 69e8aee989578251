#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "chaosnet/data.hpp"
#include "chaosnet/model.hpp"

namespace chaosnet {

// A serialised model: architecture header, column mapping, fitted scaler and
// every parameter tensor in canonical layer order.
//
// JSON layout (keys in this order):
//   format      "chaosnet.checkpoint"
//   version     1
//   architecture {kind, kernel, sigma, norm, normalize, num_kernels, rbf_out,
//                 hidden, branch_out, merge, dropout}
//   mapping     {input: [3 names], target: [3 names], lag}
//   scaler      [{column, min, max}, ...]
//   parameters  [{layer, name, shape, values}, ...]   values row-major
struct Checkpoint {
  struct NamedTensor {
    std::string layer;
    std::string name;
    Tensor value;
  };

  ModelConfig model;
  ColumnMapping mapping;
  Scaler scaler;
  std::vector<NamedTensor> parameters;
};

Checkpoint make_checkpoint(Model& model, const ColumnMapping& mapping, const Scaler& scaler);

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws ConfigError on malformed content.
Checkpoint read_checkpoint(std::istream& in);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies parameter values into `model`. Throws ConfigError if any layer, name or
// shape differs from the model's canonical parameter list.
void restore(Model& model, const Checkpoint& ckpt);
std::unique_ptr<Model> instantiate(const Checkpoint& ckpt);

}  // namespace chaosnet
