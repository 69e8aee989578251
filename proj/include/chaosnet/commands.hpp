#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "chaosnet/config.hpp"

namespace chaosnet {

// Process exit codes shared by every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 1,   // bad config, incompatible checkpoint
  kExitData = 2,     // missing or malformed dataset
  kExitNumeric = 3,  // non-finite values, failed gradient check
};

struct CommandOptions {
  std::filesystem::path config{};  // empty: built-in defaults
  std::optional<std::uint64_t> seed{};
  std::optional<std::filesystem::path> out{};
  std::optional<std::size_t> steps{};
  std::optional<std::filesystem::path> checkpoint{};
};

// Loads the config named in `opts` and applies the flag overrides.
RunConfig resolve_config(const CommandOptions& opts);

// Each command prints progress to `log`, a one-line diagnosis to `err` on
// failure, and returns one of the ExitCode values.
int cmd_train(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_compare(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_rollout(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_evaluate(const CommandOptions& opts, std::ostream& log, std::ostream& err);
int cmd_gradcheck(const CommandOptions& opts, std::ostream& log, std::ostream& err);

// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace chaosnet
