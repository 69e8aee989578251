#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "chaosnet/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-branch RBF/attention forecaster for attractor time series"};
  app.require_subcommand(1);

  chaosnet::CommandOptions opts;
  std::string config, out, checkpoint;
  std::uint64_t seed = 0;
  std::size_t steps = 0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "Run configuration file (INI sections)");
    cmd->add_option("--seed", seed, "Override train.seed");
    cmd->add_option("--out", out, "Override run.out (output directory)");
  };
  auto* train = app.add_subcommand("train", "Train one model per configured column mapping");
  auto* compare = app.add_subcommand("compare", "Train single-sequential and multi-branch models side by side");
  auto* rollout = app.add_subcommand("rollout", "Closed-loop forecast from the first test window");
  auto* evaluate = app.add_subcommand("evaluate", "One-step metrics on the test windows");
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the model gradients");
  for (auto* cmd : {train, compare, rollout, evaluate, gradcheck}) add_common(cmd);
  for (auto* cmd : {rollout, evaluate}) {
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint file (default: <out>/<first model>.checkpoint.json)");
  }
  rollout->add_option("--steps", steps, "Number of closed-loop predictions (default 100)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : chaosnet::kExitConfig;
  }

  opts.config = config;
  for (auto* cmd : app.get_subcommands()) {
    if (cmd->count("--seed")) opts.seed = seed;
    if (cmd->count("--out")) opts.out = out;
    if (cmd->get_option_no_throw("--steps") && cmd->count("--steps")) opts.steps = steps;
    if (cmd->get_option_no_throw("--checkpoint") && cmd->count("--checkpoint")) opts.checkpoint = checkpoint;
  }

  if (train->parsed()) return chaosnet::cmd_train(opts, std::cout, std::cerr);
  if (compare->parsed()) return chaosnet::cmd_compare(opts, std::cout, std::cerr);
  if (rollout->parsed()) return chaosnet::cmd_rollout(opts, std::cout, std::cerr);
  if (evaluate->parsed()) return chaosnet::cmd_evaluate(opts, std::cout, std::cerr);
  return chaosnet::cmd_gradcheck(opts, std::cout, std::cerr);
}
