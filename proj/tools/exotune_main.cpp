// exotune: collect | train | eval | gridscan | plot
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "exotune/commands.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> task;
  std::optional<std::string> grid;
  std::optional<int> episodes;
  std::optional<std::int64_t> steps;
  std::optional<std::string> speed_law;
  std::vector<std::string> datasets;
  std::string checkpoint;
  std::string input;
  std::string side_out;
};

void common_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run config");
  cmd->add_option("--seed", f.seed, "base random seed");
  cmd->add_option("--out", f.out, "output path");
}

void sim_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--task", f.task, "vertical|horizontal");
  cmd->add_option("--speed-law", f.speed_law, "paper-literal|offset");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline multi-agent tuning of exoskeleton effort thresholds"};
  app.require_subcommand(1);
  Flags f;

  auto* collect = app.add_subcommand("collect", "roll out the static threshold grid and write a dataset");
  common_flags(collect, f);
  sim_flags(collect, f);
  collect->add_option("--grid", f.grid, "threshold grid low:high:step");
  collect->add_option("--episodes", f.episodes, "episodes per grid cell");

  auto* train = app.add_subcommand("train", "train the threshold agents on one or more datasets");
  common_flags(train, f);
  train->add_option("--dataset", f.datasets, "dataset file (repeat to train on the union)");
  train->add_option("--steps", f.steps, "training steps");
  train->add_option("--loss-out", f.side_out, "loss CSV path (default: <out>.loss.csv)");

  auto* eval = app.add_subcommand("eval", "roll out the trained policy and report metrics");
  common_flags(eval, f);
  sim_flags(eval, f);
  eval->add_option("--checkpoint", f.checkpoint, "checkpoint from train");
  eval->add_option("--episodes", f.episodes, "evaluation episodes");
  eval->add_option("--trace-out", f.side_out, "thresholds-over-time CSV (default: <out>.thresholds.csv)");

  auto* gridscan = app.add_subcommand("gridscan", "evaluate every static threshold pair");
  common_flags(gridscan, f);
  sim_flags(gridscan, f);
  gridscan->add_option("--grid", f.grid, "threshold grid low:high:step");
  gridscan->add_option("--episodes", f.episodes, "episodes per cell");

  auto* plot = app.add_subcommand("plot", "render a dataset, loss, oracle or thresholds file as SVG");
  plot->add_option("--input", f.input, "dataset or results CSV")->required();
  plot->add_option("--out", f.out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exotune::kExitConfig;
  }

  exotune::CommandArgs args;
  try {
    if (!f.config.empty()) args.config = f.config;
    args.out = f.out;
    args.overrides.seed = f.seed;
    if (f.task) args.overrides.task = exotune::task_from_string(*f.task);
    if (f.grid) args.overrides.grid = exotune::GridSpec::parse(*f.grid);
    args.overrides.episodes = f.episodes;
    args.overrides.steps = f.steps;
    if (f.speed_law) args.overrides.speed_law = exotune::speed_law_from_string(*f.speed_law);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exotune::kExitConfig;
  }
  for (const auto& d : f.datasets) args.datasets.emplace_back(d);
  args.checkpoint = f.checkpoint;
  args.input = f.input;
  args.side_out = f.side_out;

  const std::string command = app.get_subcommands().front()->get_name();
  return exotune::run_command(command, args, std::cout, std::cerr);
}
