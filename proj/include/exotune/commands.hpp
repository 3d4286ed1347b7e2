#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "exotune/checkpoint.hpp"
#include "exotune/run_config.hpp"

namespace exotune {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitDivergence = 4,
};

/// Training produced a non-finite loss or parameter.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A results file that cannot be parsed.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flag values that win over the config file.
struct Overrides {
  std::optional<Task> task;
  std::optional<std::uint64_t> seed;
  std::optional<GridSpec> grid;
  std::optional<int> episodes;
  std::optional<std::int64_t> steps;
  std::optional<SpeedLaw> speed_law;
};

struct CommandArgs {
  std::optional<std::filesystem::path> config;
  Overrides overrides;
  std::filesystem::path out;
  std::vector<std::filesystem::path> datasets;  // train
  std::filesystem::path checkpoint;             // eval
  std::filesystem::path input;                  // plot
  std::filesystem::path side_out;               // train loss CSV / eval thresholds CSV
};

/// Applies flag overrides. `episodes` means episodes per cell for collect
/// and evaluation episodes for eval and gridscan.
void apply_overrides(RunConfig& config, const Overrides& overrides, const std::string& command);

/// Base seed of evaluation episodes; disjoint from the collection streams.
/// Both eval and gridscan use it, so dynamic and static policies face the
/// same user noise.
std::uint64_t evaluation_seed(std::uint64_t seed);

struct Evaluation {
  std::vector<EpisodeLog> logs;
  std::vector<EpisodeMetrics> episodes;
  EpisodeMetrics mean;
};

Evaluation evaluate_policy(const Policy& policy, const RunConfig& config, int episodes);

/// Static oracle over config.grid with the evaluation episode settings.
OracleTable run_gridscan(const RunConfig& config);

/// Trains on `dataset` for config.train.steps; throws DivergenceError.
/// Losses recorded before a divergence are kept in `losses`.
Learner train_learner(const RunConfig& config, const Dataset& dataset, std::vector<double>& losses);

std::string loss_csv(const std::vector<double>& losses);
std::string oracle_csv(const OracleTable& table);
std::string metrics_csv(const Evaluation& eval);
std::string thresholds_csv(const Evaluation& eval, double dt);

std::vector<double> parse_loss_csv(const std::string& text);
std::vector<OracleCell> parse_oracle_csv(const std::string& text);

/// Runs one of collect|train|eval|gridscan|plot and maps failures to exit
/// codes: 2 config or malformed input, 3 I/O, 4 divergence.
int run_command(const std::string& command, const CommandArgs& args, std::ostream& out,
                std::ostream& err);

}  // namespace exotune
