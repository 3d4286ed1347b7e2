#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "exotune/datastore.hpp"
#include "exotune/device_sim.hpp"
#include "exotune/learner.hpp"

namespace exotune {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunPaths {
  std::vector<std::string> datasets;
  std::string checkpoint;
  std::string out;
};

/// Everything a command needs. The trajectory follows the task unless the
/// config file spells one out.
struct RunConfig {
  Task task = Task::kVertical;
  std::uint64_t seed = 0;
  SimConfig sim;
  VirtualUserConfig user;
  bool custom_trajectory = false;
  RewardConfig reward;
  TrainConfig train;
  GridSpec grid;
  int collect_episodes = 10;
  double collect_seconds = 40.0;
  int eval_episodes = 20;
  double eval_seconds = 40.0;
  RunPaths paths;

  /// User model with task and trajectory resolved.
  VirtualUserConfig effective_user() const;
  /// Training config with the run seed applied.
  TrainConfig effective_train() const;
  void validate() const;
};

/// Parses a config object. Every key is optional; unknown keys are errors.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace exotune
