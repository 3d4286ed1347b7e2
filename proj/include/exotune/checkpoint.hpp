#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "exotune/learner.hpp"
#include "exotune/run_config.hpp"

namespace exotune {

inline constexpr int kCheckpointSchemaVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LossSummary {
  std::int64_t steps = 0;
  std::optional<double> initial_smoothed;
  std::optional<double> final_smoothed;
};

struct Checkpoint {
  int schema_version = kCheckpointSchemaVersion;
  std::int64_t step = 0;
  RunConfig config;
  std::string sim_config_hash;
  std::vector<Agent> agents;
  LossSummary loss;
};

/// Snapshot of a learner together with the config that produced it.
Checkpoint make_checkpoint(const Learner& learner, const RunConfig& config, LossSummary loss);

/// Rebuilds a learner whose select_actions matches the saved one exactly.
Learner restore_learner(const Checkpoint& checkpoint);

nlohmann::json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Mean of the first / last `window` losses; empty when there are none.
LossSummary summarize_losses(const std::vector<double>& losses, std::size_t window = 100);

}  // namespace exotune
