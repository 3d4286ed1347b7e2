#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "exotune/device_sim.hpp"
#include "exotune/qfunctional.hpp"

namespace exotune {

/// Which state's efforts the reward is measured on.
enum class RewardState { kCurrent, kNext };

std::string to_string(RewardState state);
RewardState reward_state_from_string(const std::string& name);

struct RewardConfig {
  double c = 10.0;
  RewardState state = RewardState::kCurrent;

  void validate() const;
};

/// d = |dE - th_d| for the dominant muscle; on an effort tie dE = 0 and d is
/// the distance to the nearer threshold.
double threshold_distance(const Observation& s, const ThresholdAction& a);

/// r = exp(-d / c), in (0, 1].
double compute_reward(const Observation& s, const ThresholdAction& a, const RewardConfig& config);

/// Reward for a logged step, honoring RewardConfig::state.
double step_reward(const Observation& s, const ThresholdAction& a, const Observation& s_next,
                   const RewardConfig& config);

/// [p_norm, E_b / 100, E_t / 100]; throws on out-of-range states.
Eigen::Vector3d normalize_state(const Observation& s, const SimConfig& config);
Observation denormalize_state(const Eigen::Vector3d& v, const SimConfig& config);

struct Transition {
  std::int64_t episode_id = 0;
  std::int64_t step = 0;
  Observation state;
  ThresholdAction action;
  double reward = 0.0;
  Observation next_state;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

inline constexpr int kDatasetSchemaVersion = 1;

struct DatasetHeader {
  int schema_version = kDatasetSchemaVersion;
  std::string task;
  std::string sim_config_hash;
  GridSpec grid;
  std::uint64_t seed = 0;
  double dt = 0.02;
  std::int64_t episode_count = 0;

  bool operator==(const DatasetHeader& o) const {
    return schema_version == o.schema_version && task == o.task &&
           sim_config_hash == o.sim_config_hash && grid.low == o.grid.low &&
           grid.high == o.grid.high && grid.step == o.grid.step && seed == o.seed &&
           dt == o.dt && episode_count == o.episode_count;
  }
};

struct Dataset {
  DatasetHeader header;
  std::vector<Transition> transitions;

  bool operator==(const Dataset&) const = default;
};

/// Problems reading a dataset: version mismatch, unparsable or
/// invariant-violating records. `record_index` is 0-based over transition
/// records, or -1 for the header.
class DatasetError : public std::runtime_error {
 public:
  DatasetError(const std::string& what, std::int64_t record_index)
      : std::runtime_error(what), record_index_(record_index) {}
  std::int64_t record_index() const { return record_index_; }

 private:
  std::int64_t record_index_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Field order of a transition record.
inline constexpr const char* kTransitionFields =
    "episode_id,step,p,E_b,E_t,th_b,th_t,r,p_next,E_b_next,E_t_next,done";

void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

/// Checks schema version and per-record invariants; throws DatasetError.
void validate_dataset(const Dataset& dataset);

/// Uniform sampling with replacement.
std::vector<Transition> sample_batch(const Dataset& dataset, int batch_size, Rng& rng);

/// Recomputes every reward from the logged state/action fields.
Dataset relabel_rewards(Dataset dataset, const RewardConfig& config);

/// Concatenates datasets, renumbering episodes so ids stay unique.
Dataset merge_datasets(const std::vector<Dataset>& parts, const std::string& task_name);

/// Builds a dataset by rolling out every (biceps, triceps) grid cell for
/// `episodes_per_cell` episodes with fixed thresholds.
Dataset grid_collect(const VirtualUserConfig& user, const GridSpec& grid, int episodes_per_cell,
                     const SimConfig& config, const RewardConfig& reward,
                     double episode_seconds, std::uint64_t seed);

/// Stable hex digest of the simulator and user configuration.
std::string sim_config_hash(const SimConfig& config, const VirtualUserConfig& user);

/// Shortest decimal text that reads back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

/// Writes through a temporary sibling file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace exotune
