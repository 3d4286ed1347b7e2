#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace exotune {

enum class Task { kVertical, kHorizontal };
enum class SpeedLaw { kPaperLiteral, kOffset };

std::string to_string(Task task);
Task task_from_string(const std::string& name);
std::string to_string(SpeedLaw law);
SpeedLaw speed_law_from_string(const std::string& name);

inline constexpr double kThresholdMin = 20.0;
inline constexpr double kThresholdMax = 50.0;
inline constexpr double kEffortMax = 100.0;

/// Motor angle and muscle efforts; what an agent observes.
struct Observation {
  double angle = 0.0;           // degrees
  double effort_biceps = 0.0;   // [0, 100]
  double effort_triceps = 0.0;  // [0, 100]

  bool operator==(const Observation&) const = default;
};

struct SimState {
  Observation obs;
  double time = 0.0;  // seconds
};

struct ThresholdAction {
  double biceps = kThresholdMin;
  double triceps = kThresholdMin;

  bool operator==(const ThresholdAction&) const = default;
};

bool within_threshold_range(const ThresholdAction& action);

struct SimConfig {
  double k_p = 1.0;
  double max_speed = 100.0;
  double angle_min = 0.0;
  double angle_max = 130.0;
  double dt = 0.02;
  SpeedLaw speed_law = SpeedLaw::kPaperLiteral;
  double angle_scale = 0.9;  // degrees per (speed unit * second)

  void validate() const;
};

/// Periodic desired-angle profile: eased rise from low to high, hold, eased
/// fall back, hold.
struct Trajectory {
  double angle_low = 20.0;
  double angle_high = 110.0;
  double rise_seconds = 6.0;
  double hold_high_seconds = 1.0;
  double fall_seconds = 2.0;
  double hold_low_seconds = 1.0;
  bool smooth = false;  // half-cosine easing instead of constant-velocity segments

  double period() const { return rise_seconds + hold_high_seconds + fall_seconds + hold_low_seconds; }
  double desired_angle(double t) const;
  void validate() const;
};

/// Canonical desired-angle profile for a task. The vertical (curl) task
/// raises the forearm slowly and drops it quickly, so biceps carries most of
/// the work; the horizontal task mirrors this and leans on the triceps.
Trajectory default_trajectory(Task task);

struct VirtualUserConfig {
  Task task = Task::kVertical;
  Trajectory trajectory = default_trajectory(Task::kVertical);
  double gain = 2.0;            // effort per degree of tracking error
  double co_contraction = 5.0;  // baseline effort of both muscles
  double noise_std = 1.0;       // effort units
  double deadband = 2.0;        // degrees

  static VirtualUserConfig for_task(Task task);
  void validate() const;
};

/// Proportional-feedback effort model. Stateful only through its noise
/// stream, so a given seed and call sequence reproduce the same efforts.
class VirtualUser {
 public:
  VirtualUser(VirtualUserConfig config, std::uint64_t seed);

  /// Efforts (biceps, triceps) for the current angle at time t.
  std::pair<double, double> efforts(const SimState& state, double t);

  const VirtualUserConfig& config() const { return config_; }

 private:
  double noise();

  VirtualUserConfig config_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Signed joint speed in dual proportional mode (positive = flexion).
double joint_speed(double effort_biceps, double effort_triceps, const ThresholdAction& action,
                   const SimConfig& config);

SimState step_sim(const SimState& state, const ThresholdAction& action, double effort_biceps,
                  double effort_triceps, const SimConfig& config);

struct RewardConfig;

struct StepRecord {
  std::int64_t step = 0;
  Observation state;
  ThresholdAction action;
  double reward = 0.0;
  Observation next_state;
  double speed = 0.0;
  bool done = false;
};

struct EpisodeLog {
  std::vector<StepRecord> steps;
};

using Policy = std::function<ThresholdAction(const SimState&)>;

/// Simulates one episode at dt resolution: user efforts, joint speed, state
/// integration. One record per control step; the last is flagged done.
EpisodeLog rollout_episode(const Policy& policy, const VirtualUserConfig& user,
                           const SimConfig& config, const RewardConfig& reward,
                           double duration_seconds, std::uint64_t seed);

EpisodeLog rollout_episode(const ThresholdAction& fixed, const VirtualUserConfig& user,
                           const SimConfig& config, const RewardConfig& reward,
                           double duration_seconds, std::uint64_t seed);

std::int64_t steps_per_episode(double duration_seconds, double dt);

struct GridSpec {
  double low = kThresholdMin;
  double high = kThresholdMax;
  double step = 5.0;

  std::vector<double> values() const;
  std::size_t cell_count() const { return values().size() * values().size(); }
  /// Parses "low:high:step".
  static GridSpec parse(const std::string& text);
  std::string to_string() const;
  void validate() const;
};

/// Seed for grid cell `cell_index`: the base seed xor the cell index, mixed.
std::uint64_t cell_seed(std::uint64_t seed, std::uint64_t cell_index);
/// Seed for the n-th episode drawn from a base seed.
std::uint64_t episode_seed(std::uint64_t base, std::uint64_t episode_index);

struct OracleCell {
  ThresholdAction action;
  double mean_reward = 0.0;
  double mean_abs_d = 0.0;
  double idle_fraction = 0.0;
};

struct OracleTable {
  std::vector<OracleCell> cells;  // biceps-major, triceps-minor
  std::size_t best_index = 0;

  const OracleCell& best() const { return cells.at(best_index); }
};

struct EpisodeMetrics {
  double mean_reward = 0.0;
  double mean_abs_d = 0.0;
  double idle_fraction = 0.0;
};

EpisodeMetrics summarize_episode(const EpisodeLog& log, const RewardConfig& reward);

/// Exhaustive evaluation of every static threshold pair on the grid. Every
/// cell sees the same episode seeds. Ties resolve to the lexicographically
/// smaller (biceps, triceps) pair.
OracleTable static_oracle(const VirtualUserConfig& user, const GridSpec& grid,
                          const SimConfig& config, const RewardConfig& reward, int episodes,
                          double duration_seconds, std::uint64_t seed);

/// Argmax over cell mean rewards with the lexicographic tie rule.
std::size_t best_cell(const std::vector<OracleCell>& cells);

}  // namespace exotune
