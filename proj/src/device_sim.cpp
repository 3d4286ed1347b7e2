#include "exotune/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "exotune/datastore.hpp"

namespace exotune {

std::string to_string(Task task) {
  return task == Task::kVertical ? "vertical" : "horizontal";
}

Task task_from_string(const std::string& name) {
  if (name == "vertical") return Task::kVertical;
  if (name == "horizontal") return Task::kHorizontal;
  throw std::invalid_argument("unknown task '" + name + "' (expected vertical|horizontal)");
}

std::string to_string(SpeedLaw law) {
  return law == SpeedLaw::kPaperLiteral ? "paper-literal" : "offset";
}

SpeedLaw speed_law_from_string(const std::string& name) {
  if (name == "paper-literal" || name == "paper_literal") return SpeedLaw::kPaperLiteral;
  if (name == "offset") return SpeedLaw::kOffset;
  throw std::invalid_argument("unknown speed law '" + name + "' (expected paper-literal|offset)");
}

bool within_threshold_range(const ThresholdAction& a) {
  return a.biceps >= kThresholdMin && a.biceps <= kThresholdMax && a.triceps >= kThresholdMin &&
         a.triceps <= kThresholdMax;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("sim.dt must be > 0");
  if (!(angle_min < angle_max)) throw std::invalid_argument("sim.angle_min must be < angle_max");
  if (!(max_speed > 0.0)) throw std::invalid_argument("sim.max_speed must be > 0");
  if (!(k_p > 0.0)) throw std::invalid_argument("sim.k_p must be > 0");
  if (!(angle_scale > 0.0)) throw std::invalid_argument("sim.angle_scale must be > 0");
}

double Trajectory::desired_angle(double t) const {
  const double period_s = period();
  double phase = std::fmod(t, period_s);
  if (phase < 0.0) phase += period_s;
  const double span = angle_high - angle_low;
  auto ease = [this](double x) {
    return smooth ? 0.5 * (1.0 - std::cos(std::numbers::pi * x)) : x;
  };
  if (phase < rise_seconds) return angle_low + span * ease(phase / rise_seconds);
  phase -= rise_seconds;
  if (phase < hold_high_seconds) return angle_high;
  phase -= hold_high_seconds;
  if (phase < fall_seconds) return angle_high - span * ease(phase / fall_seconds);
  return angle_low;
}

void Trajectory::validate() const {
  if (!(angle_low < angle_high)) throw std::invalid_argument("trajectory angle_low must be < angle_high");
  if (!(rise_seconds > 0.0 && fall_seconds > 0.0)) {
    throw std::invalid_argument("trajectory rise/fall durations must be > 0");
  }
  if (hold_high_seconds < 0.0 || hold_low_seconds < 0.0) {
    throw std::invalid_argument("trajectory hold durations must be >= 0");
  }
}

Trajectory default_trajectory(Task task) {
  Trajectory t;
  if (task == Task::kHorizontal) {
    // Lateral sweep: quick pull in, long controlled push out.
    t.angle_low = 30.0;
    t.angle_high = 100.0;
    t.rise_seconds = 2.0;
    t.hold_high_seconds = 1.0;
    t.fall_seconds = 6.0;
    t.hold_low_seconds = 1.0;
  }
  return t;
}

VirtualUserConfig VirtualUserConfig::for_task(Task task) {
  VirtualUserConfig c;
  c.task = task;
  c.trajectory = default_trajectory(task);
  return c;
}

void VirtualUserConfig::validate() const {
  trajectory.validate();
  if (!(gain >= 0.0)) throw std::invalid_argument("user.gain must be >= 0");
  if (!(co_contraction >= 0.0 && co_contraction <= kEffortMax)) {
    throw std::invalid_argument("user.co_contraction must lie in [0, 100]");
  }
  if (!(noise_std >= 0.0)) throw std::invalid_argument("user.noise_std must be >= 0");
  if (!(deadband >= 0.0)) throw std::invalid_argument("user.deadband must be >= 0");
}

VirtualUser::VirtualUser(VirtualUserConfig config, std::uint64_t seed)
    : config_(std::move(config)), rng_(seed) {}

double VirtualUser::noise() {
  if (config_.noise_std == 0.0) return 0.0;
  return config_.noise_std * normal_(rng_);
}

std::pair<double, double> VirtualUser::efforts(const SimState& state, double t) {
  const double error = config_.trajectory.desired_angle(t) - state.obs.angle;
  const double base = config_.co_contraction;
  const double drive = config_.gain * std::abs(error);
  auto clip = [](double e) { return std::clamp(e, 0.0, kEffortMax); };
  // Noise is drawn in a fixed order (biceps, then triceps) every call.
  const double nb = noise();
  const double nt = noise();
  if (error > config_.deadband) return {clip(base + drive + nb), clip(base + nt)};
  if (error < -config_.deadband) return {clip(base + nb), clip(base + drive + nt)};
  return {clip(base + nb), clip(base + nt)};
}

double joint_speed(double effort_biceps, double effort_triceps, const ThresholdAction& action,
                   const SimConfig& config) {
  if (!std::isfinite(effort_biceps) || !std::isfinite(effort_triceps)) {
    throw std::invalid_argument("efforts must be finite");
  }
  if (effort_biceps == effort_triceps) return 0.0;
  const bool flex = effort_biceps > effort_triceps;
  const double delta = flex ? effort_biceps - effort_triceps : effort_triceps - effort_biceps;
  const double threshold = flex ? action.biceps : action.triceps;
  if (delta <= threshold) return 0.0;
  const double drive = config.speed_law == SpeedLaw::kPaperLiteral ? delta : delta - threshold;
  const double magnitude = std::min(config.k_p * drive, config.max_speed);
  return flex ? magnitude : -magnitude;
}

SimState step_sim(const SimState& state, const ThresholdAction& action, double effort_biceps,
                  double effort_triceps, const SimConfig& config) {
  const double speed = joint_speed(effort_biceps, effort_triceps, action, config);
  SimState next;
  next.obs.angle = std::clamp(state.obs.angle + speed * config.angle_scale * config.dt,
                              config.angle_min, config.angle_max);
  next.obs.effort_biceps = effort_biceps;
  next.obs.effort_triceps = effort_triceps;
  next.time = state.time + config.dt;
  return next;
}

std::int64_t steps_per_episode(double duration_seconds, double dt) {
  if (!(duration_seconds > 0.0)) throw std::invalid_argument("episode duration must be > 0");
  return std::max<std::int64_t>(1, std::llround(duration_seconds / dt));
}

EpisodeLog rollout_episode(const Policy& policy, const VirtualUserConfig& user,
                           const SimConfig& config, const RewardConfig& reward,
                           double duration_seconds, std::uint64_t seed) {
  const std::int64_t n = steps_per_episode(duration_seconds, config.dt);
  VirtualUser person(user, seed);

  SimState state;
  state.obs.angle = std::clamp(user.trajectory.desired_angle(0.0), config.angle_min, config.angle_max);
  std::tie(state.obs.effort_biceps, state.obs.effort_triceps) = person.efforts(state, 0.0);

  EpisodeLog log;
  log.steps.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const ThresholdAction action = policy(state);
    const auto [eb, et] = person.efforts(state, state.time);
    const SimState next = step_sim(state, action, eb, et, config);
    StepRecord rec;
    rec.step = i;
    rec.state = state.obs;
    rec.action = action;
    rec.next_state = next.obs;
    rec.reward = step_reward(state.obs, action, next.obs, reward);
    rec.speed = joint_speed(eb, et, action, config);
    rec.done = (i == n - 1);
    log.steps.push_back(rec);
    state = next;
  }
  return log;
}

EpisodeLog rollout_episode(const ThresholdAction& fixed, const VirtualUserConfig& user,
                           const SimConfig& config, const RewardConfig& reward,
                           double duration_seconds, std::uint64_t seed) {
  return rollout_episode([fixed](const SimState&) { return fixed; }, user, config, reward,
                         duration_seconds, seed);
}

std::vector<double> GridSpec::values() const {
  validate();
  std::vector<double> out;
  const auto count = static_cast<std::int64_t>(std::floor((high - low) / step + 1e-9)) + 1;
  for (std::int64_t i = 0; i < count; ++i) out.push_back(low + static_cast<double>(i) * step);
  return out;
}

void GridSpec::validate() const {
  if (!(step > 0.0)) throw std::invalid_argument("grid step must be > 0");
  if (!(low <= high)) throw std::invalid_argument("grid low must be <= high");
  if (low < kThresholdMin || high > kThresholdMax) {
    throw std::invalid_argument("grid must lie within the threshold range [20, 50]");
  }
}

GridSpec GridSpec::parse(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ':')) {
    try {
      parts.push_back(parse_double(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("grid '" + text + "' is not low:high:step");
    }
  }
  if (parts.size() != 3) throw std::invalid_argument("grid '" + text + "' is not low:high:step");
  GridSpec g{parts[0], parts[1], parts[2]};
  g.validate();
  return g;
}

std::string GridSpec::to_string() const {
  return format_double(low) + ":" + format_double(high) + ":" + format_double(step);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t cell_seed(std::uint64_t seed, std::uint64_t cell_index) {
  return splitmix64(seed ^ cell_index);
}

std::uint64_t episode_seed(std::uint64_t base, std::uint64_t episode_index) {
  return splitmix64(splitmix64(base) + episode_index);
}

EpisodeMetrics summarize_episode(const EpisodeLog& log, const RewardConfig& reward) {
  EpisodeMetrics m;
  if (log.steps.empty()) return m;
  for (const auto& s : log.steps) {
    m.mean_reward += s.reward;
    const Observation& measured = reward.state == RewardState::kCurrent ? s.state : s.next_state;
    m.mean_abs_d += threshold_distance(measured, s.action);
    m.idle_fraction += (s.speed == 0.0) ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(log.steps.size());
  m.mean_reward /= n;
  m.mean_abs_d /= n;
  m.idle_fraction /= n;
  return m;
}

std::size_t best_cell(const std::vector<OracleCell>& cells) {
  if (cells.empty()) throw std::invalid_argument("oracle table is empty");
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto& b = cells[best];
    if (c.mean_reward > b.mean_reward) {
      best = i;
    } else if (c.mean_reward == b.mean_reward &&
               std::pair(c.action.biceps, c.action.triceps) <
                   std::pair(b.action.biceps, b.action.triceps)) {
      best = i;
    }
  }
  return best;
}

OracleTable static_oracle(const VirtualUserConfig& user, const GridSpec& grid,
                          const SimConfig& config, const RewardConfig& reward, int episodes,
                          double duration_seconds, std::uint64_t seed) {
  if (episodes < 1) throw std::invalid_argument("oracle needs at least one episode per cell");
  const auto values = grid.values();
  OracleTable table;
  for (double tb : values) {
    for (double tt : values) {
      OracleCell cell;
      cell.action = {tb, tt};
      for (int e = 0; e < episodes; ++e) {
        const auto log = rollout_episode(cell.action, user, config, reward, duration_seconds,
                                         episode_seed(seed, static_cast<std::uint64_t>(e)));
        const auto m = summarize_episode(log, reward);
        cell.mean_reward += m.mean_reward;
        cell.mean_abs_d += m.mean_abs_d;
        cell.idle_fraction += m.idle_fraction;
      }
      cell.mean_reward /= episodes;
      cell.mean_abs_d /= episodes;
      cell.idle_fraction /= episodes;
      table.cells.push_back(cell);
    }
  }
  table.best_index = best_cell(table.cells);
  return table;
}

}  // namespace exotune
