#include "exotune/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace exotune {

using nlohmann::json;

namespace {

// Walks one JSON object, handing out typed fields and remembering which keys
// were consumed so leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (!it->is_number_unsigned() && it->get<std::int64_t>() < 0) throw ConfigError("");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!it->is_number()) throw ConfigError("");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) throw ConfigError("");
      }
      out = it->get<T>();
    } catch (const std::exception&) {
      throw ConfigError(path(key) + " has the wrong type");
    }
  }

  /// Parses a string field through `convert`, mapping failures to ConfigError.
  template <typename T, typename F>
  void get_enum(const char* key, T& out, F convert) {
    std::string text;
    get(key, text);
    if (!j_.contains(key)) return;
    try {
      out = convert(text);
    } catch (const std::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + path(item.key()) + "'");
    }
  }

 private:
  std::string label() const { return where_.empty() ? "config" : "'" + where_ + "'"; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void read_trajectory(const json& j, Trajectory& t) {
  Section s(j, "user.trajectory");
  s.get("angle_low", t.angle_low);
  s.get("angle_high", t.angle_high);
  s.get("rise_seconds", t.rise_seconds);
  s.get("hold_high_seconds", t.hold_high_seconds);
  s.get("fall_seconds", t.fall_seconds);
  s.get("hold_low_seconds", t.hold_low_seconds);
  s.get("smooth", t.smooth);
  s.finish();
}

}  // namespace

VirtualUserConfig RunConfig::effective_user() const {
  VirtualUserConfig u = user;
  u.task = task;
  if (!custom_trajectory) u.trajectory = default_trajectory(task);
  return u;
}

TrainConfig RunConfig::effective_train() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

void RunConfig::validate() const {
  try {
    sim.validate();
    effective_user().validate();
    reward.validate();
    train.validate();
    grid.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (collect_episodes < 1) throw ConfigError("collect.episodes must be >= 1");
  if (eval_episodes < 1) throw ConfigError("eval.episodes must be >= 1");
  if (!(collect_seconds > 0.0) || steps_per_episode(collect_seconds, sim.dt) < 1)
    throw ConfigError("collect.episode_seconds must cover at least one control step");
  if (!(eval_seconds > 0.0) || steps_per_episode(eval_seconds, sim.dt) < 1)
    throw ConfigError("eval.episode_seconds must cover at least one control step");
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Section top(j, "");
  top.get_enum("task", c.task, task_from_string);
  top.get("seed", c.seed);

  if (const json* s = top.child("sim")) {
    Section sec(*s, "sim");
    sec.get("k_p", c.sim.k_p);
    sec.get("max_speed", c.sim.max_speed);
    sec.get("angle_min", c.sim.angle_min);
    sec.get("angle_max", c.sim.angle_max);
    sec.get("dt", c.sim.dt);
    sec.get_enum("speed_law", c.sim.speed_law, speed_law_from_string);
    sec.get("angle_scale", c.sim.angle_scale);
    sec.finish();
  }
  if (const json* u = top.child("user")) {
    Section sec(*u, "user");
    sec.get("gain", c.user.gain);
    sec.get("co_contraction", c.user.co_contraction);
    sec.get("noise_std", c.user.noise_std);
    sec.get("deadband", c.user.deadband);
    if (const json* t = sec.child("trajectory")) {
      c.user.trajectory = default_trajectory(c.task);
      read_trajectory(*t, c.user.trajectory);
      c.custom_trajectory = true;
    }
    sec.finish();
  }
  if (const json* r = top.child("reward")) {
    Section sec(*r, "reward");
    sec.get("c", c.reward.c);
    sec.get_enum("state", c.reward.state, reward_state_from_string);
    sec.finish();
  }
  if (const json* t = top.child("train")) {
    Section sec(*t, "train");
    sec.get("gamma", c.train.gamma);
    sec.get("tau", c.train.tau);
    sec.get("batch_size", c.train.batch_size);
    sec.get("steps", c.train.steps);
    sec.get("learning_rate", c.train.learning_rate);
    sec.get("sample_count", c.train.sample_count);
    sec.get("basis_order", c.train.basis_order);
    sec.get("hidden", c.train.hidden);
    sec.get_enum("reward_assignment", c.train.reward_assignment, reward_assignment_from_string);
    sec.finish();
  }
  if (const json* t = top.child("collect")) {
    Section sec(*t, "collect");
    sec.get_enum("grid", c.grid, GridSpec::parse);
    sec.get("episodes", c.collect_episodes);
    sec.get("episode_seconds", c.collect_seconds);
    sec.finish();
  }
  if (const json* t = top.child("eval")) {
    Section sec(*t, "eval");
    sec.get("episodes", c.eval_episodes);
    sec.get("episode_seconds", c.eval_seconds);
    sec.finish();
  }
  if (const json* t = top.child("paths")) {
    Section sec(*t, "paths");
    sec.get("datasets", c.paths.datasets);
    sec.get("checkpoint", c.paths.checkpoint);
    sec.get("out", c.paths.out);
    sec.finish();
  }
  top.finish();
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["task"] = to_string(c.task);
  j["seed"] = c.seed;
  j["sim"] = {{"k_p", c.sim.k_p},
              {"max_speed", c.sim.max_speed},
              {"angle_min", c.sim.angle_min},
              {"angle_max", c.sim.angle_max},
              {"dt", c.sim.dt},
              {"speed_law", to_string(c.sim.speed_law)},
              {"angle_scale", c.sim.angle_scale}};
  j["user"] = {{"gain", c.user.gain},
               {"co_contraction", c.user.co_contraction},
               {"noise_std", c.user.noise_std},
               {"deadband", c.user.deadband}};
  if (c.custom_trajectory) {
    const auto& t = c.user.trajectory;
    j["user"]["trajectory"] = {{"angle_low", t.angle_low},
                               {"angle_high", t.angle_high},
                               {"rise_seconds", t.rise_seconds},
                               {"hold_high_seconds", t.hold_high_seconds},
                               {"fall_seconds", t.fall_seconds},
                               {"hold_low_seconds", t.hold_low_seconds},
                               {"smooth", t.smooth}};
  }
  j["reward"] = {{"c", c.reward.c}, {"state", to_string(c.reward.state)}};
  j["train"] = {{"gamma", c.train.gamma},
                {"tau", c.train.tau},
                {"batch_size", c.train.batch_size},
                {"steps", c.train.steps},
                {"learning_rate", c.train.learning_rate},
                {"sample_count", c.train.sample_count},
                {"basis_order", c.train.basis_order},
                {"hidden", c.train.hidden},
                {"reward_assignment", to_string(c.train.reward_assignment)}};
  j["collect"] = {{"grid", c.grid.to_string()},
                  {"episodes", c.collect_episodes},
                  {"episode_seconds", c.collect_seconds}};
  j["eval"] = {{"episodes", c.eval_episodes}, {"episode_seconds", c.eval_seconds}};
  j["paths"] = {{"datasets", c.paths.datasets},
                {"checkpoint", c.paths.checkpoint},
                {"out", c.paths.out}};
  return j;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace exotune
