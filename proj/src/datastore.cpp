#include "exotune/datastore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace exotune {

using nlohmann::json;

std::string to_string(RewardState state) {
  return state == RewardState::kCurrent ? "current" : "next";
}

RewardState reward_state_from_string(const std::string& name) {
  if (name == "current") return RewardState::kCurrent;
  if (name == "next") return RewardState::kNext;
  throw std::invalid_argument("unknown reward state '" + name + "' (expected current|next)");
}

void RewardConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("reward.c must be > 0");
}

double threshold_distance(const Observation& s, const ThresholdAction& a) {
  if (s.effort_biceps == s.effort_triceps) return std::min(a.biceps, a.triceps);
  const bool flex = s.effort_biceps > s.effort_triceps;
  const double delta = std::abs(s.effort_biceps - s.effort_triceps);
  return std::abs(delta - (flex ? a.biceps : a.triceps));
}

double compute_reward(const Observation& s, const ThresholdAction& a, const RewardConfig& config) {
  const double r = std::exp(-threshold_distance(s, a) / config.c);
  // Keep the reward strictly positive even if the exponent underflows.
  return std::max(r, std::numeric_limits<double>::min());
}

double step_reward(const Observation& s, const ThresholdAction& a, const Observation& s_next,
                   const RewardConfig& config) {
  return compute_reward(config.state == RewardState::kCurrent ? s : s_next, a, config);
}

Eigen::Vector3d normalize_state(const Observation& s, const SimConfig& config) {
  if (!(s.angle >= config.angle_min && s.angle <= config.angle_max)) {
    throw std::out_of_range("motor angle outside configured joint range");
  }
  if (!(s.effort_biceps >= 0.0 && s.effort_biceps <= kEffortMax && s.effort_triceps >= 0.0 &&
        s.effort_triceps <= kEffortMax)) {
    throw std::out_of_range("effort outside [0, 100]");
  }
  return {(s.angle - config.angle_min) / (config.angle_max - config.angle_min),
          s.effort_biceps / kEffortMax, s.effort_triceps / kEffortMax};
}

Observation denormalize_state(const Eigen::Vector3d& v, const SimConfig& config) {
  return {config.angle_min + v[0] * (config.angle_max - config.angle_min), v[1] * kEffortMax,
          v[2] * kEffortMax};
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto* begin = text.data();
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc() || res.ptr != end) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return value;
}

namespace {

std::int64_t parse_int(std::string_view text) {
  std::int64_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

void write_stream_atomic(const std::filesystem::path& path,
                         const std::function<void(std::ostream&)>& writer) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    writer(out);
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write to '" + path.string() + "' failed");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move temporary file into '" + path.string() + "'");
  }
}

json header_to_json(const DatasetHeader& h) {
  return json{{"schema_version", h.schema_version},
              {"task", h.task},
              {"sim_config_hash", h.sim_config_hash},
              {"grid",
               {{"low", h.grid.low},
                {"high", h.grid.high},
                {"step", h.grid.step},
                {"cells", h.grid.cell_count()}}},
              {"seed", h.seed},
              {"dt", h.dt},
              {"episode_count", h.episode_count},
              {"fields", kTransitionFields}};
}

DatasetHeader header_from_json(const json& j) {
  DatasetHeader h;
  h.schema_version = j.at("schema_version").get<int>();
  if (h.schema_version != kDatasetSchemaVersion) {
    throw DatasetError("dataset schema version " + std::to_string(h.schema_version) +
                           " does not match reader version " +
                           std::to_string(kDatasetSchemaVersion),
                       -1);
  }
  h.task = j.at("task").get<std::string>();
  h.sim_config_hash = j.at("sim_config_hash").get<std::string>();
  const auto& g = j.at("grid");
  h.grid = GridSpec{g.at("low").get<double>(), g.at("high").get<double>(), g.at("step").get<double>()};
  h.seed = j.at("seed").get<std::uint64_t>();
  h.dt = j.at("dt").get<double>();
  h.episode_count = j.at("episode_count").get<std::int64_t>();
  if (j.contains("fields") && j.at("fields").get<std::string>() != kTransitionFields) {
    throw DatasetError("dataset field list does not match this reader", -1);
  }
  return h;
}

void append_record(std::string& line, const Transition& t) {
  line.clear();
  auto put = [&line](const std::string& s) {
    line += s;
    line += ',';
  };
  put(std::to_string(t.episode_id));
  put(std::to_string(t.step));
  put(format_double(t.state.angle));
  put(format_double(t.state.effort_biceps));
  put(format_double(t.state.effort_triceps));
  put(format_double(t.action.biceps));
  put(format_double(t.action.triceps));
  put(format_double(t.reward));
  put(format_double(t.next_state.angle));
  put(format_double(t.next_state.effort_biceps));
  put(format_double(t.next_state.effort_triceps));
  line += t.done ? '1' : '0';
  line += '\n';
}

Transition parse_record(std::string_view line, std::int64_t index) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    fields.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  if (fields.size() != 12) {
    throw DatasetError("record " + std::to_string(index) + ": expected 12 fields, found " +
                           std::to_string(fields.size()),
                       index);
  }
  try {
    Transition t;
    t.episode_id = parse_int(fields[0]);
    t.step = parse_int(fields[1]);
    t.state = {parse_double(fields[2]), parse_double(fields[3]), parse_double(fields[4])};
    t.action = {parse_double(fields[5]), parse_double(fields[6])};
    t.reward = parse_double(fields[7]);
    t.next_state = {parse_double(fields[8]), parse_double(fields[9]), parse_double(fields[10])};
    if (fields[11] == "1") {
      t.done = true;
    } else if (fields[11] == "0") {
      t.done = false;
    } else {
      throw std::invalid_argument("done flag must be 0 or 1");
    }
    return t;
  } catch (const std::invalid_argument& e) {
    throw DatasetError("record " + std::to_string(index) + ": " + e.what(), index);
  }
}

bool valid_observation(const Observation& o) {
  return std::isfinite(o.angle) && o.effort_biceps >= 0.0 && o.effort_biceps <= kEffortMax &&
         o.effort_triceps >= 0.0 && o.effort_triceps <= kEffortMax;
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  write_stream_atomic(path, [&contents](std::ostream& out) { out << contents; });
}

void validate_dataset(const Dataset& dataset) {
  if (dataset.header.schema_version != kDatasetSchemaVersion) {
    throw DatasetError("dataset schema version mismatch", -1);
  }
  std::set<std::int64_t> seen;
  const auto& ts = dataset.transitions;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto idx = static_cast<std::int64_t>(i);
    const auto& t = ts[i];
    auto fail = [idx](const std::string& why) {
      throw DatasetError("record " + std::to_string(idx) + ": " + why, idx);
    };
    if (!(t.reward > 0.0 && t.reward <= 1.0)) fail("reward " + format_double(t.reward) + " outside (0, 1]");
    if (!within_threshold_range(t.action)) fail("threshold action outside [20, 50]");
    if (!valid_observation(t.state) || !valid_observation(t.next_state)) {
      fail("state outside valid range");
    }
    const bool new_episode = (i == 0) || ts[i - 1].episode_id != t.episode_id;
    if (new_episode) {
      if (!seen.insert(t.episode_id).second) fail("episode " + std::to_string(t.episode_id) + " is not contiguous");
    } else if (t.step <= ts[i - 1].step) {
      fail("steps must strictly increase within an episode");
    }
    const bool last_of_episode = (i + 1 == ts.size()) || ts[i + 1].episode_id != t.episode_id;
    if (t.done != last_of_episode) fail("done flag must mark exactly the final step of an episode");
  }
  if (static_cast<std::int64_t>(seen.size()) != dataset.header.episode_count) {
    throw DatasetError("header episode_count " + std::to_string(dataset.header.episode_count) +
                           " does not match " + std::to_string(seen.size()) + " episodes in file",
                       -1);
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  write_stream_atomic(path, [&dataset](std::ostream& out) {
    out << header_to_json(dataset.header).dump() << '\n';
    std::string line;
    for (const auto& t : dataset.transitions) {
      append_record(line, t);
      out << line;
    }
  });
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  Dataset ds;
  std::string line;
  if (!std::getline(in, line)) throw DatasetError("dataset is empty (missing header)", -1);
  try {
    ds.header = header_from_json(json::parse(line));
  } catch (const DatasetError&) {
    throw;
  } catch (const std::exception& e) {
    throw DatasetError(std::string("malformed dataset header: ") + e.what(), -1);
  }
  std::int64_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ds.transitions.push_back(parse_record(line, index));
    ++index;
  }
  validate_dataset(ds);
  return ds;
}

std::vector<Transition> sample_batch(const Dataset& dataset, int batch_size, Rng& rng) {
  if (dataset.transitions.empty()) throw std::invalid_argument("cannot sample from an empty dataset");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  std::uniform_int_distribution<std::size_t> pick(0, dataset.transitions.size() - 1);
  std::vector<Transition> batch;
  batch.reserve(static_cast<std::size_t>(batch_size));
  for (int i = 0; i < batch_size; ++i) batch.push_back(dataset.transitions[pick(rng)]);
  return batch;
}

Dataset relabel_rewards(Dataset dataset, const RewardConfig& config) {
  config.validate();
  for (auto& t : dataset.transitions) {
    t.reward = step_reward(t.state, t.action, t.next_state, config);
  }
  return dataset;
}

Dataset merge_datasets(const std::vector<Dataset>& parts, const std::string& task_name) {
  if (parts.empty()) throw std::invalid_argument("nothing to merge");
  Dataset out;
  out.header = parts.front().header;
  out.header.task = task_name;
  out.header.episode_count = 0;
  std::int64_t next_id = 0;
  for (const auto& part : parts) {
    std::int64_t last_source = std::numeric_limits<std::int64_t>::min();
    for (const auto& t : part.transitions) {
      if (t.episode_id != last_source) {
        last_source = t.episode_id;
        ++out.header.episode_count;
        next_id = out.header.episode_count - 1;
      }
      Transition copy = t;
      copy.episode_id = next_id;
      out.transitions.push_back(copy);
    }
  }
  return out;
}

std::string sim_config_hash(const SimConfig& config, const VirtualUserConfig& user) {
  std::ostringstream canon;
  const auto& tr = user.trajectory;
  for (double v : {config.k_p, config.max_speed, config.angle_min, config.angle_max, config.dt,
                   config.angle_scale, user.gain, user.co_contraction, user.noise_std,
                   user.deadband, tr.angle_low, tr.angle_high, tr.rise_seconds,
                   tr.hold_high_seconds, tr.fall_seconds, tr.hold_low_seconds}) {
    canon << format_double(v) << ';';
  }
  canon << to_string(config.speed_law) << ';' << to_string(user.task) << ';'
        << (tr.smooth ? "smooth" : "linear");
  // FNV-1a, 64-bit.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canon.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Dataset grid_collect(const VirtualUserConfig& user, const GridSpec& grid, int episodes_per_cell,
                     const SimConfig& config, const RewardConfig& reward,
                     double episode_seconds, std::uint64_t seed) {
  if (episodes_per_cell < 1) throw std::invalid_argument("episodes per cell must be >= 1");
  const auto values = grid.values();
  if (values.empty()) throw std::invalid_argument("grid is empty");
  Dataset ds;
  ds.header.task = to_string(user.task);
  ds.header.sim_config_hash = sim_config_hash(config, user);
  ds.header.grid = grid;
  ds.header.seed = seed;
  ds.header.dt = config.dt;

  std::int64_t episode_id = 0;
  std::uint64_t cell = 0;
  for (double tb : values) {
    for (double tt : values) {
      const std::uint64_t base = cell_seed(seed, cell++);
      for (int e = 0; e < episodes_per_cell; ++e) {
        const auto log = rollout_episode(ThresholdAction{tb, tt}, user, config, reward,
                                         episode_seconds,
                                         episode_seed(base, static_cast<std::uint64_t>(e)));
        for (const auto& s : log.steps) {
          ds.transitions.push_back(
              Transition{episode_id, s.step, s.state, s.action, s.reward, s.next_state, s.done});
        }
        ++episode_id;
      }
    }
  }
  ds.header.episode_count = episode_id;
  return ds;
}

}  // namespace exotune
