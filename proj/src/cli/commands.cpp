#include "exotune/commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "exotune/plot.hpp"

namespace exotune {

namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

double field_value(const std::string& s, std::size_t line_no) {
  try {
    return parse_double(s);
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line_no) + ": '" + s + "' is not a number");
  }
}

// Rows of numbers under an exact header; every row must have the header's width.
std::vector<std::vector<double>> numeric_table(const std::string& text, const std::string& header) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != header) throw InputError("expected header '" + header + "'");
  const std::size_t width = split(header).size();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto cells = split(lines[i]);
    if (cells.size() != width)
      throw InputError("line " + std::to_string(i + 1) + ": expected " + std::to_string(width) + " fields");
    std::vector<double> row;
    for (const auto& c : cells) row.push_back(field_value(c, i + 1));
    rows.push_back(std::move(row));
  }
  return rows;
}

constexpr const char* kLossHeader = "step,loss";
constexpr const char* kOracleHeader = "th_b,th_t,mean_reward,mean_abs_d,idle_fraction,is_best";
constexpr const char* kMetricsHeader = "episode,mean_reward,mean_abs_d,idle_fraction,mean_th_b,mean_th_t";
constexpr const char* kThresholdsHeader = "episode,step,time,p,E_b,E_t,th_b,th_t,r";

fs::path side_path(const CommandArgs& args, const char* suffix) {
  if (!args.side_out.empty()) return args.side_out;
  fs::path p = args.out;
  return p.replace_extension(suffix);
}

RunConfig resolve_config(const CommandArgs& args, const std::string& command) {
  RunConfig config = args.config ? load_run_config(*args.config) : RunConfig{};
  apply_overrides(config, args.overrides, command);
  config.validate();
  return config;
}

fs::path require_out(const CommandArgs& args, const RunConfig* config) {
  if (!args.out.empty()) return args.out;
  if (config && !config->paths.out.empty()) return config->paths.out;
  throw ConfigError("--out is required");
}

int do_collect(const CommandArgs& args, std::ostream& out) {
  const RunConfig config = resolve_config(args, "collect");
  const fs::path path = require_out(args, &config);
  const Dataset dataset = grid_collect(config.effective_user(), config.grid, config.collect_episodes,
                                       config.sim, config.reward, config.collect_seconds, config.seed);
  write_dataset(path, dataset);
  out << "collected " << dataset.transitions.size() << " transitions, "
      << dataset.header.episode_count << " episodes over " << config.grid.cell_count()
      << " grid cells -> " << path.string() << '\n';
  return kExitOk;
}

int do_train(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  const RunConfig config = resolve_config(args, "train");
  CommandArgs resolved = args;
  resolved.out = require_out(args, &config);
  std::vector<fs::path> inputs = args.datasets;
  if (inputs.empty()) {
    for (const auto& p : config.paths.datasets) inputs.emplace_back(p);
  }
  if (inputs.empty()) throw ConfigError("train needs at least one --dataset");

  std::vector<Dataset> parts;
  for (const auto& p : inputs) parts.push_back(read_dataset(p));
  std::string task = parts.front().header.task;
  for (const auto& p : parts) {
    if (p.header.task != task) task = "combined";
  }
  const Dataset dataset = parts.size() == 1 ? parts.front() : merge_datasets(parts, task);
  if (parts.size() == 1 &&
      dataset.header.sim_config_hash != sim_config_hash(config.sim, config.effective_user())) {
    err << "warning: dataset was collected with a different simulator/user config\n";
  }

  std::vector<double> losses;
  const fs::path loss_path = side_path(resolved, ".loss.csv");
  try {
    const Learner learner = train_learner(config, dataset, losses);
    const LossSummary summary = summarize_losses(losses);
    save_checkpoint(resolved.out, make_checkpoint(learner, config, summary));
    write_file_atomic(loss_path, loss_csv(losses));
    out << "trained " << losses.size() << " steps on " << dataset.transitions.size()
        << " transitions -> " << resolved.out.string() << '\n';
    if (summary.final_smoothed) {
      out << "smoothed loss: initial " << format_double(*summary.initial_smoothed) << ", final "
          << format_double(*summary.final_smoothed) << '\n';
    }
  } catch (const DivergenceError&) {
    write_file_atomic(loss_path, loss_csv(losses));
    throw;
  }
  return kExitOk;
}

int do_eval(const CommandArgs& args, std::ostream& out, std::ostream& err) {
  fs::path ckpt_path = args.checkpoint;
  std::optional<RunConfig> file_config;
  if (args.config) file_config = load_run_config(*args.config);
  if (ckpt_path.empty() && file_config) ckpt_path = file_config->paths.checkpoint;
  if (ckpt_path.empty()) throw ConfigError("eval needs --checkpoint");
  const Checkpoint ckpt = load_checkpoint(ckpt_path);

  RunConfig config = file_config ? *file_config : ckpt.config;
  apply_overrides(config, args.overrides, "eval");
  config.validate();
  if (sim_config_hash(config.sim, config.effective_user()) != ckpt.sim_config_hash) {
    err << "warning: evaluation config differs from the checkpoint's training config\n";
  }
  CommandArgs resolved = args;
  resolved.out = require_out(args, file_config ? &config : nullptr);

  const Learner learner = restore_learner(ckpt);
  const Evaluation eval = evaluate_policy(greedy_policy(learner, config.seed), config, config.eval_episodes);
  write_file_atomic(resolved.out, metrics_csv(eval));
  const fs::path trace_path = side_path(resolved, ".thresholds.csv");
  write_file_atomic(trace_path, thresholds_csv(eval, config.sim.dt));
  out << "evaluated " << eval.episodes.size() << " episodes: mean reward "
      << format_double(eval.mean.mean_reward) << ", mean |d| " << format_double(eval.mean.mean_abs_d)
      << ", idle fraction " << format_double(eval.mean.idle_fraction) << '\n';
  return kExitOk;
}

int do_gridscan(const CommandArgs& args, std::ostream& out) {
  const RunConfig config = resolve_config(args, "gridscan");
  const fs::path path = require_out(args, &config);
  const OracleTable table = run_gridscan(config);
  write_file_atomic(path, oracle_csv(table));
  const auto& best = table.best();
  out << "best static thresholds (" << format_double(best.action.biceps) << ", "
      << format_double(best.action.triceps) << "): mean reward " << format_double(best.mean_reward)
      << " over " << table.cells.size() << " cells\n";
  return kExitOk;
}

std::vector<ThresholdTraceRow> parse_thresholds_csv(const std::string& text) {
  std::vector<ThresholdTraceRow> rows;
  for (const auto& r : numeric_table(text, kThresholdsHeader)) {
    rows.push_back({static_cast<std::int64_t>(r[0]), static_cast<std::int64_t>(r[1]), r[3], r[4], r[5],
                    r[6], r[7]});
  }
  return rows;
}

int do_plot(const CommandArgs& args, std::ostream& out) {
  if (args.input.empty()) throw ConfigError("plot needs --input");
  if (args.out.empty()) throw ConfigError("--out is required");
  const std::string text = read_text(args.input);
  const std::string first = text.substr(0, text.find('\n'));
  std::string svg;
  std::string kind;
  if (!first.empty() && first.front() == '{') {
    Dataset dataset;
    try {
      dataset = read_dataset(args.input);
    } catch (const DatasetError& e) {
      throw InputError(e.what());
    }
    svg = cell_traces_svg(group_by_cell(dataset));
    kind = "per-cell traces";
  } else if (first == kLossHeader) {
    svg = loss_curve_svg(parse_loss_csv(text));
    kind = "loss curve";
  } else if (first == kOracleHeader) {
    svg = oracle_heatmap_svg(parse_oracle_csv(text));
    kind = "oracle heatmap";
  } else if (first == kThresholdsHeader) {
    svg = thresholds_svg(parse_thresholds_csv(text));
    kind = "thresholds over time";
  } else if (first == kMetricsHeader) {
    throw InputError("metrics CSV has no time axis; plot the matching .thresholds.csv instead");
  } else {
    throw InputError("unrecognized input '" + args.input.string() + "'");
  }
  write_file_atomic(args.out, svg);
  out << "wrote " << kind << " -> " << args.out.string() << '\n';
  return kExitOk;
}

}  // namespace

void apply_overrides(RunConfig& config, const Overrides& o, const std::string& command) {
  if (o.task) config.task = *o.task;
  if (o.seed) config.seed = *o.seed;
  if (o.grid) config.grid = *o.grid;
  if (o.steps) config.train.steps = *o.steps;
  if (o.speed_law) config.sim.speed_law = *o.speed_law;
  if (o.episodes) {
    if (command == "collect") {
      config.collect_episodes = *o.episodes;
    } else {
      config.eval_episodes = *o.episodes;
    }
  }
}

std::uint64_t evaluation_seed(std::uint64_t seed) { return cell_seed(seed, 0xe7a1000000000000ULL); }

Evaluation evaluate_policy(const Policy& policy, const RunConfig& config, int episodes) {
  Evaluation eval;
  const VirtualUserConfig user = config.effective_user();
  const std::uint64_t base = evaluation_seed(config.seed);
  for (int e = 0; e < episodes; ++e) {
    eval.logs.push_back(rollout_episode(policy, user, config.sim, config.reward, config.eval_seconds,
                                        episode_seed(base, static_cast<std::uint64_t>(e))));
    eval.episodes.push_back(summarize_episode(eval.logs.back(), config.reward));
  }
  for (const auto& m : eval.episodes) {
    eval.mean.mean_reward += m.mean_reward / episodes;
    eval.mean.mean_abs_d += m.mean_abs_d / episodes;
    eval.mean.idle_fraction += m.idle_fraction / episodes;
  }
  return eval;
}

OracleTable run_gridscan(const RunConfig& config) {
  return static_oracle(config.effective_user(), config.grid, config.sim, config.reward,
                       config.eval_episodes, config.eval_seconds, evaluation_seed(config.seed));
}

Learner train_learner(const RunConfig& config, const Dataset& dataset, std::vector<double>& losses) {
  Learner learner(config.effective_train(), config.sim);
  losses.clear();
  losses.reserve(static_cast<std::size_t>(config.train.steps));
  for (std::int64_t i = 0; i < config.train.steps; ++i) {
    double loss = 0.0;
    try {
      loss = learner.train_step(dataset);
    } catch (const std::domain_error& e) {
      throw DivergenceError("training diverged at step " + std::to_string(i) + ": " + e.what());
    }
    if (!std::isfinite(loss))
      throw DivergenceError("training diverged at step " + std::to_string(i) + ": loss is " +
                            format_double(loss));
    losses.push_back(loss);
  }
  for (const auto& a : learner.agents()) {
    if (!a.prediction.all_finite() || !a.target.all_finite())
      throw DivergenceError("training diverged: parameters are not finite");
  }
  return learner;
}

std::string loss_csv(const std::vector<double>& losses) {
  std::string s = std::string(kLossHeader) + "\n";
  for (std::size_t i = 0; i < losses.size(); ++i) s += std::to_string(i) + "," + format_double(losses[i]) + "\n";
  return s;
}

std::string oracle_csv(const OracleTable& table) {
  std::string s = std::string(kOracleHeader) + "\n";
  for (std::size_t i = 0; i < table.cells.size(); ++i) {
    const auto& c = table.cells[i];
    s += format_double(c.action.biceps) + "," + format_double(c.action.triceps) + "," +
         format_double(c.mean_reward) + "," + format_double(c.mean_abs_d) + "," +
         format_double(c.idle_fraction) + "," + (i == table.best_index ? "1" : "0") + "\n";
  }
  return s;
}

std::string metrics_csv(const Evaluation& eval) {
  std::string s = std::string(kMetricsHeader) + "\n";
  double all_b = 0.0, all_t = 0.0;
  std::size_t all_n = 0;
  for (std::size_t e = 0; e < eval.episodes.size(); ++e) {
    double tb = 0.0, tt = 0.0;
    for (const auto& st : eval.logs[e].steps) {
      tb += st.action.biceps;
      tt += st.action.triceps;
    }
    const auto n = static_cast<double>(eval.logs[e].steps.size());
    all_b += tb;
    all_t += tt;
    all_n += eval.logs[e].steps.size();
    const auto& m = eval.episodes[e];
    s += std::to_string(e) + "," + format_double(m.mean_reward) + "," + format_double(m.mean_abs_d) +
         "," + format_double(m.idle_fraction) + "," + format_double(tb / n) + "," +
         format_double(tt / n) + "\n";
  }
  const auto n = static_cast<double>(std::max<std::size_t>(all_n, 1));
  s += "mean," + format_double(eval.mean.mean_reward) + "," + format_double(eval.mean.mean_abs_d) + "," +
       format_double(eval.mean.idle_fraction) + "," + format_double(all_b / n) + "," +
       format_double(all_t / n) + "\n";
  return s;
}

std::string thresholds_csv(const Evaluation& eval, double dt) {
  std::ostringstream s;
  s << kThresholdsHeader << '\n';
  for (std::size_t e = 0; e < eval.logs.size(); ++e) {
    for (const auto& st : eval.logs[e].steps) {
      s << e << ',' << st.step << ',' << format_double(static_cast<double>(st.step) * dt) << ','
        << format_double(st.state.angle) << ',' << format_double(st.state.effort_biceps) << ','
        << format_double(st.state.effort_triceps) << ',' << format_double(st.action.biceps) << ','
        << format_double(st.action.triceps) << ',' << format_double(st.reward) << '\n';
    }
  }
  return s.str();
}

std::vector<double> parse_loss_csv(const std::string& text) {
  std::vector<double> losses;
  for (const auto& r : numeric_table(text, kLossHeader)) losses.push_back(r[1]);
  return losses;
}

std::vector<OracleCell> parse_oracle_csv(const std::string& text) {
  std::vector<OracleCell> cells;
  for (const auto& r : numeric_table(text, kOracleHeader)) {
    cells.push_back({ThresholdAction{r[0], r[1]}, r[2], r[3], r[4]});
  }
  if (cells.empty()) throw InputError("oracle table has no rows");
  return cells;
}

int run_command(const std::string& command, const CommandArgs& args, std::ostream& out,
                std::ostream& err) {
  try {
    if (command == "collect") return do_collect(args, out);
    if (command == "train") return do_train(args, out, err);
    if (command == "eval") return do_eval(args, out, err);
    if (command == "gridscan") return do_gridscan(args, out);
    if (command == "plot") return do_plot(args, out);
    err << "error: unknown command '" << command << "'\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const DatasetError& e) {
    err << "error: " << e.what();
    if (e.record_index() >= 0) err << " (record " << e.record_index() << ")";
    err << '\n';
    return kExitConfig;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace exotune
