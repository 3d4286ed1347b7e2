#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "exotune/commands.hpp"

namespace py = pybind11;
using namespace exotune;

namespace {

RunConfig parse_config(const std::string& text) {
  try {
    return run_config_from_json(text.empty() ? nlohmann::json::object() : nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

// A trained (or restored) learner together with the run that produced it.
struct TrainedModel {
  RunConfig config;
  Learner learner;
  std::vector<double> losses;
};

py::dict metrics_dict(const EpisodeMetrics& m) {
  py::dict d;
  d["mean_reward"] = m.mean_reward;
  d["mean_abs_d"] = m.mean_abs_d;
  d["idle_fraction"] = m.idle_fraction;
  return d;
}

Eigen::MatrixXd transitions_array(const Dataset& ds) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(ds.transitions.size()), 12);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const auto& t = ds.transitions[static_cast<std::size_t>(i)];
    out.row(i) << double(t.episode_id), double(t.step), t.state.angle, t.state.effort_biceps,
        t.state.effort_triceps, t.action.biceps, t.action.triceps, t.reward, t.next_state.angle,
        t.next_state.effort_biceps, t.next_state.effort_triceps, t.done ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_exotune, m) {
  m.doc() = "Native core of exotune";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DatasetError>(m, "DatasetError", PyExc_ValueError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def("default_config", [] { return to_json(RunConfig{}).dump(); },
        "Default run configuration as a JSON string.");
  m.def("normalize_config", [](const std::string& text) { return to_json(parse_config(text)).dump(); },
        py::arg("config"));

  m.def("coefficient_count", &coefficient_count, py::arg("order"), py::arg("action_dim"));
  m.def(
      "action_features",
      [](const Eigen::VectorXd& action, int order) {
        return Eigen::VectorXd(action_features(action, BasisSpec(order, static_cast<int>(action.size()))).values);
      },
      py::arg("action"), py::arg("order"));

  m.def(
      "joint_speed",
      [](double eb, double et, double th_b, double th_t, double k_p, const std::string& law) {
        SimConfig sim;
        sim.k_p = k_p;
        sim.speed_law = speed_law_from_string(law);
        return joint_speed(eb, et, {th_b, th_t}, sim);
      },
      py::arg("effort_biceps"), py::arg("effort_triceps"), py::arg("th_b"), py::arg("th_t"),
      py::arg("k_p") = 1.0, py::arg("speed_law") = "paper-literal");

  m.def(
      "compute_reward",
      [](double eb, double et, double th_b, double th_t, double c) {
        return compute_reward({0.0, eb, et}, {th_b, th_t}, RewardConfig{c});
      },
      py::arg("effort_biceps"), py::arg("effort_triceps"), py::arg("th_b"), py::arg("th_t"),
      py::arg("c") = 10.0);

  py::class_<Dataset>(m, "Dataset")
      .def_static("load", &read_dataset, py::arg("path"))
      .def("save", [](const Dataset& ds, const std::filesystem::path& p) { write_dataset(p, ds); },
           py::arg("path"))
      .def("__len__", [](const Dataset& ds) { return ds.transitions.size(); })
      .def_property_readonly("task", [](const Dataset& ds) { return ds.header.task; })
      .def_property_readonly("seed", [](const Dataset& ds) { return ds.header.seed; })
      .def_property_readonly("episode_count", [](const Dataset& ds) { return ds.header.episode_count; })
      .def_property_readonly("sim_config_hash", [](const Dataset& ds) { return ds.header.sim_config_hash; })
      .def("to_array", &transitions_array,
           "Transitions as an (n, 12) float array in the on-disk field order.")
      .def_property_readonly_static("fields", [](py::object) { return std::string(kTransitionFields); });

  m.def(
      "collect",
      [](const std::string& config) {
        const RunConfig c = parse_config(config);
        return grid_collect(c.effective_user(), c.grid, c.collect_episodes, c.sim, c.reward, c.collect_seconds,
                            c.seed);
      },
      py::arg("config"), "Roll out every static grid cell and log the transitions.");

  m.def("merge_datasets", &merge_datasets, py::arg("parts"), py::arg("task_name") = "combined");

  py::class_<TrainedModel>(m, "Model")
      .def_property_readonly("losses", [](const TrainedModel& t) { return t.losses; })
      .def_property_readonly("step", [](const TrainedModel& t) { return t.learner.step(); })
      .def_property_readonly("config", [](const TrainedModel& t) { return to_json(t.config).dump(); })
      .def(
          "select_actions",
          [](const TrainedModel& t, double angle, double eb, double et, std::uint64_t seed) {
            Rng rng(seed);
            const auto a = t.learner.select_actions({angle, eb, et}, rng);
            return std::make_pair(a.biceps, a.triceps);
          },
          py::arg("angle"), py::arg("effort_biceps"), py::arg("effort_triceps"), py::arg("seed") = 0)
      .def(
          "evaluate",
          [](const TrainedModel& t, const std::string& config) {
            const RunConfig c = config.empty() ? t.config : parse_config(config);
            const auto eval = evaluate_policy(greedy_policy(t.learner, c.seed), c, c.eval_episodes);
            py::dict out = metrics_dict(eval.mean);
            py::list episodes;
            for (const auto& e : eval.episodes) episodes.append(metrics_dict(e));
            out["episodes"] = episodes;
            return out;
          },
          py::arg("config") = "")
      .def(
          "save",
          [](const TrainedModel& t, const std::filesystem::path& p) {
            save_checkpoint(p, make_checkpoint(t.learner, t.config, summarize_losses(t.losses)));
          },
          py::arg("path"));

  m.def(
      "train",
      [](const std::string& config, const Dataset& dataset) {
        const RunConfig c = parse_config(config);
        std::vector<double> losses;
        Learner learner = [&] {
          py::gil_scoped_release release;
          return train_learner(c, dataset, losses);
        }();
        return TrainedModel{c, std::move(learner), std::move(losses)};
      },
      py::arg("config"), py::arg("dataset"));

  m.def(
      "load_model",
      [](const std::filesystem::path& p) {
        const Checkpoint ck = load_checkpoint(p);
        return TrainedModel{ck.config, restore_learner(ck), {}};
      },
      py::arg("path"));

  m.def(
      "gridscan",
      [](const std::string& config) {
        const RunConfig c = parse_config(config);
        const OracleTable table = [&] {
          py::gil_scoped_release release;
          return run_gridscan(c);
        }();
        py::list cells;
        for (std::size_t i = 0; i < table.cells.size(); ++i) {
          const auto& cell = table.cells[i];
          py::dict d;
          d["th_b"] = cell.action.biceps;
          d["th_t"] = cell.action.triceps;
          d["mean_reward"] = cell.mean_reward;
          d["mean_abs_d"] = cell.mean_abs_d;
          d["idle_fraction"] = cell.idle_fraction;
          d["is_best"] = i == table.best_index;
          cells.append(d);
        }
        return cells;
      },
      py::arg("config"), "Static oracle over the configured grid.");

  m.def(
      "run_command",
      [](const std::string& command, std::optional<std::filesystem::path> config, std::filesystem::path out,
         std::vector<std::filesystem::path> datasets, std::filesystem::path checkpoint,
         std::filesystem::path input) {
        CommandArgs args;
        args.config = std::move(config);
        args.out = std::move(out);
        args.datasets = std::move(datasets);
        args.checkpoint = std::move(checkpoint);
        args.input = std::move(input);
        std::ostringstream o, e;
        const int code = run_command(command, args, o, e);
        return py::make_tuple(code, o.str(), e.str());
      },
      py::arg("command"), py::arg("config") = py::none(), py::arg("out") = std::filesystem::path(),
      py::arg("datasets") = std::vector<std::filesystem::path>{}, py::arg("checkpoint") = std::filesystem::path(),
      py::arg("input") = std::filesystem::path(),
      "Run a CLI subcommand in-process; returns (exit_code, stdout, stderr).");
}
