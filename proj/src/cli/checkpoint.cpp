#include "exotune/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace exotune {

using nlohmann::json;

namespace {

json matrix_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw CheckpointError(where + ": expected a number");
  return j.get<double>();
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols,
                            const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw CheckpointError(where + ": expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw CheckpointError(where + ": row " + std::to_string(r) + " needs " + std::to_string(cols) +
                            " values");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], where);
  }
  return m;
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index size, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size)
    throw CheckpointError(where + ": expected " + std::to_string(size) + " values");
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v[i] = number(j[static_cast<std::size_t>(i)], where);
  return v;
}

const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw CheckpointError(where + ": missing '" + key + "'");
  return j.at(key);
}

json network_json(const NetworkParams& net) {
  json layers = json::array();
  for (const auto& layer : net.layers) {
    layers.push_back({{"activation", to_string(layer.activation)},
                      {"out", layer.weights.rows()},
                      {"in", layer.weights.cols()},
                      {"weights", matrix_json(layer.weights)},
                      {"bias", vector_json(layer.bias)}});
  }
  return {{"role", net.role == NetworkRole::kPrediction ? "prediction" : "target"},
          {"layers", layers}};
}

NetworkParams network_from(const json& j, const std::string& where) {
  NetworkParams net;
  const std::string role = field(j, "role", where).get<std::string>();
  if (role == "prediction") {
    net.role = NetworkRole::kPrediction;
  } else if (role == "target") {
    net.role = NetworkRole::kTarget;
  } else {
    throw CheckpointError(where + ": unknown role '" + role + "'");
  }
  const json& layers = field(j, "layers", where);
  if (!layers.is_array() || layers.empty()) throw CheckpointError(where + ": no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string at = where + ".layers[" + std::to_string(i) + "]";
    const json& l = layers[i];
    const auto out = field(l, "out", at).get<Eigen::Index>();
    const auto in = field(l, "in", at).get<Eigen::Index>();
    if (out < 1 || in < 1) throw CheckpointError(at + ": layer sizes must be positive");
    DenseLayer layer;
    try {
      layer.activation = activation_from_string(field(l, "activation", at).get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(at + ": " + e.what());
    }
    layer.weights = matrix_from(field(l, "weights", at), out, in, at + ".weights");
    layer.bias = vector_from(field(l, "bias", at), out, at + ".bias");
    net.layers.push_back(std::move(layer));
  }
  try {
    net.validate();
  } catch (const std::exception& e) {
    throw CheckpointError(where + ": " + e.what());
  }
  return net;
}

json gradients_json(const Gradients& g) {
  json out = json::array();
  for (const auto& layer : g) {
    out.push_back({{"weights", matrix_json(layer.weights)}, {"bias", vector_json(layer.bias)}});
  }
  return out;
}

Gradients gradients_from(const json& j, const NetworkParams& shape, const std::string& where) {
  if (!j.is_array() || j.size() != shape.layers.size())
    throw CheckpointError(where + ": expected one entry per layer");
  Gradients g;
  for (std::size_t i = 0; i < shape.layers.size(); ++i) {
    const auto& w = shape.layers[i].weights;
    const std::string at = where + "[" + std::to_string(i) + "]";
    g.push_back({matrix_from(field(j[i], "weights", at), w.rows(), w.cols(), at + ".weights"),
                 vector_from(field(j[i], "bias", at), w.rows(), at + ".bias")});
  }
  return g;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const std::string& where) {
  if (j.is_null()) return std::nullopt;
  return number(j, where);
}

bool agent_finite(const Agent& a) {
  auto grads_finite = [](const Gradients& g) {
    for (const auto& l : g) {
      if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  };
  return a.prediction.all_finite() && a.target.all_finite() &&
         grads_finite(a.adam.first_moment) && grads_finite(a.adam.second_moment);
}

}  // namespace

LossSummary summarize_losses(const std::vector<double>& losses, std::size_t window) {
  LossSummary s;
  s.steps = static_cast<std::int64_t>(losses.size());
  if (losses.empty() || window == 0) return s;
  const std::size_t w = std::min(window, losses.size());
  s.initial_smoothed = std::accumulate(losses.begin(), losses.begin() + static_cast<long>(w), 0.0) /
                       static_cast<double>(w);
  s.final_smoothed = std::accumulate(losses.end() - static_cast<long>(w), losses.end(), 0.0) /
                     static_cast<double>(w);
  return s;
}

Checkpoint make_checkpoint(const Learner& learner, const RunConfig& config, LossSummary loss) {
  Checkpoint c;
  c.step = learner.step();
  c.config = config;
  c.sim_config_hash = sim_config_hash(config.sim, config.effective_user());
  c.agents = learner.agents();
  c.loss = loss;
  return c;
}

Learner restore_learner(const Checkpoint& checkpoint) {
  Learner learner(checkpoint.config.effective_train(), checkpoint.config.sim);
  if (checkpoint.agents.size() != learner.agents().size())
    throw CheckpointError("checkpoint holds " + std::to_string(checkpoint.agents.size()) +
                          " agents, expected " + std::to_string(learner.agents().size()));
  learner.agents() = checkpoint.agents;
  learner.set_step(checkpoint.step);
  return learner;
}

json to_json(const Checkpoint& c) {
  json agents = json::array();
  for (const auto& a : c.agents) {
    agents.push_back(
        {{"id", to_string(a.id)},
         {"basis", {{"family", "polynomial"}, {"order", a.basis.order()}, {"action_dim", a.basis.action_dim()}}},
         {"bounds", {{"low", vector_json(a.bounds.low)}, {"high", vector_json(a.bounds.high)}}},
         {"sample_count", a.sample_count},
         {"prediction", network_json(a.prediction)},
         {"target", network_json(a.target)},
         {"adam",
          {{"step", a.adam.step},
           {"beta1", a.adam.beta1},
           {"beta2", a.adam.beta2},
           {"epsilon", a.adam.epsilon},
           {"learning_rate", a.adam.learning_rate},
           {"first_moment", gradients_json(a.adam.first_moment)},
           {"second_moment", gradients_json(a.adam.second_moment)}}}});
  }
  return {{"schema_version", c.schema_version},
          {"step", c.step},
          {"sim_config_hash", c.sim_config_hash},
          {"config", to_json(c.config)},
          {"loss", {{"steps", c.loss.steps},
                    {"initial_smoothed", optional_json(c.loss.initial_smoothed)},
                    {"final_smoothed", optional_json(c.loss.final_smoothed)}}},
          {"agents", agents}};
}

Checkpoint checkpoint_from_json(const json& j) {
  Checkpoint c;
  try {
    c.schema_version = field(j, "schema_version", "checkpoint").get<int>();
    if (c.schema_version != kCheckpointSchemaVersion)
      throw CheckpointError("unsupported checkpoint schema_version " +
                            std::to_string(c.schema_version) + " (expected " +
                            std::to_string(kCheckpointSchemaVersion) + ")");
    c.step = field(j, "step", "checkpoint").get<std::int64_t>();
    c.sim_config_hash = field(j, "sim_config_hash", "checkpoint").get<std::string>();
    try {
      c.config = run_config_from_json(field(j, "config", "checkpoint"));
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("checkpoint.config: ") + e.what());
    }
    const json& loss = field(j, "loss", "checkpoint");
    c.loss.steps = field(loss, "steps", "checkpoint.loss").get<std::int64_t>();
    c.loss.initial_smoothed = optional_from(field(loss, "initial_smoothed", "checkpoint.loss"), "checkpoint.loss");
    c.loss.final_smoothed = optional_from(field(loss, "final_smoothed", "checkpoint.loss"), "checkpoint.loss");

    const json& agents = field(j, "agents", "checkpoint");
    if (!agents.is_array()) throw CheckpointError("checkpoint.agents must be an array");
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const std::string at = "checkpoint.agents[" + std::to_string(i) + "]";
      const json& aj = agents[i];
      Agent a;
      try {
        a.id = agent_id_from_string(field(aj, "id", at).get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw CheckpointError(at + ": " + e.what());
      }
      const json& basis = field(aj, "basis", at);
      if (field(basis, "family", at + ".basis").get<std::string>() != "polynomial")
        throw CheckpointError(at + ".basis: unknown family");
      a.basis = BasisSpec(field(basis, "order", at + ".basis").get<int>(),
                          field(basis, "action_dim", at + ".basis").get<int>());
      const json& bounds = field(aj, "bounds", at);
      const auto dim = static_cast<Eigen::Index>(a.basis.action_dim());
      a.bounds = ActionBounds(vector_from(field(bounds, "low", at), dim, at + ".bounds.low"),
                              vector_from(field(bounds, "high", at), dim, at + ".bounds.high"));
      a.sample_count = field(aj, "sample_count", at).get<int>();
      a.prediction = network_from(field(aj, "prediction", at), at + ".prediction");
      a.target = network_from(field(aj, "target", at), at + ".target");
      if (!same_shape(a.prediction, a.target)) throw CheckpointError(at + ": prediction/target shapes differ");
      if (a.prediction.output_size() != a.basis.k())
        throw CheckpointError(at + ": network output size does not match basis size");
      const json& adam = field(aj, "adam", at);
      const std::string aat = at + ".adam";
      a.adam.step = field(adam, "step", aat).get<std::int64_t>();
      a.adam.beta1 = number(field(adam, "beta1", aat), aat);
      a.adam.beta2 = number(field(adam, "beta2", aat), aat);
      a.adam.epsilon = number(field(adam, "epsilon", aat), aat);
      a.adam.learning_rate = number(field(adam, "learning_rate", aat), aat);
      a.adam.first_moment = gradients_from(field(adam, "first_moment", aat), a.prediction, aat + ".first_moment");
      a.adam.second_moment = gradients_from(field(adam, "second_moment", aat), a.prediction, aat + ".second_moment");
      c.agents.push_back(std::move(a));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  }
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  for (const auto& a : checkpoint.agents) {
    if (!agent_finite(a)) throw CheckpointError("refusing to save non-finite parameters");
  }
  write_file_atomic(path, to_json(checkpoint).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw CheckpointError("checkpoint '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace exotune
