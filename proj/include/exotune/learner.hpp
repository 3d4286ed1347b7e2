#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "exotune/approximator.hpp"
#include "exotune/datastore.hpp"
#include "exotune/device_sim.hpp"
#include "exotune/qfunctional.hpp"

namespace exotune {

enum class AgentId { kBiceps, kTriceps };
enum class RewardAssignment { kShared, kSplitHalf };

std::string to_string(AgentId id);
AgentId agent_id_from_string(const std::string& name);
std::string to_string(RewardAssignment a);
RewardAssignment reward_assignment_from_string(const std::string& name);

/// One threshold-setting agent: a Q-functional over its own scalar threshold.
struct Agent {
  AgentId id = AgentId::kBiceps;
  BasisSpec basis{3, 1};
  ActionBounds bounds = ActionBounds::uniform(1, kThresholdMin, kThresholdMax);
  int sample_count = 256;
  NetworkParams prediction;
  NetworkParams target;
  AdamState adam;
};

enum class MixerKind { kAdditive };

/// Combines per-agent Q-values into Q_total. Only the additive form is
/// implemented; `kind` is the extension point for other mixers.
struct Mixer {
  MixerKind kind = MixerKind::kAdditive;

  double mix(std::span<const double> q_values, std::size_t expected_agents) const;
  /// q is agents x batch; returns one mixed value per column.
  Eigen::VectorXd mix_batch(const Eigen::MatrixXd& q) const;
  /// d Q_total / d q_i, same shape as q.
  Eigen::MatrixXd gradient(const Eigen::MatrixXd& q) const;
};

struct TrainConfig {
  double gamma = 0.5;
  double tau = 0.005;
  int batch_size = 64;
  std::int64_t steps = 20000;
  double learning_rate = 1e-3;
  int sample_count = 256;
  std::uint64_t seed = 0;
  int basis_order = 3;
  std::vector<int> hidden = {64, 64};
  RewardAssignment reward_assignment = RewardAssignment::kShared;

  void validate() const;
};

/// Fresh agent with identical prediction and target networks
/// (3 -> hidden... -> k, tanh hidden layers, identity output).
Agent make_agent(AgentId id, const TrainConfig& config, std::uint64_t seed);

/// Both agents, biceps first, with seeds derived from config.seed.
std::vector<Agent> make_agents(const TrainConfig& config);

/// Per-agent rewards for one team reward.
std::vector<double> agent_rewards(double team_reward, RewardAssignment assignment,
                                  std::size_t agent_count);

/// Q^F(s, a) for a raw threshold `action` on a normalized state.
double agent_q(const Agent& agent, const Eigen::Vector3d& state, double action, bool use_target);

/// sum_i r_i + gamma * max over sampled a' of Q_total(s', a'; target nets).
/// With an additive mixer the joint max is the mix of per-agent maxima.
double td_target(std::span<const double> rewards, const Eigen::Vector3d& next_state,
                 const std::vector<Agent>& agents, const Mixer& mixer, double gamma,
                 int sample_count, Rng& rng, bool done);

/// Transitions laid out column-wise with normalized states.
struct PreparedBatch {
  Eigen::MatrixXd states;       // 3 x b
  Eigen::MatrixXd next_states;  // 3 x b
  Eigen::MatrixXd actions;      // agents x b, raw thresholds (row 0 biceps)
  Eigen::VectorXd rewards;      // team reward per transition
  Eigen::VectorXd done;         // 1.0 for terminal transitions

  Eigen::Index size() const { return states.cols(); }
};

PreparedBatch prepare_batch(std::span<const Transition> batch, const SimConfig& sim);

struct TdLoss {
  double loss = 0.0;
  std::vector<Gradients> gradients;  // one per agent, prediction nets only
  Eigen::VectorXd predictions;       // Q_total(s, a) per transition
  Eigen::VectorXd targets;           // y(r, s') per transition
};

/// Sum over the batch of (Q_total(s, a; prediction) - y(r, s'))^2 and its
/// gradient with respect to every prediction network. Target networks are
/// read only; each agent draws config.sample_count next actions once and
/// shares them across the batch.
TdLoss td_loss(const PreparedBatch& batch, const std::vector<Agent>& agents, const Mixer& mixer,
               const TrainConfig& config, Rng& rng);

/// Sample a batch, step every prediction net with Adam, then soft-update
/// every target net. Returns the loss measured before the update.
double train_step(std::vector<Agent>& agents, const Mixer& mixer, const Dataset& dataset,
                  const TrainConfig& config, const SimConfig& sim, Rng& rng);

/// Greedy thresholds from each agent's prediction network.
ThresholdAction select_actions(const std::vector<Agent>& agents, const Eigen::Vector3d& state,
                               int sample_count, Rng& rng);

/// Owns agents, mixer and the training random stream.
class Learner {
 public:
  Learner(TrainConfig config, SimConfig sim);

  double train_step(const Dataset& dataset);

  ThresholdAction select_actions(const Observation& obs, Rng& rng) const;

  const std::vector<Agent>& agents() const { return agents_; }
  std::vector<Agent>& agents() { return agents_; }
  const TrainConfig& config() const { return config_; }
  const SimConfig& sim() const { return sim_; }
  const Mixer& mixer() const { return mixer_; }
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t step) { step_ = step; }
  Rng& rng() { return rng_; }

 private:
  TrainConfig config_;
  SimConfig sim_;
  Mixer mixer_;
  std::vector<Agent> agents_;
  Rng rng_;
  std::int64_t step_ = 0;
};

/// Greedy policy that restarts its candidate sample stream from
/// `sample_seed` at every control step. The thresholds then depend on the
/// observation only, which keeps evaluations reproducible and makes a
/// constant functional give constant thresholds.
Policy greedy_policy(const Learner& learner, std::uint64_t sample_seed);

}  // namespace exotune
