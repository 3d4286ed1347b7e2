#include "exotune/learner.hpp"

#include <cmath>
#include <stdexcept>

namespace exotune {
namespace {

// Feature rows (b x k) for a row of raw actions.
Eigen::MatrixXd features_for(const Agent& agent, const Eigen::RowVectorXd& raw) {
  Eigen::MatrixXd unit(1, raw.size());
  for (Eigen::Index j = 0; j < raw.size(); ++j) {
    unit(0, j) = agent.bounds.normalize(Eigen::VectorXd::Constant(1, raw[j]))[0];
  }
  return action_feature_matrix(unit, agent.basis);
}

// Per-column max over M sampled actions of C(s')^T phi(a'), target net.
Eigen::VectorXd sampled_target_max(const Agent& agent, const Eigen::MatrixXd& next_states,
                                   int sample_count, Rng& rng) {
  const Eigen::MatrixXd coeffs = predict(agent.target, next_states);  // k x b
  const Eigen::MatrixXd raw = sample_actions(agent.bounds, sample_count, rng);
  Eigen::MatrixXd unit(raw.rows(), raw.cols());
  for (Eigen::Index m = 0; m < raw.cols(); ++m) unit.col(m) = agent.bounds.normalize(raw.col(m));
  const Eigen::MatrixXd phi = action_feature_matrix(unit, agent.basis);  // M x k
  return (phi * coeffs).colwise().maxCoeff().transpose();
}

}  // namespace

std::string to_string(AgentId id) { return id == AgentId::kBiceps ? "biceps" : "triceps"; }

AgentId agent_id_from_string(const std::string& name) {
  if (name == "biceps") return AgentId::kBiceps;
  if (name == "triceps") return AgentId::kTriceps;
  throw std::invalid_argument("unknown agent '" + name + "'");
}

std::string to_string(RewardAssignment a) {
  return a == RewardAssignment::kShared ? "shared" : "split-half";
}

RewardAssignment reward_assignment_from_string(const std::string& name) {
  if (name == "shared") return RewardAssignment::kShared;
  if (name == "split-half") return RewardAssignment::kSplitHalf;
  throw std::invalid_argument("unknown reward assignment '" + name + "' (expected shared|split-half)");
}

double Mixer::mix(std::span<const double> q_values, std::size_t expected_agents) const {
  if (q_values.size() != expected_agents) throw std::invalid_argument("one Q-value per agent expected");
  double total = 0.0;
  for (double q : q_values) {
    if (!std::isfinite(q)) throw std::invalid_argument("Q-values must be finite");
    total += q;
  }
  return total;
}

Eigen::VectorXd Mixer::mix_batch(const Eigen::MatrixXd& q) const {
  return q.colwise().sum().transpose();
}

Eigen::MatrixXd Mixer::gradient(const Eigen::MatrixXd& q) const {
  return Eigen::MatrixXd::Ones(q.rows(), q.cols());
}

void TrainConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("train.gamma must lie in [0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("train.tau must lie in (0, 1]");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (steps < 0) throw std::invalid_argument("train.steps must be >= 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be > 0");
  if (sample_count < 1) throw std::invalid_argument("train.sample_count must be >= 1");
  if (basis_order < 0) throw std::invalid_argument("train.basis_order must be >= 0");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("train.hidden sizes must be positive");
  }
}

Agent make_agent(AgentId id, const TrainConfig& config, std::uint64_t seed) {
  Agent agent;
  agent.id = id;
  agent.basis = BasisSpec(config.basis_order, 1);
  agent.sample_count = config.sample_count;
  std::vector<int> sizes{3};
  std::vector<Activation> acts;
  for (int h : config.hidden) {
    sizes.push_back(h);
    acts.push_back(Activation::kTanh);
  }
  sizes.push_back(agent.basis.k());
  acts.push_back(Activation::kIdentity);
  agent.prediction = init_network(sizes, acts, seed);
  agent.target = agent.prediction;
  agent.target.role = NetworkRole::kTarget;
  agent.adam = make_adam_state(agent.prediction, config.learning_rate);
  return agent;
}

std::vector<Agent> make_agents(const TrainConfig& config) {
  return {make_agent(AgentId::kBiceps, config, episode_seed(config.seed, 1)),
          make_agent(AgentId::kTriceps, config, episode_seed(config.seed, 2))};
}

std::vector<double> agent_rewards(double team_reward, RewardAssignment assignment,
                                  std::size_t agent_count) {
  const double each = assignment == RewardAssignment::kShared
                          ? team_reward
                          : team_reward / static_cast<double>(agent_count);
  return std::vector<double>(agent_count, each);
}

double agent_q(const Agent& agent, const Eigen::Vector3d& state, double action, bool use_target) {
  const Eigen::VectorXd raw = Eigen::VectorXd::Constant(1, action);
  if (!agent.bounds.contains(raw)) throw std::out_of_range("threshold action outside agent bounds");
  const auto& net = use_target ? agent.target : agent.prediction;
  const CoefficientVector coeffs{predict(net, Eigen::VectorXd(state))};
  return evaluate_q(coeffs, action_features(agent.bounds.normalize(raw), agent.basis));
}

double td_target(std::span<const double> rewards, const Eigen::Vector3d& next_state,
                 const std::vector<Agent>& agents, const Mixer& mixer, double gamma,
                 int sample_count, Rng& rng, bool done) {
  if (rewards.size() != agents.size()) throw std::invalid_argument("one reward per agent expected");
  double y = 0.0;
  for (double r : rewards) y += r;
  if (done) return y;
  Eigen::MatrixXd maxima(agents.size(), 1);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    maxima(static_cast<Eigen::Index>(i), 0) =
        sampled_target_max(agents[i], Eigen::MatrixXd(next_state), sample_count, rng)[0];
  }
  return y + gamma * mixer.mix_batch(maxima)[0];
}

PreparedBatch prepare_batch(std::span<const Transition> batch, const SimConfig& sim) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  PreparedBatch out;
  out.states.resize(3, b);
  out.next_states.resize(3, b);
  out.actions.resize(2, b);
  out.rewards.resize(b);
  out.done.resize(b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& t = batch[static_cast<std::size_t>(j)];
    out.states.col(j) = normalize_state(t.state, sim);
    out.next_states.col(j) = normalize_state(t.next_state, sim);
    out.actions(0, j) = t.action.biceps;
    out.actions(1, j) = t.action.triceps;
    out.rewards[j] = t.reward;
    out.done[j] = t.done ? 1.0 : 0.0;
  }
  return out;
}

TdLoss td_loss(const PreparedBatch& batch, const std::vector<Agent>& agents, const Mixer& mixer,
               const TrainConfig& config, Rng& rng) {
  const Eigen::Index b = batch.size();
  if (b == 0) throw std::invalid_argument("td_loss needs a non-empty batch");
  const auto n = static_cast<Eigen::Index>(agents.size());
  if (batch.actions.rows() != n) throw std::invalid_argument("batch actions must have one row per agent");

  std::vector<ForwardResult> passes;
  std::vector<Eigen::MatrixXd> phis;
  Eigen::MatrixXd q(n, b);
  Eigen::MatrixXd next_max(n, b);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Agent& agent = agents[static_cast<std::size_t>(i)];
    passes.push_back(forward(agent.prediction, batch.states));
    phis.push_back(features_for(agent, batch.actions.row(i)));  // b x k
    q.row(i) = (passes.back().output.transpose().cwiseProduct(phis.back())).rowwise().sum().transpose();
    next_max.row(i) = sampled_target_max(agent, batch.next_states, config.sample_count, rng).transpose();
  }

  const double per_agent_share =
      config.reward_assignment == RewardAssignment::kShared ? 1.0 : 1.0 / static_cast<double>(n);
  const Eigen::VectorXd reward_sum = batch.rewards * (per_agent_share * static_cast<double>(n));
  const Eigen::VectorXd bootstrap = mixer.mix_batch(next_max);

  TdLoss out;
  out.predictions = mixer.mix_batch(q);
  out.targets = reward_sum.array() + config.gamma * (1.0 - batch.done.array()) * bootstrap.array();
  const Eigen::VectorXd err = out.predictions - out.targets;
  out.loss = err.squaredNorm();

  const Eigen::MatrixXd dq = mixer.gradient(q).array().rowwise() * (2.0 * err.transpose()).array();
  for (Eigen::Index i = 0; i < n; ++i) {
    // dL/dC(s) column j = dL/dq_ij * phi(a_ij).
    const Eigen::MatrixXd dcoeffs =
        phis[static_cast<std::size_t>(i)].transpose().array().rowwise() * dq.row(i).array();
    out.gradients.push_back(backward(agents[static_cast<std::size_t>(i)].prediction,
                                     passes[static_cast<std::size_t>(i)].tape, dcoeffs));
  }
  return out;
}

double train_step(std::vector<Agent>& agents, const Mixer& mixer, const Dataset& dataset,
                  const TrainConfig& config, const SimConfig& sim, Rng& rng) {
  const auto batch = sample_batch(dataset, config.batch_size, rng);
  const auto prepared = prepare_batch(batch, sim);
  const TdLoss result = td_loss(prepared, agents, mixer, config, rng);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    adam_step(agents[i].prediction, result.gradients[i], agents[i].adam);
  }
  for (auto& agent : agents) soft_update(agent.prediction, agent.target, config.tau);
  return result.loss;
}

ThresholdAction select_actions(const std::vector<Agent>& agents, const Eigen::Vector3d& state,
                               int sample_count, Rng& rng) {
  ThresholdAction action;
  for (const auto& agent : agents) {
    const CoefficientVector coeffs{predict(agent.prediction, Eigen::VectorXd(state))};
    const double th = argmax_sampled(coeffs, agent.basis, agent.bounds, sample_count, rng).action[0];
    (agent.id == AgentId::kBiceps ? action.biceps : action.triceps) = th;
  }
  return action;
}

Learner::Learner(TrainConfig config, SimConfig sim)
    : config_(std::move(config)), sim_(sim), rng_(config_.seed) {
  config_.validate();
  sim_.validate();
  agents_ = make_agents(config_);
}

double Learner::train_step(const Dataset& dataset) {
  const double loss = exotune::train_step(agents_, mixer_, dataset, config_, sim_, rng_);
  ++step_;
  return loss;
}

ThresholdAction Learner::select_actions(const Observation& obs, Rng& rng) const {
  return exotune::select_actions(agents_, normalize_state(obs, sim_), config_.sample_count, rng);
}

Policy greedy_policy(const Learner& learner, std::uint64_t sample_seed) {
  return [&learner, sample_seed](const SimState& state) {
    Rng rng(sample_seed);
    return learner.select_actions(state.obs, rng);
  };
}

}  // namespace exotune
