#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace exotune {

enum class Activation { kTanh, kRelu, kIdentity };
enum class NetworkRole { kPrediction, kTarget };

std::string to_string(Activation activation);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_out x fan_in
  Eigen::VectorXd bias;     // fan_out
  Activation activation = Activation::kIdentity;
};

/// Weights and biases of a fully connected network.
struct NetworkParams {
  std::vector<DenseLayer> layers;
  NetworkRole role = NetworkRole::kPrediction;

  Eigen::Index input_size() const { return layers.front().weights.cols(); }
  Eigen::Index output_size() const { return layers.back().weights.rows(); }
  std::vector<Eigen::Index> layer_sizes() const;
  bool all_finite() const;
  /// Throws if consecutive layer shapes do not compose.
  void validate() const;
};

struct LayerGradient {
  Eigen::MatrixXd weights;
  Eigen::VectorXd bias;
};

/// Same shape tree as NetworkParams::layers.
using Gradients = std::vector<LayerGradient>;

Gradients zero_gradients(const NetworkParams& params);
bool same_shape(const NetworkParams& a, const NetworkParams& b);

/// Per-layer inputs and pre-activations recorded during forward(); enough to
/// run backward() without re-evaluating the network. Columns are samples.
struct ForwardTape {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<Eigen::MatrixXd> pre_activations;
};

struct ForwardResult {
  Eigen::MatrixXd output;
  ForwardTape tape;
};

/// Glorot-uniform weights, zero biases. `activations` has one entry per layer
/// (layer_sizes.size() - 1 entries).
NetworkParams init_network(std::span<const int> layer_sizes,
                           std::span<const Activation> activations, std::uint64_t seed);

/// Batched forward pass; each column of `inputs` is one sample.
ForwardResult forward(const NetworkParams& params, const Eigen::MatrixXd& inputs);

/// Forward pass without recording a tape.
Eigen::MatrixXd predict(const NetworkParams& params, const Eigen::MatrixXd& inputs);
Eigen::VectorXd predict(const NetworkParams& params, const Eigen::VectorXd& input);

/// Gradient of a scalar loss with respect to every parameter, given the
/// loss gradient with respect to each output column. Gradients are summed over
/// the batch columns.
Gradients backward(const NetworkParams& params, const ForwardTape& tape,
                   const Eigen::MatrixXd& output_gradient);

struct AdamState {
  Gradients first_moment;
  Gradients second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;
};

AdamState make_adam_state(const NetworkParams& params, double learning_rate = 1e-3);

/// One bias-corrected Adam update. Rejects non-finite gradients without
/// touching params or state.
void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state);

/// target <- tau * prediction + (1 - tau) * target, parameter by parameter.
void soft_update(const NetworkParams& prediction, NetworkParams& target, double tau);

}  // namespace exotune
