#include "exotune/approximator.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace exotune {
namespace {

Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kIdentity:
      return z;
  }
  return z;
}

// Elementwise derivative of the activation at pre-activation z.
Eigen::MatrixXd activation_slope(Activation a, const Eigen::MatrixXd& z) {
  switch (a) {
    case Activation::kTanh:
      return (1.0 - z.array().tanh().square()).matrix();
    case Activation::kRelu:
      return (z.array() > 0.0).cast<double>().matrix();
    case Activation::kIdentity:
      return Eigen::MatrixXd::Ones(z.rows(), z.cols());
  }
  return Eigen::MatrixXd::Ones(z.rows(), z.cols());
}

bool grads_finite(const Gradients& g) {
  for (const auto& l : g) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

}  // namespace

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::kTanh:
      return "tanh";
    case Activation::kRelu:
      return "relu";
    case Activation::kIdentity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  if (name == "identity") return Activation::kIdentity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::vector<Eigen::Index> NetworkParams::layer_sizes() const {
  std::vector<Eigen::Index> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().weights.cols());
  for (const auto& l : layers) sizes.push_back(l.weights.rows());
  return sizes;
}

bool NetworkParams::all_finite() const {
  for (const auto& l : layers) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

void NetworkParams::validate() const {
  if (layers.empty()) throw std::invalid_argument("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weights.rows() == 0 || l.weights.cols() == 0 || l.bias.size() != l.weights.rows()) {
      throw std::invalid_argument("layer " + std::to_string(i) + " has inconsistent shape");
    }
    if (i > 0 && layers[i - 1].weights.rows() != l.weights.cols()) {
      throw std::invalid_argument("layer " + std::to_string(i) + " fan-in does not match previous fan-out");
    }
  }
}

Gradients zero_gradients(const NetworkParams& params) {
  Gradients g;
  g.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    g.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                 Eigen::VectorXd::Zero(l.bias.size())});
  }
  return g;
}

bool same_shape(const NetworkParams& a, const NetworkParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (a.layers[i].weights.rows() != b.layers[i].weights.rows() ||
        a.layers[i].weights.cols() != b.layers[i].weights.cols()) {
      return false;
    }
  }
  return true;
}

NetworkParams init_network(std::span<const int> layer_sizes,
                           std::span<const Activation> activations, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("need at least input and output sizes");
  if (activations.size() != layer_sizes.size() - 1) {
    throw std::invalid_argument("need one activation per layer");
  }
  for (int s : layer_sizes) {
    if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  NetworkParams params;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const int fan_in = layer_sizes[i];
    const int fan_out = layer_sizes[i + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer;
    layer.weights.resize(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) layer.weights(r, c) = dist(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layer.activation = activations[i];
    params.layers.push_back(std::move(layer));
  }
  return params;
}

ForwardResult forward(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.input_size()) {
    throw std::invalid_argument("input has " + std::to_string(inputs.rows()) +
                                " rows, network expects " + std::to_string(params.input_size()));
  }
  if (!inputs.allFinite()) throw std::invalid_argument("network input must be finite");
  ForwardResult result;
  result.tape.inputs.reserve(params.layers.size());
  result.tape.pre_activations.reserve(params.layers.size());
  Eigen::MatrixXd x = inputs;
  for (const auto& layer : params.layers) {
    Eigen::MatrixXd z = layer.weights * x;
    z.colwise() += layer.bias;
    result.tape.inputs.push_back(std::move(x));
    x = activate(layer.activation, z);
    result.tape.pre_activations.push_back(std::move(z));
  }
  result.output = std::move(x);
  return result;
}

Eigen::MatrixXd predict(const NetworkParams& params, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != params.input_size()) {
    throw std::invalid_argument("input dimension does not match network");
  }
  Eigen::MatrixXd x = inputs;
  for (const auto& layer : params.layers) {
    Eigen::MatrixXd z = layer.weights * x;
    z.colwise() += layer.bias;
    x = activate(layer.activation, z);
  }
  return x;
}

Eigen::VectorXd predict(const NetworkParams& params, const Eigen::VectorXd& input) {
  return predict(params, Eigen::MatrixXd(input));
}

Gradients backward(const NetworkParams& params, const ForwardTape& tape,
                   const Eigen::MatrixXd& output_gradient) {
  const std::size_t n = params.layers.size();
  if (tape.inputs.size() != n || tape.pre_activations.size() != n) {
    throw std::invalid_argument("tape does not match network depth");
  }
  if (output_gradient.rows() != params.output_size() ||
      output_gradient.cols() != tape.inputs.front().cols()) {
    throw std::invalid_argument("output gradient shape does not match forward batch");
  }
  Gradients grads(n);
  Eigen::MatrixXd delta = output_gradient;
  for (std::size_t i = n; i-- > 0;) {
    const auto& layer = params.layers[i];
    delta = delta.cwiseProduct(activation_slope(layer.activation, tape.pre_activations[i]));
    grads[i].weights = delta * tape.inputs[i].transpose();
    grads[i].bias = delta.rowwise().sum();
    if (i > 0) delta = layer.weights.transpose() * delta;
  }
  return grads;
}

AdamState make_adam_state(const NetworkParams& params, double learning_rate) {
  AdamState state;
  state.first_moment = zero_gradients(params);
  state.second_moment = zero_gradients(params);
  state.learning_rate = learning_rate;
  return state;
}

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state) {
  if (grads.size() != params.layers.size() || state.first_moment.size() != params.layers.size()) {
    throw std::invalid_argument("gradient tree does not match network");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (grads[i].weights.rows() != params.layers[i].weights.rows() ||
        grads[i].weights.cols() != params.layers[i].weights.cols() ||
        grads[i].bias.size() != params.layers[i].bias.size()) {
      throw std::invalid_argument("gradient shape mismatch at layer " + std::to_string(i));
    }
  }
  if (!grads_finite(grads)) throw std::domain_error("non-finite gradient rejected by adam_step");

  state.step += 1;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double lr = state.learning_rate;
  const double eps = state.epsilon;

  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < grads.size(); ++i) {
    update(params.layers[i].weights, grads[i].weights, state.first_moment[i].weights,
           state.second_moment[i].weights);
    update(params.layers[i].bias, grads[i].bias, state.first_moment[i].bias,
           state.second_moment[i].bias);
  }
}

void soft_update(const NetworkParams& prediction, NetworkParams& target, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
  if (!same_shape(prediction, target)) {
    throw std::invalid_argument("prediction and target networks differ in shape");
  }
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    auto& t = target.layers[i];
    const auto& p = prediction.layers[i];
    t.weights = tau * p.weights + (1.0 - tau) * t.weights;
    t.bias = tau * p.bias + (1.0 - tau) * t.bias;
  }
}

}  // namespace exotune
