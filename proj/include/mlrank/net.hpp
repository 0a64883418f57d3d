#pragma once

#include <Eigen/Core>
#include <vector>

#include "mlrank/rng.hpp"

namespace mlrank {

/// Plain fully connected network with ReLU after every layer except the
/// last. Layer i maps dims[i] -> dims[i+1] via weights[i] (rows = out,
/// cols = in) and biases[i]. Shared by the score predictor (0 or 1 hidden
/// layer) and the decision heads (2 hidden layers).
struct FeedForward {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int output_dim() const { return static_cast<int>(weights.back().rows()); }

  /// Post-activation value of every layer; acts[0] is the input, acts[i]
  /// the output of layer i-1 (ReLU already applied for hidden layers).
  struct Trace {
    std::vector<Eigen::VectorXd> acts;
  };

  Eigen::VectorXd forward(const Eigen::VectorXd& x,
                          Trace* trace = nullptr) const;

  /// Accumulates d(loss)/d(params) into `grads` (same shapes, caller-zeroed)
  /// given the forward trace and d(loss)/d(output). The ReLU subgradient at
  /// exactly zero is 0.
  void backward(const Trace& trace, const Eigen::VectorXd& grad_out,
                FeedForward& grads) const;

  /// Same shapes, all parameters zero (gradient / velocity buffers).
  FeedForward zeros_like() const;

  std::size_t parameter_count() const;

  /// Flat row-major view of all parameters, layer by layer (weights then
  /// bias per layer); used by checkpointing and finite-difference probes.
  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
};

/// Weights uniform in +/- sqrt(6 / (fan_in + fan_out)), biases zero.
FeedForward init_glorot(const std::vector<int>& dims, Rng& rng);

/// velocity <- momentum * velocity - lr * (grad + weight_decay * param);
/// param <- param + velocity.
struct SgdMomentum {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-5;

  void step(FeedForward& params, const FeedForward& grads,
            FeedForward& velocity) const;
};

}  // namespace mlrank
