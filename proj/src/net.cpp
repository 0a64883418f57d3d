#include "mlrank/net.hpp"

#include <cmath>
#include <stdexcept>

namespace mlrank {

Eigen::VectorXd FeedForward::forward(const Eigen::VectorXd& x,
                                     Trace* trace) const {
  if (x.size() != input_dim())
    throw std::invalid_argument("input dimension " + std::to_string(x.size()) +
                                " != " + std::to_string(input_dim()));
  if (trace) {
    trace->acts.clear();
    trace->acts.reserve(weights.size() + 1);
    trace->acts.push_back(x);
  }
  Eigen::VectorXd a = x;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    Eigen::VectorXd z = weights[i] * a + biases[i];
    if (i + 1 < weights.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (trace) trace->acts.push_back(a);
  }
  return a;
}

void FeedForward::backward(const Trace& trace, const Eigen::VectorXd& grad_out,
                           FeedForward& grads) const {
  Eigen::VectorXd g = grad_out;
  for (int i = num_layers() - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    grads.weights[ui].noalias() += g * trace.acts[ui].transpose();
    grads.biases[ui] += g;
    if (i > 0) {
      Eigen::VectorXd back = weights[ui].transpose() * g;
      // ReLU mask from the stored post-activation: positive <=> active.
      const auto& act = trace.acts[ui];
      for (Eigen::Index j = 0; j < back.size(); ++j)
        if (act[j] <= 0.0) back[j] = 0.0;
      g = std::move(back);
    }
  }
}

FeedForward FeedForward::zeros_like() const {
  FeedForward z;
  z.weights.reserve(weights.size());
  z.biases.reserve(biases.size());
  for (const auto& w : weights)
    z.weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
  for (const auto& b : biases)
    z.biases.push_back(Eigen::VectorXd::Zero(b.size()));
  return z;
}

std::size_t FeedForward::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

std::vector<double> FeedForward::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& w = weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    const auto& b = biases[i];
    for (Eigen::Index r = 0; r < b.size(); ++r) flat.push_back(b[r]);
  }
  return flat;
}

void FeedForward::unflatten(const std::vector<double>& flat) {
  if (flat.size() != parameter_count())
    throw std::invalid_argument("flat parameter size mismatch");
  std::size_t idx = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    auto& w = weights[i];
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[idx++];
    auto& b = biases[i];
    for (Eigen::Index r = 0; r < b.size(); ++r) b[r] = flat[idx++];
  }
}

FeedForward init_glorot(const std::vector<int>& dims, Rng& rng) {
  if (dims.size() < 2)
    throw std::invalid_argument("need at least input and output dims");
  for (int d : dims)
    if (d < 1) throw std::invalid_argument("layer dims must be >= 1");

  FeedForward net;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const int in = dims[i];
    const int out = dims[i + 1];
    const double limit = std::sqrt(6.0 / (in + out));
    Eigen::MatrixXd w(out, in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c)
        w(r, c) = rng.uniform(-limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(out));
  }
  return net;
}

void SgdMomentum::step(FeedForward& params, const FeedForward& grads,
                       FeedForward& velocity) const {
  for (std::size_t i = 0; i < params.weights.size(); ++i) {
    velocity.weights[i] =
        momentum * velocity.weights[i] -
        learning_rate * (grads.weights[i] + weight_decay * params.weights[i]);
    params.weights[i] += velocity.weights[i];
    velocity.biases[i] =
        momentum * velocity.biases[i] -
        learning_rate * (grads.biases[i] + weight_decay * params.biases[i]);
    params.biases[i] += velocity.biases[i];
  }
}

}  // namespace mlrank
