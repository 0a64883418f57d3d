#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mlrank/data.hpp"
#include "mlrank/losses.hpp"
#include "mlrank/net.hpp"

namespace mlrank {

enum class Arch { kLinear, kMlp };

const char* arch_name(Arch arch);
Arch parse_arch(const std::string& name);  // throws invalid_argument

/// The score model f(x): linear (scores = Wx + b) or a one-hidden-layer
/// ReLU MLP. The penultimate representation — the input to the final linear
/// layer — is what the decision heads consume: x itself for linear, the
/// hidden activation for the MLP.
struct PredictorModel {
  Arch arch = Arch::kLinear;
  int feature_dim = 0;
  int vocab_size = 0;
  int hidden_size = 0;  // 0 for linear
  FeedForward net;

  int penultimate_dim() const {
    return arch == Arch::kLinear ? feature_dim : hidden_size;
  }
};

struct Forward {
  Eigen::VectorXd scores;
  Eigen::VectorXd penultimate;
};

PredictorModel init_predictor(Arch arch, int feature_dim, int vocab_size,
                              int hidden_size, Rng& rng);

Forward forward(const PredictorModel& model, const Eigen::VectorXd& x);

struct TrainConfig {
  LossKind loss = LossKind::kLsep;
  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  LossConfig loss_config;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;  // 1-based
  double mean_loss = 0;
  std::size_t samples_seen = 0;
};

struct TrainLog {
  std::vector<EpochLog> epochs;
};

/// Shuffled mini-batch SGD with momentum and L2 weight decay. The gradient
/// is the batch mean; the last batch of an epoch may be smaller and is
/// averaged over its own size. Every sample needs at least one positive and
/// one negative label. Throws NumericalError (with epoch, batch, and value)
/// if a sample loss comes out non-finite.
std::pair<PredictorModel, TrainLog> train(const Dataset& ds, Arch arch,
                                          int hidden_size,
                                          const TrainConfig& cfg);

std::vector<Eigen::VectorXd> predict_scores(const PredictorModel& model,
                                            const Dataset& ds);

/// JSON checkpoint with architecture tag, shapes, and row-major parameter
/// arrays; load(save(m)) reproduces the parameters exactly.
void save_predictor(const PredictorModel& model, const std::string& path);
PredictorModel load_predictor(const std::string& path);

}  // namespace mlrank
