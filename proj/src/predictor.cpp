#include "mlrank/predictor.hpp"

#include <cmath>
#include <stdexcept>

#include "mlrank/checkpoint.hpp"
#include "mlrank/errors.hpp"

namespace mlrank {

namespace {

void scale_params(FeedForward& net, double factor) {
  for (auto& w : net.weights) w *= factor;
  for (auto& b : net.biases) b *= factor;
}

void zero_params(FeedForward& net) {
  for (auto& w : net.weights) w.setZero();
  for (auto& b : net.biases) b.setZero();
}

void check_trainable(const Dataset& ds) {
  ds.validate();
  if (ds.samples.empty())
    throw std::invalid_argument("training dataset is empty");
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    if (ds.samples[i].labels.size() == ds.vocab_size)
      throw std::invalid_argument("sample " + std::to_string(i) +
                                  " has no negative labels");
}

}  // namespace

const char* arch_name(Arch arch) {
  return arch == Arch::kLinear ? "linear" : "mlp";
}

Arch parse_arch(const std::string& name) {
  if (name == "linear") return Arch::kLinear;
  if (name == "mlp") return Arch::kMlp;
  throw std::invalid_argument("unknown architecture '" + name +
                              "' (expected linear or mlp)");
}

PredictorModel init_predictor(Arch arch, int feature_dim, int vocab_size,
                              int hidden_size, Rng& rng) {
  if (feature_dim < 1 || vocab_size < 2)
    throw std::invalid_argument("need feature_dim >= 1 and vocab_size >= 2");
  PredictorModel m;
  m.arch = arch;
  m.feature_dim = feature_dim;
  m.vocab_size = vocab_size;
  if (arch == Arch::kLinear) {
    m.hidden_size = 0;
    m.net = init_glorot({feature_dim, vocab_size}, rng);
  } else {
    if (hidden_size < 1)
      throw std::invalid_argument("mlp needs hidden_size >= 1");
    m.hidden_size = hidden_size;
    m.net = init_glorot({feature_dim, hidden_size, vocab_size}, rng);
  }
  return m;
}

Forward forward(const PredictorModel& model, const Eigen::VectorXd& x) {
  FeedForward::Trace trace;
  Forward out;
  out.scores = model.net.forward(x, &trace);
  out.penultimate =
      model.arch == Arch::kLinear ? trace.acts[0] : trace.acts[1];
  return out;
}

std::pair<PredictorModel, TrainLog> train(const Dataset& ds, Arch arch,
                                          int hidden_size,
                                          const TrainConfig& cfg) {
  check_trainable(ds);
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.batch_size < 1)
    throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.learning_rate < 0)
    throw std::invalid_argument("learning_rate must be >= 0");
  if (!(cfg.momentum >= 0 && cfg.momentum < 1))
    throw std::invalid_argument("momentum must be in [0, 1)");
  if (cfg.weight_decay < 0)
    throw std::invalid_argument("weight_decay must be >= 0");

  Rng root(cfg.seed);
  Rng init_rng = root.spawn(1);
  Rng shuffle_rng = root.spawn(2);
  Rng pair_rng = root.spawn(3);

  PredictorModel model =
      init_predictor(arch, ds.feature_dim, ds.vocab_size, hidden_size,
                     init_rng);
  FeedForward velocity = model.net.zeros_like();
  FeedForward batch_grads = model.net.zeros_like();
  const SgdMomentum sgd{cfg.learning_rate, cfg.momentum, cfg.weight_decay};

  const std::size_t n = ds.samples.size();
  TrainLog log;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto perm = shuffle_rng.permutation(n);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t end =
          std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      zero_params(batch_grads);
      for (std::size_t i = start; i < end; ++i) {
        const auto& sample = ds.samples[perm[i]];
        FeedForward::Trace trace;
        const Eigen::VectorXd scores =
            model.net.forward(sample.features, &trace);
        const LossResult lr = score_loss(scores, sample.labels, cfg.loss,
                                         cfg.loss_config, pair_rng);
        if (!std::isfinite(lr.value))
          throw NumericalError(
              "non-finite loss at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch_index) + ": value " +
              std::to_string(lr.value));
        loss_sum += lr.value;
        ++seen;
        model.net.backward(trace, lr.grad, batch_grads);
      }
      scale_params(batch_grads, 1.0 / static_cast<double>(end - start));
      sgd.step(model.net, batch_grads, velocity);
    }
    log.epochs.push_back(
        {epoch, loss_sum / static_cast<double>(n), seen});
  }
  return {std::move(model), std::move(log)};
}

std::vector<Eigen::VectorXd> predict_scores(const PredictorModel& model,
                                            const Dataset& ds) {
  if (!ds.samples.empty() && ds.feature_dim != model.feature_dim)
    throw std::invalid_argument(
        "dataset feature_dim " + std::to_string(ds.feature_dim) +
        " != model feature_dim " + std::to_string(model.feature_dim));
  std::vector<Eigen::VectorXd> out;
  out.reserve(ds.samples.size());
  for (const auto& s : ds.samples)
    out.push_back(model.net.forward(s.features));
  return out;
}

void save_predictor(const PredictorModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "checkpoint";
  j["model"] = "predictor";
  j["architecture"] = arch_name(model.arch);
  j["feature_dim"] = model.feature_dim;
  j["vocab_size"] = model.vocab_size;
  j["hidden_size"] = model.hidden_size;
  j["layers"] = net_to_json(model.net);
  write_json_file(j, path);
}

PredictorModel load_predictor(const std::string& path) {
  const auto j = read_json_file(path);
  if (!j.is_object() || j.value("model", "") != "predictor")
    throw ConfigError(path + ": not a predictor checkpoint");
  PredictorModel m;
  try {
    m.arch = parse_arch(j.at("architecture").get<std::string>());
    m.feature_dim = j.at("feature_dim").get<int>();
    m.vocab_size = j.at("vocab_size").get<int>();
    m.hidden_size = j.at("hidden_size").get<int>();
    m.net = net_from_json(j.at("layers"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const bool linear = m.arch == Arch::kLinear;
  const int expected_layers = linear ? 1 : 2;
  if (m.net.num_layers() != expected_layers ||
      m.net.input_dim() != m.feature_dim ||
      m.net.output_dim() != m.vocab_size ||
      (!linear && static_cast<int>(m.net.weights[0].rows()) != m.hidden_size))
    throw ConfigError(path + ": layer shapes do not match header");
  return m;
}

}  // namespace mlrank
