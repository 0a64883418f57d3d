#include "mlrank/decision.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mlrank/checkpoint.hpp"
#include "mlrank/errors.hpp"
#include "mlrank/metrics.hpp"

namespace mlrank {

namespace {

double stable_softplus(double z) {
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

double stable_sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z))
                : std::exp(z) / (1.0 + std::exp(z));
}

// Indices of the k highest scores, ties won by the lower index.
std::vector<int> top_indices(const Eigen::VectorXd& scores, int k) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

void zero_params(FeedForward& net) {
  for (auto& w : net.weights) w.setZero();
  for (auto& b : net.biases) b.setZero();
}

void scale_params(FeedForward& net, double factor) {
  for (auto& w : net.weights) w *= factor;
  for (auto& b : net.biases) b *= factor;
}

void validate_train_config(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (cfg.batch_size < 1)
    throw std::invalid_argument("batch_size must be >= 1");
  if (cfg.learning_rate < 0)
    throw std::invalid_argument("learning_rate must be >= 0");
  if (!(cfg.momentum >= 0 && cfg.momentum < 1))
    throw std::invalid_argument("momentum must be in [0, 1)");
  if (cfg.weight_decay < 0)
    throw std::invalid_argument("weight_decay must be >= 0");
}

// Shuffled mini-batch SGD shared by both heads. `sample_loss(i, grads)`
// evaluates sample i and accumulates parameter gradients.
template <typename SampleLoss>
TrainLog run_sgd(FeedForward& net, std::size_t n, const TrainConfig& cfg,
                 Rng& shuffle_rng, SampleLoss&& sample_loss) {
  FeedForward velocity = net.zeros_like();
  FeedForward batch_grads = net.zeros_like();
  const SgdMomentum sgd{cfg.learning_rate, cfg.momentum, cfg.weight_decay};

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
        const double value = sample_loss(perm[i], batch_grads);
        if (!std::isfinite(value))
          throw NumericalError(
              "non-finite loss at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch_index) + ": value " +
              std::to_string(value));
        loss_sum += value;
        ++seen;
      }
      scale_params(batch_grads, 1.0 / static_cast<double>(end - start));
      sgd.step(net, batch_grads, velocity);
    }
    log.epochs.push_back({epoch, loss_sum / static_cast<double>(n), seen});
  }
  return log;
}

struct FrozenForwards {
  std::vector<Eigen::VectorXd> scores;
  std::vector<Eigen::VectorXd> penultimates;
};

FrozenForwards precompute_forwards(const Dataset& ds,
                                   const PredictorModel& predictor) {
  ds.validate();
  if (ds.samples.empty())
    throw std::invalid_argument("training dataset is empty");
  if (ds.feature_dim != predictor.feature_dim)
    throw std::invalid_argument("dataset feature_dim does not match model");
  if (ds.vocab_size != predictor.vocab_size)
    throw std::invalid_argument("dataset vocab_size does not match model");
  FrozenForwards f;
  f.scores.reserve(ds.samples.size());
  f.penultimates.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    Forward fw = forward(predictor, s.features);
    f.scores.push_back(std::move(fw.scores));
    f.penultimates.push_back(std::move(fw.penultimate));
  }
  return f;
}

}  // namespace

const char* head_kind_name(HeadKind head) {
  return head == HeadKind::kCount ? "count" : "threshold";
}

DecisionModel init_decision(HeadKind head, int input_dim, int vocab_size,
                            int max_labels, Rng& rng, int hidden1,
                            int hidden2) {
  if (input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (vocab_size < 2) throw std::invalid_argument("vocab_size must be >= 2");
  if (max_labels < 1) throw std::invalid_argument("max_labels must be >= 1");
  if (hidden1 < 1 || hidden2 < 1)
    throw std::invalid_argument("hidden sizes must be >= 1");
  DecisionModel m;
  m.head = head;
  m.input_dim = input_dim;
  m.vocab_size = vocab_size;
  m.max_labels = max_labels;
  const int out = head == HeadKind::kCount ? max_labels : vocab_size;
  m.net = init_glorot({input_dim, hidden1, hidden2, out}, rng);
  return m;
}

const char* rule_name(const DecisionRule& rule) {
  switch (rule.index()) {
    case 0: return "top_k";
    case 1: return "global_threshold";
    case 2: return "learned_count";
    default: return "learned_threshold";
  }
}

LabelSet decide(const DecisionRule& rule, const Eigen::VectorXd& scores,
                const Eigen::VectorXd& penultimate) {
  const int k_total = static_cast<int>(scores.size());

  if (const auto* top = std::get_if<TopK>(&rule)) {
    if (top->k < 1) throw std::invalid_argument("top_k needs k >= 1");
    if (top->k > k_total)
      throw std::invalid_argument("top_k k = " + std::to_string(top->k) +
                                  " exceeds vocabulary size " +
                                  std::to_string(k_total));
    return LabelSet(top_indices(scores, top->k));
  }

  if (const auto* glob = std::get_if<GlobalThreshold>(&rule)) {
    if (!std::isfinite(glob->threshold))
      throw std::invalid_argument("global threshold must be finite");
    std::vector<int> members;
    for (int j = 0; j < k_total; ++j)
      if (scores[j] > glob->threshold) members.push_back(j);
    return LabelSet(std::move(members));
  }

  if (const auto* count = std::get_if<LearnedCount>(&rule)) {
    const auto& m = count->model;
    if (m.head != HeadKind::kCount)
      throw std::invalid_argument("learned_count rule needs a count head");
    const Eigen::VectorXd logits = m.net.forward(penultimate);
    int best = 0;
    for (int j = 1; j < logits.size(); ++j)
      if (logits[j] > logits[best]) best = j;  // ties keep the smaller count
    const int k_hat = std::min(best + 1, k_total);
    return LabelSet(top_indices(scores, k_hat));
  }

  const auto& m = std::get<LearnedThreshold>(rule).model;
  if (m.head != HeadKind::kThreshold)
    throw std::invalid_argument("learned_threshold rule needs a threshold head");
  const Eigen::VectorXd theta = m.net.forward(penultimate);
  if (theta.size() != scores.size())
    throw std::invalid_argument("threshold head size does not match scores");
  std::vector<int> members;
  for (int j = 0; j < k_total; ++j)
    if (scores[j] > theta[j]) members.push_back(j);
  return LabelSet(std::move(members));
}

double count_head_loss(const DecisionModel& model,
                       const Eigen::VectorXd& penultimate, int label_count,
                       FeedForward* grads) {
  if (model.head != HeadKind::kCount)
    throw std::invalid_argument("count_head_loss needs a count head");
  if (label_count < 1) throw std::invalid_argument("label_count must be >= 1");
  const int target = std::min(label_count, model.max_labels) - 1;

  FeedForward::Trace trace;
  const Eigen::VectorXd z = model.net.forward(penultimate, &trace);
  const double zmax = z.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) sum += std::exp(z[j] - zmax);
  const double lse = zmax + std::log(sum);
  const double value = lse - z[target];

  if (grads) {
    Eigen::VectorXd gout(z.size());
    for (Eigen::Index j = 0; j < z.size(); ++j)
      gout[j] = std::exp(z[j] - lse);
    gout[target] -= 1.0;
    model.net.backward(trace, gout, *grads);
  }
  return value;
}

double threshold_head_loss(const DecisionModel& model,
                           const Eigen::VectorXd& scores,
                           const Eigen::VectorXd& penultimate,
                           const LabelSet& labels, FeedForward* grads) {
  if (model.head != HeadKind::kThreshold)
    throw std::invalid_argument("threshold_head_loss needs a threshold head");
  if (scores.size() != model.vocab_size)
    throw std::invalid_argument("scores size does not match vocab");
  labels.check_range(model.vocab_size);

  FeedForward::Trace trace;
  const Eigen::VectorXd theta = model.net.forward(penultimate, &trace);

  // Per class: BCE(sigmoid(s - theta), y) = softplus(s - theta) - y(s - theta)
  double value = 0.0;
  Eigen::VectorXd gtheta(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double z = scores[j] - theta[j];
    const double y = labels.contains(static_cast<int>(j)) ? 1.0 : 0.0;
    value += stable_softplus(z) - y * z;
    // d(value)/dz = sigmoid(z) - y; dz/dtheta = -1.
    gtheta[j] = y - stable_sigmoid(z);
  }
  if (grads) model.net.backward(trace, gtheta, *grads);
  return value;
}

std::pair<DecisionModel, TrainLog> train_count_head(
    const Dataset& ds, const PredictorModel& predictor, const TrainConfig& cfg,
    int max_labels, int hidden1, int hidden2) {
  validate_train_config(cfg);
  const FrozenForwards frozen = precompute_forwards(ds, predictor);

  Rng root(cfg.seed);
  Rng init_rng = root.spawn(1);
  Rng shuffle_rng = root.spawn(2);
  DecisionModel model =
      init_decision(HeadKind::kCount, predictor.penultimate_dim(),
                    ds.vocab_size, max_labels, init_rng, hidden1, hidden2);

  TrainLog log = run_sgd(
      model.net, ds.samples.size(), cfg, shuffle_rng,
      [&](std::size_t i, FeedForward& grads) {
        return count_head_loss(model, frozen.penultimates[i],
                               ds.samples[i].labels.size(), &grads);
      });
  return {std::move(model), std::move(log)};
}

std::pair<DecisionModel, TrainLog> train_threshold_head(
    const Dataset& ds, const PredictorModel& predictor, const TrainConfig& cfg,
    int hidden1, int hidden2) {
  validate_train_config(cfg);
  const FrozenForwards frozen = precompute_forwards(ds, predictor);

  Rng root(cfg.seed);
  Rng init_rng = root.spawn(1);
  Rng shuffle_rng = root.spawn(2);
  DecisionModel model =
      init_decision(HeadKind::kThreshold, predictor.penultimate_dim(),
                    ds.vocab_size, /*max_labels=*/1, init_rng, hidden1,
                    hidden2);

  TrainLog log = run_sgd(
      model.net, ds.samples.size(), cfg, shuffle_rng,
      [&](std::size_t i, FeedForward& grads) {
        return threshold_head_loss(model, frozen.scores[i],
                                   frozen.penultimates[i],
                                   ds.samples[i].labels, &grads);
      });
  return {std::move(model), std::move(log)};
}

DecisionRule cross_validate_rule(CvRuleKind kind,
                                 const std::vector<Eigen::VectorXd>& scores,
                                 const std::vector<LabelSet>& labels,
                                 int vocab_size) {
  if (scores.empty() || scores.size() != labels.size())
    throw std::invalid_argument(
        "cross_validate_rule needs aligned, nonempty inputs");

  auto macro_f1_of = [&](const DecisionRule& rule) {
    std::vector<EvalPair> pairs;
    pairs.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
      pairs.push_back({decide(rule, scores[i], scores[i]), labels[i]});
    return evaluate(pairs, vocab_size).macro_f1;
  };

  if (kind == CvRuleKind::kTopK) {
    // Grid 1..10 (capped at the vocabulary size, since top_k rejects
    // k > vocab_size). Strict improvement keeps the smaller k on ties.
    const int k_max = std::min(10, vocab_size);
    int best_k = 1;
    double best_f1 = -1.0;
    for (int k = 1; k <= k_max; ++k) {
      const double f1 = macro_f1_of(TopK{k});
      if (f1 > best_f1) {
        best_f1 = f1;
        best_k = k;
      }
    }
    return TopK{best_k};
  }

  double lo = scores.front().minCoeff();
  double hi = scores.front().maxCoeff();
  for (const auto& s : scores) {
    lo = std::min(lo, s.minCoeff());
    hi = std::max(hi, s.maxCoeff());
  }
  constexpr int kGridPoints = 50;
  double best_t = lo;
  double best_f1 = -1.0;
  for (int i = 0; i < kGridPoints; ++i) {
    const double t = lo + (hi - lo) * i / (kGridPoints - 1);
    const double f1 = macro_f1_of(GlobalThreshold{t});
    if (f1 >= best_f1) {  // >= keeps the larger threshold on ties
      best_f1 = f1;
      best_t = t;
    }
  }
  return GlobalThreshold{best_t};
}

void save_decision(const DecisionModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "checkpoint";
  j["model"] = "decision";
  j["head"] = head_kind_name(model.head);
  j["input_dim"] = model.input_dim;
  j["vocab_size"] = model.vocab_size;
  j["max_labels"] = model.max_labels;
  j["layers"] = net_to_json(model.net);
  write_json_file(j, path);
}

DecisionModel load_decision(const std::string& path) {
  const auto j = read_json_file(path);
  if (!j.is_object() || j.value("model", "") != "decision")
    throw ConfigError(path + ": not a decision checkpoint");
  DecisionModel m;
  try {
    const auto head = j.at("head").get<std::string>();
    if (head == "count") {
      m.head = HeadKind::kCount;
    } else if (head == "threshold") {
      m.head = HeadKind::kThreshold;
    } else {
      throw ConfigError(path + ": unknown head '" + head + "'");
    }
    m.input_dim = j.at("input_dim").get<int>();
    m.vocab_size = j.at("vocab_size").get<int>();
    m.max_labels = j.at("max_labels").get<int>();
    m.net = net_from_json(j.at("layers"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const int expected_out =
      m.head == HeadKind::kCount ? m.max_labels : m.vocab_size;
  if (m.net.input_dim() != m.input_dim ||
      m.net.output_dim() != expected_out)
    throw ConfigError(path + ": layer shapes do not match header");
  return m;
}

}  // namespace mlrank
