#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mlrank/data.hpp"
#include "mlrank/net.hpp"
#include "mlrank/predictor.hpp"

namespace mlrank {

enum class HeadKind { kCount, kThreshold };

const char* head_kind_name(HeadKind head);

/// Decision MLP g(.) on the predictor's penultimate features: two ReLU
/// hidden layers (100 and 10 units by default), then either max_labels
/// count logits (count head; counts are 1..max_labels, never 0) or
/// vocab_size per-class thresholds (threshold head).
struct DecisionModel {
  HeadKind head = HeadKind::kCount;
  int input_dim = 0;
  int vocab_size = 0;
  int max_labels = 4;
  FeedForward net;
};

DecisionModel init_decision(HeadKind head, int input_dim, int vocab_size,
                            int max_labels, Rng& rng, int hidden1 = 100,
                            int hidden2 = 10);

struct TopK {
  int k = 1;
};
struct GlobalThreshold {
  double threshold = 0;
};
struct LearnedCount {
  DecisionModel model;
};
struct LearnedThreshold {
  DecisionModel model;
};

using DecisionRule =
    std::variant<TopK, GlobalThreshold, LearnedCount, LearnedThreshold>;

const char* rule_name(const DecisionRule& rule);

/// Turns scores into a label set. All threshold comparisons are strict
/// (score > threshold), so threshold rules may return an empty set. top_k
/// returns exactly k labels, ties going to the lower index; k > vocab_size
/// is an error. learned_count takes the arg-max count (ties to the smaller
/// count, capped at vocab_size) and then the top-scoring labels.
LabelSet decide(const DecisionRule& rule, const Eigen::VectorXd& scores,
                const Eigen::VectorXd& penultimate);

/// Per-sample count-head loss: softmax cross-entropy of the count logits
/// against target min(label_count, max_labels). If `grads` is non-null the
/// parameter gradients are accumulated into it.
double count_head_loss(const DecisionModel& model,
                       const Eigen::VectorXd& penultimate, int label_count,
                       FeedForward* grads);

/// Per-sample threshold-head loss: binary cross-entropy of
/// sigmoid(score_k - theta_k) against label membership, summed over k,
/// evaluated in stable softplus form. Gradients flow only into the decision
/// net (scores are treated as constants).
double threshold_head_loss(const DecisionModel& model,
                           const Eigen::VectorXd& scores,
                           const Eigen::VectorXd& penultimate,
                           const LabelSet& labels, FeedForward* grads);

/// Trains a head on frozen predictor outputs (the predictor is const and
/// untouched; penultimate features are precomputed once). Reuses the same
/// SGD-with-momentum scheme and initialization as the predictor. Defaults
/// for decision heads: 50 epochs (set by the caller via cfg.epochs).
std::pair<DecisionModel, TrainLog> train_count_head(
    const Dataset& ds, const PredictorModel& predictor, const TrainConfig& cfg,
    int max_labels = 4, int hidden1 = 100, int hidden2 = 10);

std::pair<DecisionModel, TrainLog> train_threshold_head(
    const Dataset& ds, const PredictorModel& predictor, const TrainConfig& cfg,
    int hidden1 = 100, int hidden2 = 10);

enum class CvRuleKind { kTopK, kGlobalThreshold };

/// Grid search on a validation set, selecting by macro-F1:
///   - top_k over k in {1..min(10, vocab_size)}, ties to the smaller k;
///   - global_threshold over 50 equally spaced values spanning the observed
///     score range, ties to the larger threshold.
DecisionRule cross_validate_rule(CvRuleKind kind,
                                 const std::vector<Eigen::VectorXd>& scores,
                                 const std::vector<LabelSet>& labels,
                                 int vocab_size);

void save_decision(const DecisionModel& model, const std::string& path);
DecisionModel load_decision(const std::string& path);

}  // namespace mlrank
