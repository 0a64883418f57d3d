#pragma once

#include <Eigen/Core>
#include <json.hpp>
#include <string>
#include <vector>

#include "mlrank/labels.hpp"

namespace mlrank {

struct EvalPair {
  LabelSet predicted;  // may be empty
  LabelSet truth;      // never empty
};

struct ClassCounts {
  std::int64_t correct = 0;    // predicted and true
  std::int64_t predicted = 0;  // predicted
  std::int64_t truth = 0;      // true
};

/// Zero-denominator conventions (documented; applied per class):
///   - precision with no predictions: 1 if the class is also absent from the
///     truth, else 0;
///   - recall with no ground-truth occurrences: 1;
///   - F1 with precision == recall == 0: 0.
struct MetricsReport {
  double pc_precision = 0;  // mean of per-class precision
  double pc_recall = 0;     // mean of per-class recall
  double ov_precision = 0;  // pooled-count precision (0/0 -> 1)
  double ov_recall = 0;     // pooled-count recall (0/0 -> 1)
  double macro_f1 = 0;      // mean of per-class F1 (the headline F1)
  double f1_of_macro_pr = 0;  // harmonic mean of pc_precision and pc_recall
  double exact_match = 0;   // fraction with predicted == truth
  double hamming = 0;       // mean symmetric-difference size
  std::vector<double> per_class_f1;
  std::vector<ClassCounts> per_class_counts;
};

/// Computes the full report from per-sample (predicted, truth) pairs.
/// Throws std::invalid_argument on an empty list, an empty truth set, or a
/// label outside {0, ..., vocab_size-1}.
MetricsReport evaluate(const std::vector<EvalPair>& pairs, int vocab_size);

nlohmann::json to_json(const MetricsReport& report);

struct PrPoint {
  double threshold = 0;
  double precision = 0;
  double recall = 0;
};

/// Sweeps n_points equally spaced global thresholds from the minimum to the
/// maximum observed score; at each, predictions are {k : score_k > t} and
/// pooled precision/recall are recorded. Recall is nonincreasing in t.
std::vector<PrPoint> pr_curve(const std::vector<Eigen::VectorXd>& scores,
                              const std::vector<LabelSet>& truths,
                              int n_points);

/// CSV with header `threshold,precision,recall`.
void write_pr_csv(const std::vector<PrPoint>& curve, const std::string& path);

}  // namespace mlrank
