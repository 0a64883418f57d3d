#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "mlrank/labels.hpp"
#include "mlrank/rng.hpp"

namespace mlrank {

/// One (positive, negative) label pair: `positive` is a member of the
/// sample's label set, `negative` is not.
struct LabelPair {
  int positive;
  int negative;
};

struct PairSample {
  std::vector<LabelPair> pairs;
};

/// Rank-weighting scheme for the rank-weighted hinge loss. Harmonic is
/// w(r) = sum_{j=1..r} 1/j; Uniform is w(r) = 1, which reduces the loss to
/// the plain pairwise hinge over the full product.
enum class WeightScheme { kHarmonic, kUniform };

struct LossConfig {
  double margin = 1.0;       // hinge margin
  int sample_budget = 1000;  // max pairs drawn per sample
  WeightScheme warp_weight = WeightScheme::kHarmonic;
};

struct LossResult {
  double value = 0.0;
  Eigen::VectorXd grad;  // d(value)/d(scores)
  bool clamped = false;  // exponential loss only: an exponent hit the cap
};

/// Exponent cap for the un-damped exponential pairwise loss; exp(30) is
/// ~1e13, large enough to dominate yet far from double overflow.
inline constexpr double kExpCap = 30.0;

/// Pairs for one sample. When |Y| * (K - |Y|) <= budget the full Cartesian
/// product is returned in deterministic order (ascending positive index,
/// then ascending negative index); otherwise exactly `budget` distinct
/// pairs are drawn uniformly without replacement.
PairSample sample_pairs(const LabelSet& labels, int vocab_size, int budget,
                        Rng& rng);

/// Smoothed pairwise ranking loss log(1 + sum exp(f_v - f_u)), with
/// max-shifted evaluation so value and gradient stay finite for arbitrary
/// score magnitudes. Gradient weight per pair is exp(f_v - f_u) / (1 + S).
LossResult lsep(const Eigen::VectorXd& scores, const PairSample& pairs);

/// Pairwise hinge sum max(0, margin + f_v - f_u). Subgradient at the kink
/// is 0 (the pair is treated as non-violating).
LossResult hinge_rank(const Eigen::VectorXd& scores, const PairSample& pairs,
                      double margin);

/// Rank-weighted pairwise hinge over the full product. The rank of a
/// positive label is its exact position among all K scores (1 = highest;
/// ties rank the lower index higher).
LossResult warp(const Eigen::VectorXd& scores, const LabelSet& labels,
                double margin, WeightScheme scheme);

/// Un-damped exponential pairwise loss sum exp(f_v - f_u) over the full
/// product. Exponents above kExpCap are clamped (constant contribution,
/// zero gradient) and the result's `clamped` flag is set.
LossResult bpmll(const Eigen::VectorXd& scores, const LabelSet& labels);

/// Multi-label softmax: -sum_{y in Y} log softmax(f)_y, max-shifted.
LossResult softmax_ml(const Eigen::VectorXd& scores, const LabelSet& labels);

/// Diagnostic limit forms of the two pairwise families over the full
/// product: first = sum max(0, margin_i + f_v - f_u) with a caller-supplied
/// per-sample margin, second = sum (f_v - f_u). Analysis only; neither is a
/// training objective here.
std::pair<double, double> asymptotic_forms(const Eigen::VectorXd& scores,
                                           const LabelSet& labels,
                                           double margin_i);

enum class LossKind { kLsep, kHinge, kWarp, kBpmll, kSoftmax };

/// Stable names used in configs, CLI output, and file names.
const char* loss_kind_name(LossKind kind);
LossKind parse_loss_kind(const std::string& name);  // throws invalid_argument

/// Uniform entry point used by training and gradient checking: evaluates
/// the selected loss for one sample. The sampled-pair losses (lsep, hinge)
/// draw their pairs from `pair_rng` under cfg.sample_budget; the others
/// ignore it.
LossResult score_loss(const Eigen::VectorXd& scores, const LabelSet& labels,
                      LossKind kind, const LossConfig& cfg, Rng& pair_rng);

}  // namespace mlrank
