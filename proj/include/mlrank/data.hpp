#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mlrank/labels.hpp"
#include "mlrank/rng.hpp"

namespace mlrank {

struct LabeledSample {
  Eigen::VectorXd features;
  LabelSet labels;
};

/// In-memory multi-label dataset. Every sample shares one feature
/// dimensionality and one label vocabulary {0, ..., vocab_size-1}.
struct Dataset {
  std::vector<LabeledSample> samples;
  int feature_dim = 0;
  int vocab_size = 0;

  std::size_t size() const { return samples.size(); }

  /// Enforces the structural invariants: vocab_size >= 2, feature_dim >= 1,
  /// uniform feature dimension, every label set nonempty and in range.
  /// Throws std::invalid_argument with the offending sample index.
  void validate() const;
};

/// Distribution over label sets, either a product of independent per-label
/// Bernoullis or an explicit joint table over all subsets. Joint mode is
/// limited to vocab_size <= 12 (the table has 2^K entries).
class LabelDistribution {
 public:
  static LabelDistribution independent(std::vector<double> p);

  /// `probs[mask]` is the probability of the label set encoded by `mask`
  /// (bit k set <=> label k present). Entries must be non-negative with a
  /// positive sum; they are normalized to sum to one.
  static LabelDistribution joint(int vocab_size, std::vector<double> probs);

  int vocab_size() const { return vocab_size_; }
  bool is_independent() const { return independent_; }

  const std::vector<double>& bernoulli_p() const;
  const std::vector<double>& joint_probs() const;

  /// P(label k present), per label.
  std::vector<double> marginals() const;

  /// Probability of the empty label set.
  double empty_mass() const;

  /// One draw; may be empty.
  LabelSet sample(Rng& rng) const;

  /// One draw conditioned on the set being nonempty (rejection). Throws
  /// NumericalError if the nonempty mass is (near-)zero.
  LabelSet sample_nonempty(Rng& rng) const;

 private:
  LabelDistribution() = default;

  bool independent_ = true;
  int vocab_size_ = 0;
  std::vector<double> p_;      // independent mode
  std::vector<double> probs_;  // joint mode, indexed by subset mask
};

enum class FeatureMode { kCluster, kLinearLogits };

/// Draws `n_samples` label sets from `dist` (conditioned nonempty) and
/// attaches features:
///   - kCluster: x = 4.0 * sum of one-hot centroids of the drawn labels,
///     plus N(0, noise_sigma^2) per coordinate; feature_dim == vocab_size.
///   - kLinearLogits: x ~ N(0, I); z = R x with a seeded random orthogonal
///     R; label k is included iff z_k exceeds the Gaussian quantile matching
///     its Bernoulli rate (noise_sigma == 0), or with probability
///     sigmoid((z_k - quantile_k) / noise_sigma) otherwise. Requires an
///     independent distribution, whose per-label rates the quantiles
///     reproduce exactly in the noiseless case.
Dataset generate_synthetic(const LabelDistribution& dist, int n_samples,
                           FeatureMode mode, double noise_sigma,
                           std::uint64_t seed);

/// Deterministic shuffled split; returns {train, holdout}. The holdout gets
/// round(n * holdout_fraction) samples. Both parts must come out nonempty.
std::pair<Dataset, Dataset> split(const Dataset& ds, double holdout_fraction,
                                  std::uint64_t seed);

/// For roughly `rate` of the samples (independent coin flips), toggles one
/// uniformly chosen label, while keeping every label set a nonempty proper
/// subset of the vocabulary.
Dataset apply_label_noise(const Dataset& ds, double rate, std::uint64_t seed);

enum class FileFormat { kCsv, kJsonl };

/// CSV: header `f1,...,fd,labels`; labels cell is 1-based indices joined by
/// '|'. JSONL: one `{"features": [...], "labels": [...]}` object per line,
/// labels 1-based. Both formats carry the vocabulary size in a sidecar file
/// `<path>.manifest.json`.
void write_dataset(const Dataset& ds, const std::string& path,
                   FileFormat format);

/// Throws ConfigError with a line number on malformed input, out-of-range or
/// duplicate labels, empty label sets, or a missing sidecar manifest.
Dataset load_dataset(const std::string& path, FileFormat format);

}  // namespace mlrank
