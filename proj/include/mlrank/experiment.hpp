#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "mlrank/data.hpp"
#include "mlrank/decision.hpp"
#include "mlrank/metrics.hpp"
#include "mlrank/predictor.hpp"

namespace mlrank {

/// Sub-seed derivation shared by every command: all randomness flows from
/// the single config seed through fixed stream ids, so any stage can be
/// re-run in isolation.
enum class SeedStream : std::uint64_t {
  kDataGen = 1,
  kSplit = 2,
  kPredictor = 3,
  kCountHead = 4,
  kThresholdHead = 5,
  kLabelNoise = 6,
};

std::uint64_t sub_seed(std::uint64_t root, SeedStream stream);

struct SyntheticSpec {
  std::optional<LabelDistribution> dist;
  int n_samples = 0;
  FeatureMode mode = FeatureMode::kCluster;
  double noise_sigma = 0.0;
  double label_noise = 0.0;  // applied after generation
};

struct DataSpec {
  bool synthetic = false;
  std::string path;  // file mode
  FileFormat format = FileFormat::kCsv;
  SyntheticSpec synth;
};

/// Which decision rules an experiment evaluates. CV rules are tuned on the
/// evaluation split's scores; learned rules need a trained head.
struct RuleSpec {
  enum class Kind {
    kTopKCv,
    kGlobalThresholdCv,
    kLearnedCount,
    kLearnedThreshold,
    kFixedTopK,
    kFixedGlobalThreshold,
  } kind;
  int k = 1;              // kFixedTopK
  double threshold = 0;   // kFixedGlobalThreshold
  std::string name() const;
};

struct DecisionSpec {
  std::vector<RuleSpec> rules;  // default: the four Table-style rules
  int max_labels = 4;
  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-5;
  int hidden1 = 100;
  int hidden2 = 10;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  DataSpec data;
  double holdout_fraction = 0.2;
  Arch arch = Arch::kMlp;
  int hidden_size = 32;
  TrainConfig train;  // predictor section; seed is derived, not taken here
  DecisionSpec decision;
  std::vector<LossKind> compare_losses;  // compare-losses command
  int pr_points = 50;
  nlohmann::json echo;  // effective config, embedded in reports
};

/// Parses and validates the JSON config; error messages name the offending
/// field (e.g. "predictor.loss"). Throws ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);

/// Generates or loads the dataset a DataSpec describes (label noise included).
Dataset materialize_dataset(const DataSpec& spec, std::uint64_t root_seed);

/// Outcome of a command: the deterministic metrics document (written as
/// metrics.json) plus a human-oriented text report that also carries
/// wall-clock timings (written as report.txt).
struct ExperimentResult {
  nlohmann::json metrics;
  std::string report_text;
};

/// Full pipeline: materialize data, split, train predictor, train requested
/// decision heads sequentially on the frozen predictor, tune CV rules on
/// the holdout, evaluate every rule on the holdout. Writes metrics.json,
/// report.txt, and checkpoint_*.json under out_dir.
ExperimentResult run_train(const ExperimentConfig& cfg,
                           const std::string& out_dir);

/// Same data/seed per loss kind: one predictor per loss, identical decision
/// protocol, plus a PR curve CSV per loss. Writes metrics.json, report.txt,
/// pr_curve_<loss>.csv, checkpoint_predictor_<loss>.json.
ExperimentResult run_compare_losses(const ExperimentConfig& cfg,
                                    const std::string& out_dir);

/// Evaluates saved checkpoints on the configured dataset (used whole, no
/// split). CV rules are tuned on that same evaluation set. Heads are only
/// required for the rules that use them.
ExperimentResult run_evaluate(const ExperimentConfig& cfg,
                              const std::string& predictor_path,
                              const std::optional<std::string>& count_path,
                              const std::optional<std::string>& threshold_path,
                              const std::string& out_dir);

}  // namespace mlrank
