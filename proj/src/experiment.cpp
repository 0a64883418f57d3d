#include "mlrank/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlrank/checkpoint.hpp"
#include "mlrank/errors.hpp"

namespace mlrank {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

using Clock = std::chrono::steady_clock;
using Timings = std::vector<std::pair<std::string, double>>;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// --- config parsing -------------------------------------------------------

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

const json& need(const json& j, const char* field, const std::string& ctx) {
  if (!j.is_object() || !j.contains(field))
    fail("missing config field '" + ctx + field + "'");
  return j.at(field);
}

double get_num(const json& j, const char* field, const std::string& ctx,
               double fallback) {
  if (!j.is_object() || !j.contains(field)) return fallback;
  const auto& v = j.at(field);
  if (!v.is_number()) fail("config field '" + ctx + field + "' must be a number");
  return v.get<double>();
}

int get_int(const json& j, const char* field, const std::string& ctx,
            int fallback) {
  if (!j.is_object() || !j.contains(field)) return fallback;
  const auto& v = j.at(field);
  if (!v.is_number_integer())
    fail("config field '" + ctx + field + "' must be an integer");
  return v.get<int>();
}

std::string get_str(const json& j, const char* field, const std::string& ctx,
                    const std::string& fallback) {
  if (!j.is_object() || !j.contains(field)) return fallback;
  const auto& v = j.at(field);
  if (!v.is_string())
    fail("config field '" + ctx + field + "' must be a string");
  return v.get<std::string>();
}

LabelDistribution parse_distribution(const json& j, const std::string& ctx) {
  const auto kind = need(j, "kind", ctx).get<std::string>();
  if (kind == "independent") {
    const auto& pj = need(j, "p", ctx);
    if (!pj.is_array() || pj.size() < 2)
      fail("config field '" + ctx + "p' must be an array of >= 2 marginals");
    std::vector<double> p;
    for (const auto& v : pj) {
      if (!v.is_number()) fail("config field '" + ctx + "p' must be numeric");
      p.push_back(v.get<double>());
    }
    try {
      return LabelDistribution::independent(std::move(p));
    } catch (const std::invalid_argument& e) {
      fail(ctx + "p: " + e.what());
    }
  }
  if (kind == "joint") {
    const int k = get_int(j, "vocab_size", ctx, 0);
    const auto& pj = need(j, "probs", ctx);
    if (!pj.is_array())
      fail("config field '" + ctx + "probs' must be an array");
    std::vector<double> probs;
    for (const auto& v : pj) {
      if (!v.is_number())
        fail("config field '" + ctx + "probs' must be numeric");
      probs.push_back(v.get<double>());
    }
    try {
      return LabelDistribution::joint(k, std::move(probs));
    } catch (const std::invalid_argument& e) {
      fail(ctx + "probs: " + e.what());
    }
  }
  fail("config field '" + ctx + "kind' must be 'independent' or 'joint'");
}

DataSpec parse_data_spec(const json& j) {
  DataSpec spec;
  if (j.contains("path")) {
    spec.synthetic = false;
    spec.path = need(j, "path", "dataset.").get<std::string>();
    std::string format = get_str(j, "format", "dataset.", "");
    if (format.empty())
      format = spec.path.size() >= 6 &&
                       spec.path.substr(spec.path.size() - 6) == ".jsonl"
                   ? "jsonl"
                   : "csv";
    if (format == "csv") {
      spec.format = FileFormat::kCsv;
    } else if (format == "jsonl") {
      spec.format = FileFormat::kJsonl;
    } else {
      fail("config field 'dataset.format' must be 'csv' or 'jsonl'");
    }
    return spec;
  }
  if (!j.contains("synthetic"))
    fail("config field 'dataset' needs either 'path' or 'synthetic'");
  const auto& s = j.at("synthetic");
  const std::string ctx = "dataset.synthetic.";
  spec.synthetic = true;
  spec.synth.dist = parse_distribution(need(s, "distribution", ctx),
                                       ctx + "distribution.");
  spec.synth.n_samples = get_int(s, "n_samples", ctx, 0);
  if (spec.synth.n_samples < 1)
    fail("config field '" + ctx + "n_samples' must be >= 1");
  const auto mode = get_str(s, "feature_mode", ctx, "cluster");
  if (mode == "cluster") {
    spec.synth.mode = FeatureMode::kCluster;
  } else if (mode == "linear") {
    spec.synth.mode = FeatureMode::kLinearLogits;
  } else {
    fail("config field '" + ctx + "feature_mode' must be 'cluster' or 'linear'");
  }
  spec.synth.noise_sigma = get_num(s, "noise_sigma", ctx, 0.0);
  if (spec.synth.noise_sigma < 0)
    fail("config field '" + ctx + "noise_sigma' must be >= 0");
  spec.synth.label_noise = get_num(s, "label_noise", ctx, 0.0);
  if (spec.synth.label_noise < 0 || spec.synth.label_noise > 1)
    fail("config field '" + ctx + "label_noise' must be in [0, 1]");
  return spec;
}

RuleSpec parse_rule(const json& j) {
  if (j.is_string()) {
    const auto name = j.get<std::string>();
    if (name == "top_k_cv" || name == "top_k")
      return {RuleSpec::Kind::kTopKCv};
    if (name == "global_threshold_cv" || name == "global_threshold")
      return {RuleSpec::Kind::kGlobalThresholdCv};
    if (name == "learned_count") return {RuleSpec::Kind::kLearnedCount};
    if (name == "learned_threshold")
      return {RuleSpec::Kind::kLearnedThreshold};
    fail("config field 'decision.rules': unknown rule '" + name + "'");
  }
  if (j.is_object()) {
    const auto kind = need(j, "kind", "decision.rules[].").get<std::string>();
    if (kind == "top_k") {
      RuleSpec r{RuleSpec::Kind::kFixedTopK};
      r.k = get_int(j, "k", "decision.rules[].", 0);
      if (r.k < 1) fail("config field 'decision.rules[].k' must be >= 1");
      return r;
    }
    if (kind == "global_threshold") {
      RuleSpec r{RuleSpec::Kind::kFixedGlobalThreshold};
      if (!j.contains("threshold"))
        fail("missing config field 'decision.rules[].threshold'");
      r.threshold = j.at("threshold").get<double>();
      return r;
    }
    fail("config field 'decision.rules[].kind': unknown rule '" + kind + "'");
  }
  fail("config field 'decision.rules' entries must be strings or objects");
}

// --- rule construction and evaluation -------------------------------------

struct RuleRow {
  std::string name;
  json selected;  // CV/fixed hyperparameters, null for learned heads
  MetricsReport metrics;
};

struct EvalInputs {
  std::vector<Eigen::VectorXd> scores;
  std::vector<Eigen::VectorXd> penultimates;
  std::vector<LabelSet> labels;
  int vocab_size = 0;
};

EvalInputs compute_eval_inputs(const PredictorModel& model, const Dataset& ds) {
  EvalInputs in;
  in.vocab_size = ds.vocab_size;
  in.scores.reserve(ds.samples.size());
  in.penultimates.reserve(ds.samples.size());
  in.labels.reserve(ds.samples.size());
  for (const auto& s : ds.samples) {
    Forward fw = forward(model, s.features);
    in.scores.push_back(std::move(fw.scores));
    in.penultimates.push_back(std::move(fw.penultimate));
    in.labels.push_back(s.labels);
  }
  return in;
}

RuleRow evaluate_rule(const std::string& name, const DecisionRule& rule,
                      const json& selected, const EvalInputs& in) {
  std::vector<EvalPair> pairs;
  pairs.reserve(in.scores.size());
  for (std::size_t i = 0; i < in.scores.size(); ++i)
    pairs.push_back(
        {decide(rule, in.scores[i], in.penultimates[i]), in.labels[i]});
  return {name, selected, evaluate(pairs, in.vocab_size)};
}

std::vector<RuleRow> evaluate_rules(const std::vector<RuleSpec>& specs,
                                    const EvalInputs& in,
                                    const DecisionModel* count_head,
                                    const DecisionModel* threshold_head) {
  std::vector<RuleRow> rows;
  for (const auto& spec : specs) {
    switch (spec.kind) {
      case RuleSpec::Kind::kTopKCv: {
        const DecisionRule rule = cross_validate_rule(
            CvRuleKind::kTopK, in.scores, in.labels, in.vocab_size);
        rows.push_back(evaluate_rule(spec.name(), rule,
                                     json{{"k", std::get<TopK>(rule).k}}, in));
        break;
      }
      case RuleSpec::Kind::kGlobalThresholdCv: {
        const DecisionRule rule = cross_validate_rule(
            CvRuleKind::kGlobalThreshold, in.scores, in.labels, in.vocab_size);
        rows.push_back(evaluate_rule(
            spec.name(), rule,
            json{{"threshold", std::get<GlobalThreshold>(rule).threshold}},
            in));
        break;
      }
      case RuleSpec::Kind::kLearnedCount:
        if (!count_head)
          fail("rule 'learned_count' requires a trained count head");
        rows.push_back(evaluate_rule(spec.name(), LearnedCount{*count_head},
                                     json(), in));
        break;
      case RuleSpec::Kind::kLearnedThreshold:
        if (!threshold_head)
          fail("rule 'learned_threshold' requires a trained threshold head");
        rows.push_back(evaluate_rule(
            spec.name(), LearnedThreshold{*threshold_head}, json(), in));
        break;
      case RuleSpec::Kind::kFixedTopK:
        rows.push_back(evaluate_rule(spec.name(), TopK{spec.k},
                                     json{{"k", spec.k}}, in));
        break;
      case RuleSpec::Kind::kFixedGlobalThreshold:
        rows.push_back(evaluate_rule(spec.name(),
                                     GlobalThreshold{spec.threshold},
                                     json{{"threshold", spec.threshold}}, in));
        break;
    }
  }
  return rows;
}

bool wants_rule(const std::vector<RuleSpec>& specs, RuleSpec::Kind kind) {
  for (const auto& s : specs)
    if (s.kind == kind) return true;
  return false;
}

json rules_to_json(const std::vector<RuleRow>& rows) {
  json out = json::object();
  for (const auto& row : rows) {
    json entry;
    entry["selected"] = row.selected;
    entry["metrics"] = to_json(row.metrics);
    out[row.name] = std::move(entry);
  }
  return out;
}

json train_log_to_json(const TrainLog& log) {
  json out = json::array();
  for (const auto& e : log.epochs)
    out.push_back({{"epoch", e.epoch},
                   {"mean_loss", e.mean_loss},
                   {"samples_seen", e.samples_seen}});
  return out;
}

// --- text report -----------------------------------------------------------

std::string table_header(bool with_loss_column) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s%-20s %7s %7s %7s %7s %7s %7s",
                with_loss_column ? "loss      " : "", "rule", "PC-P", "PC-R",
                "OV-P", "OV-R", "F1", "0-1");
  return buf;
}

std::string table_row(const std::string& loss, const RuleRow& row,
                      bool with_loss_column) {
  char buf[200];
  if (with_loss_column) {
    std::snprintf(buf, sizeof(buf),
                  "%-10s%-20s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f",
                  loss.c_str(), row.name.c_str(), row.metrics.pc_precision,
                  row.metrics.pc_recall, row.metrics.ov_precision,
                  row.metrics.ov_recall, row.metrics.macro_f1,
                  row.metrics.exact_match);
  } else {
    std::snprintf(buf, sizeof(buf), "%-20s %7.4f %7.4f %7.4f %7.4f %7.4f %7.4f",
                  row.name.c_str(), row.metrics.pc_precision,
                  row.metrics.pc_recall, row.metrics.ov_precision,
                  row.metrics.ov_recall, row.metrics.macro_f1,
                  row.metrics.exact_match);
  }
  return buf;
}

void append_timings(std::ostringstream& out, const Timings& timings) {
  out << "\ntimings (s):\n";
  for (const auto& [name, secs] : timings) {
    char buf[120];
    std::snprintf(buf, sizeof(buf), "  %-28s %9.3f", name.c_str(), secs);
    out << buf << "\n";
  }
}

void write_text_file(const std::string& text, const fs::path& path) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail("cannot open " + path.string() + " for writing");
  out << text;
}

void write_outputs(const ExperimentResult& result, const std::string& out_dir) {
  write_json_file(result.metrics, (fs::path(out_dir) / "metrics.json").string());
  write_text_file(result.report_text, fs::path(out_dir) / "report.txt");
}

// --- pipeline core ---------------------------------------------------------

struct PipelineOutcome {
  json rules_json;
  json train_logs;
  std::vector<RuleRow> rows;
  std::vector<Eigen::VectorXd> holdout_scores;
};

TrainConfig head_config(const DecisionSpec& d, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = d.epochs;
  tc.batch_size = d.batch_size;
  tc.learning_rate = d.learning_rate;
  tc.momentum = d.momentum;
  tc.weight_decay = d.weight_decay;
  tc.seed = seed;
  return tc;
}

PipelineOutcome run_pipeline(const ExperimentConfig& cfg, LossKind loss,
                             const Dataset& train_ds, const Dataset& holdout,
                             const std::string& ckpt_suffix,
                             const std::string& out_dir, Timings& timings) {
  const std::string tag =
      ckpt_suffix.empty() ? std::string() : "_" + ckpt_suffix;

  TrainConfig tc = cfg.train;
  tc.loss = loss;
  tc.seed = sub_seed(cfg.seed, SeedStream::kPredictor);

  auto t0 = Clock::now();
  auto [model, predictor_log] = train(train_ds, cfg.arch, cfg.hidden_size, tc);
  timings.emplace_back("train_predictor" + tag, seconds_since(t0));
  save_predictor(model,
                 (fs::path(out_dir) / ("checkpoint_predictor" + tag + ".json"))
                     .string());

  PipelineOutcome out;
  out.train_logs["predictor"] = train_log_to_json(predictor_log);

  std::optional<DecisionModel> count_head;
  std::optional<DecisionModel> threshold_head;
  if (wants_rule(cfg.decision.rules, RuleSpec::Kind::kLearnedCount)) {
    t0 = Clock::now();
    auto [head, log] = train_count_head(
        train_ds, model,
        head_config(cfg.decision, sub_seed(cfg.seed, SeedStream::kCountHead)),
        cfg.decision.max_labels, cfg.decision.hidden1, cfg.decision.hidden2);
    timings.emplace_back("train_count_head" + tag, seconds_since(t0));
    out.train_logs["count_head"] = train_log_to_json(log);
    save_decision(head, (fs::path(out_dir) / ("checkpoint_count" + tag + ".json"))
                            .string());
    count_head = std::move(head);
  }
  if (wants_rule(cfg.decision.rules, RuleSpec::Kind::kLearnedThreshold)) {
    t0 = Clock::now();
    auto [head, log] = train_threshold_head(
        train_ds, model,
        head_config(cfg.decision,
                    sub_seed(cfg.seed, SeedStream::kThresholdHead)),
        cfg.decision.hidden1, cfg.decision.hidden2);
    timings.emplace_back("train_threshold_head" + tag, seconds_since(t0));
    out.train_logs["threshold_head"] = train_log_to_json(log);
    save_decision(head,
                  (fs::path(out_dir) / ("checkpoint_threshold" + tag + ".json"))
                      .string());
    threshold_head = std::move(head);
  }

  t0 = Clock::now();
  const EvalInputs in = compute_eval_inputs(model, holdout);
  out.rows = evaluate_rules(cfg.decision.rules, in,
                            count_head ? &*count_head : nullptr,
                            threshold_head ? &*threshold_head : nullptr);
  timings.emplace_back("evaluate" + tag, seconds_since(t0));
  out.rules_json = rules_to_json(out.rows);
  out.holdout_scores = in.scores;
  return out;
}

}  // namespace

std::uint64_t sub_seed(std::uint64_t root, SeedStream stream) {
  return Rng(root).spawn(static_cast<std::uint64_t>(stream)).seed();
}

std::string RuleSpec::name() const {
  switch (kind) {
    case Kind::kTopKCv: return "top_k";
    case Kind::kGlobalThresholdCv: return "global_threshold";
    case Kind::kLearnedCount: return "learned_count";
    case Kind::kLearnedThreshold: return "learned_threshold";
    case Kind::kFixedTopK: return "top_k_" + std::to_string(k);
    case Kind::kFixedGlobalThreshold: {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "global_threshold_%g", threshold);
      return buf;
    }
  }
  return "unknown";
}

ExperimentConfig parse_experiment_config(const json& j) {
  if (!j.is_object()) fail("config root must be a JSON object");
  ExperimentConfig cfg;

  const auto& seed = need(j, "seed", "");
  if (!seed.is_number_integer() || seed.get<std::int64_t>() < 0)
    fail("config field 'seed' must be a non-negative integer");
  cfg.seed = seed.get<std::uint64_t>();
  cfg.output_dir = get_str(j, "output_dir", "", "out");

  cfg.data = parse_data_spec(need(j, "dataset", ""));

  cfg.holdout_fraction = get_num(j, "holdout_fraction", "", 0.2);
  if (!(cfg.holdout_fraction > 0 && cfg.holdout_fraction < 1))
    fail("config field 'holdout_fraction' must be in (0, 1)");

  const json predictor =
      j.contains("predictor") ? j.at("predictor") : json::object();
  const std::string pctx = "predictor.";
  try {
    cfg.arch = parse_arch(get_str(predictor, "architecture", pctx, "mlp"));
  } catch (const std::invalid_argument& e) {
    fail("config field 'predictor.architecture': " + std::string(e.what()));
  }
  cfg.hidden_size = get_int(predictor, "hidden_size", pctx, 32);
  try {
    cfg.train.loss =
        parse_loss_kind(get_str(predictor, "loss", pctx, "lsep"));
  } catch (const std::invalid_argument& e) {
    fail("config field 'predictor.loss': " + std::string(e.what()));
  }
  cfg.train.epochs = get_int(predictor, "epochs", pctx, 10);
  cfg.train.batch_size = get_int(predictor, "batch_size", pctx, 32);
  cfg.train.learning_rate =
      get_num(predictor, "learning_rate", pctx, 1e-3);
  cfg.train.momentum = get_num(predictor, "momentum", pctx, 0.9);
  cfg.train.weight_decay = get_num(predictor, "weight_decay", pctx, 5e-5);
  cfg.train.loss_config.margin = get_num(predictor, "margin", pctx, 1.0);
  cfg.train.loss_config.sample_budget =
      get_int(predictor, "sample_budget", pctx, 1000);
  const auto scheme = get_str(predictor, "warp_weight", pctx, "harmonic");
  if (scheme == "harmonic") {
    cfg.train.loss_config.warp_weight = WeightScheme::kHarmonic;
  } else if (scheme == "uniform") {
    cfg.train.loss_config.warp_weight = WeightScheme::kUniform;
  } else {
    fail("config field 'predictor.warp_weight' must be 'harmonic' or 'uniform'");
  }

  const json decision =
      j.contains("decision") ? j.at("decision") : json::object();
  const std::string dctx = "decision.";
  if (decision.contains("rules")) {
    const auto& rules = decision.at("rules");
    if (!rules.is_array() || rules.empty())
      fail("config field 'decision.rules' must be a nonempty array");
    for (const auto& r : rules) cfg.decision.rules.push_back(parse_rule(r));
  } else {
    cfg.decision.rules = {{RuleSpec::Kind::kTopKCv},
                          {RuleSpec::Kind::kGlobalThresholdCv},
                          {RuleSpec::Kind::kLearnedCount},
                          {RuleSpec::Kind::kLearnedThreshold}};
  }
  cfg.decision.max_labels = get_int(decision, "max_labels", dctx, 4);
  if (cfg.decision.max_labels < 1)
    fail("config field 'decision.max_labels' must be >= 1");
  cfg.decision.epochs = get_int(decision, "epochs", dctx, 50);
  cfg.decision.batch_size = get_int(decision, "batch_size", dctx, 32);
  cfg.decision.learning_rate = get_num(decision, "learning_rate", dctx, 1e-3);
  cfg.decision.momentum = get_num(decision, "momentum", dctx, 0.9);
  cfg.decision.weight_decay = get_num(decision, "weight_decay", dctx, 5e-5);
  cfg.decision.hidden1 = get_int(decision, "hidden1", dctx, 100);
  cfg.decision.hidden2 = get_int(decision, "hidden2", dctx, 10);

  if (j.contains("losses")) {
    const auto& arr = j.at("losses");
    if (!arr.is_array() || arr.empty())
      fail("config field 'losses' must be a nonempty array");
    for (const auto& v : arr) {
      if (!v.is_string()) fail("config field 'losses' must hold strings");
      try {
        cfg.compare_losses.push_back(parse_loss_kind(v.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        fail("config field 'losses': " + std::string(e.what()));
      }
    }
  } else {
    cfg.compare_losses = {LossKind::kLsep, LossKind::kHinge, LossKind::kWarp,
                          LossKind::kBpmll, LossKind::kSoftmax};
  }

  cfg.pr_points = get_int(j, "pr_points", "", 50);
  if (cfg.pr_points < 1) fail("config field 'pr_points' must be >= 1");

  cfg.echo = j;
  return cfg;
}

Dataset materialize_dataset(const DataSpec& spec, std::uint64_t root_seed) {
  if (!spec.synthetic) return load_dataset(spec.path, spec.format);
  Dataset ds = generate_synthetic(*spec.synth.dist, spec.synth.n_samples,
                                  spec.synth.mode, spec.synth.noise_sigma,
                                  sub_seed(root_seed, SeedStream::kDataGen));
  if (spec.synth.label_noise > 0)
    ds = apply_label_noise(ds, spec.synth.label_noise,
                           sub_seed(root_seed, SeedStream::kLabelNoise));
  return ds;
}

ExperimentResult run_train(const ExperimentConfig& cfg,
                           const std::string& out_dir) {
  Timings timings;
  auto t0 = Clock::now();
  const Dataset ds = materialize_dataset(cfg.data, cfg.seed);
  timings.emplace_back("materialize_data", seconds_since(t0));

  const auto [train_ds, holdout] =
      split(ds, cfg.holdout_fraction, sub_seed(cfg.seed, SeedStream::kSplit));

  PipelineOutcome pipe = run_pipeline(cfg, cfg.train.loss, train_ds, holdout,
                                      "", out_dir, timings);

  ExperimentResult result;
  result.metrics["config"] = cfg.echo;
  result.metrics["rules"] = pipe.rules_json;
  result.metrics["train_log"] = pipe.train_logs;

  std::ostringstream text;
  text << "train: loss=" << loss_kind_name(cfg.train.loss)
       << " arch=" << arch_name(cfg.arch) << " train_samples="
       << train_ds.size() << " holdout_samples=" << holdout.size() << "\n\n";
  text << table_header(false) << "\n";
  for (const auto& row : pipe.rows) text << table_row("", row, false) << "\n";
  append_timings(text, timings);
  result.report_text = text.str();

  write_outputs(result, out_dir);
  return result;
}

ExperimentResult run_compare_losses(const ExperimentConfig& cfg,
                                    const std::string& out_dir) {
  Timings timings;
  auto t0 = Clock::now();
  const Dataset ds = materialize_dataset(cfg.data, cfg.seed);
  timings.emplace_back("materialize_data", seconds_since(t0));

  const auto [train_ds, holdout] =
      split(ds, cfg.holdout_fraction, sub_seed(cfg.seed, SeedStream::kSplit));

  ExperimentResult result;
  result.metrics["config"] = cfg.echo;
  json losses_json = json::object();

  std::ostringstream text;
  text << "compare-losses: arch=" << arch_name(cfg.arch) << " train_samples="
       << train_ds.size() << " holdout_samples=" << holdout.size() << "\n\n";
  text << table_header(true) << "\n";

  for (LossKind loss : cfg.compare_losses) {
    const std::string name = loss_kind_name(loss);
    PipelineOutcome pipe =
        run_pipeline(cfg, loss, train_ds, holdout, name, out_dir, timings);
    json entry;
    entry["rules"] = pipe.rules_json;
    entry["train_log"] = pipe.train_logs;
    losses_json[name] = std::move(entry);

    const auto curve = pr_curve(pipe.holdout_scores, [&] {
      std::vector<LabelSet> labels;
      labels.reserve(holdout.samples.size());
      for (const auto& s : holdout.samples) labels.push_back(s.labels);
      return labels;
    }(), cfg.pr_points);
    write_pr_csv(curve,
                 (fs::path(out_dir) / ("pr_curve_" + name + ".csv")).string());

    for (const auto& row : pipe.rows) text << table_row(name, row, true) << "\n";
  }
  result.metrics["losses"] = std::move(losses_json);
  append_timings(text, timings);
  result.report_text = text.str();

  write_outputs(result, out_dir);
  return result;
}

ExperimentResult run_evaluate(const ExperimentConfig& cfg,
                              const std::string& predictor_path,
                              const std::optional<std::string>& count_path,
                              const std::optional<std::string>& threshold_path,
                              const std::string& out_dir) {
  Timings timings;
  auto t0 = Clock::now();
  const Dataset ds = materialize_dataset(cfg.data, cfg.seed);
  const PredictorModel model = load_predictor(predictor_path);

  std::optional<DecisionModel> count_head;
  if (count_path) count_head = load_decision(*count_path);
  std::optional<DecisionModel> threshold_head;
  if (threshold_path) threshold_head = load_decision(*threshold_path);
  timings.emplace_back("load", seconds_since(t0));

  t0 = Clock::now();
  const EvalInputs in = compute_eval_inputs(model, ds);
  const auto rows = evaluate_rules(cfg.decision.rules, in,
                                   count_head ? &*count_head : nullptr,
                                   threshold_head ? &*threshold_head : nullptr);
  timings.emplace_back("evaluate", seconds_since(t0));

  ExperimentResult result;
  result.metrics["config"] = cfg.echo;
  result.metrics["rules"] = rules_to_json(rows);

  std::ostringstream text;
  text << "evaluate: model=" << predictor_path << " samples=" << ds.size()
       << "\n\n";
  text << table_header(false) << "\n";
  for (const auto& row : rows) text << table_row("", row, false) << "\n";
  append_timings(text, timings);
  result.report_text = text.str();

  write_outputs(result, out_dir);
  return result;
}

}  // namespace mlrank
