#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "mlrank/checkpoint.hpp"
#include "mlrank/consistency.hpp"
#include "mlrank/errors.hpp"
#include "mlrank/experiment.hpp"
#include "mlrank/gradcheck.hpp"

namespace {

using nlohmann::json;

constexpr double kGradTol = 1e-4;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitVerifyFail = 3;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::int64_t> seed;
  std::string format = "text";
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool out_is_dir = true) {
  cmd->add_option("--config", flags.config_path, "experiment config (JSON)")
      ->required();
  cmd->add_option("--out", flags.out_dir,
                  out_is_dir ? "output directory (overrides config)"
                             : "output path");
  cmd->add_option("--seed", flags.seed, "seed (overrides config)");
  cmd->add_option("--format", flags.format, "stdout format")
      ->check(CLI::IsMember({"text", "json"}));
}

mlrank::ExperimentConfig load_config(const CommonFlags& flags) {
  json j = mlrank::read_json_file(flags.config_path);
  if (!j.is_object()) throw mlrank::ConfigError("config root must be an object");
  if (flags.seed) {
    if (*flags.seed < 0)
      throw mlrank::ConfigError("--seed must be non-negative");
    j["seed"] = *flags.seed;
  }
  if (!flags.out_dir.empty()) j["output_dir"] = flags.out_dir;
  return mlrank::parse_experiment_config(j);
}

void emit(const mlrank::ExperimentResult& result, const std::string& format) {
  if (format == "json") {
    std::cout << result.metrics.dump(2) << "\n";
  } else {
    std::cout << result.report_text;
  }
}

int cmd_gradcheck(std::uint64_t seed, int trials, const std::string& format) {
  if (trials < 1) throw mlrank::ConfigError("--trials must be >= 1");
  const mlrank::GradCheckReport report = mlrank::run_gradcheck(seed, trials);
  const bool pass = report.pass(kGradTol);
  if (format == "json") {
    json out;
    out["entries"] = json::array();
    for (const auto& e : report.entries)
      out["entries"].push_back({{"name", e.name},
                                {"max_rel_err", e.max_rel_err},
                                {"trials", e.trials}});
    out["worst"] = report.worst();
    out["tolerance"] = kGradTol;
    out["pass"] = pass;
    std::cout << out.dump(2) << "\n";
  } else {
    std::printf("%-18s %12s %7s\n", "check", "max_rel_err", "trials");
    for (const auto& e : report.entries)
      std::printf("%-18s %12.3e %7d\n", e.name.c_str(), e.max_rel_err,
                  e.trials);
    std::printf("worst %.3e vs tolerance %.0e: %s\n", report.worst(), kGradTol,
                pass ? "PASS" : "FAIL");
  }
  return pass ? kExitOk : kExitVerifyFail;
}

mlrank::LabelDistribution parse_dist_file(const std::string& path) {
  json j = mlrank::read_json_file(path);
  const json& d = j.is_object() && j.contains("distribution")
                      ? j.at("distribution")
                      : j;
  if (!d.is_object() || !d.contains("kind"))
    throw mlrank::ConfigError(
        "distribution spec needs a 'kind' of 'independent' or 'joint'");
  const auto kind = d.at("kind").get<std::string>();
  try {
    if (kind == "independent") {
      if (!d.contains("p"))
        throw mlrank::ConfigError("independent distribution needs 'p'");
      return mlrank::LabelDistribution::independent(
          d.at("p").get<std::vector<double>>());
    }
    if (kind == "joint") {
      if (!d.contains("vocab_size") || !d.contains("probs"))
        throw mlrank::ConfigError(
            "joint distribution needs 'vocab_size' and 'probs'");
      return mlrank::LabelDistribution::joint(
          d.at("vocab_size").get<int>(),
          d.at("probs").get<std::vector<double>>());
    }
  } catch (const std::invalid_argument& e) {
    throw mlrank::ConfigError(e.what());
  }
  throw mlrank::ConfigError("distribution kind must be 'independent' or 'joint'");
}

int cmd_bayes_check(const std::string& config_path, double tol,
                    const std::string& format) {
  const mlrank::LabelDistribution dist = parse_dist_file(config_path);
  const mlrank::RankConsistencyReport report =
      mlrank::verify_rank_consistency(dist, tol);

  if (format == "json") {
    json out;
    out["converged"] = report.converged;
    out["max_residual"] = report.max_residual;
    out["all_orders_agree"] = report.all_orders_agree;
    out["tolerance"] = tol;
    out["pass"] = report.pass;
    out["f_star"] = std::vector<double>(
        report.f_star.data(), report.f_star.data() + report.f_star.size());
    out["marginals"] = report.marginal;
    if (report.log_marginal_residual)
      out["log_marginal_residual"] = *report.log_marginal_residual;
    out["pairs"] = json::array();
    for (const auto& p : report.pairs) {
      json row = {{"u", p.u}, {"v", p.v}, {"order_agrees", p.order_agrees}};
      if (p.skipped) {
        row["skipped"] = true;
      } else {
        row["log_odds"] = p.log_odds;
        row["residual"] = p.residual;
      }
      out["pairs"].push_back(std::move(row));
    }
    std::cout << out.dump(2) << "\n";
  } else {
    std::printf("%3s %3s %12s %12s %12s %6s\n", "u", "v", "log_odds", "f_gap",
                "residual", "order");
    for (const auto& p : report.pairs) {
      if (p.skipped) {
        std::printf("%3d %3d %12s %12.6f %12s %6s\n", p.u, p.v, "-",
                    report.f_star[p.u] - report.f_star[p.v], "-",
                    p.order_agrees ? "ok" : "BAD");
      } else {
        std::printf("%3d %3d %12.6f %12.6f %12.3e %6s\n", p.u, p.v, p.log_odds,
                    report.f_star[p.u] - report.f_star[p.v], p.residual,
                    p.order_agrees ? "ok" : "BAD");
      }
    }
    for (const auto& [u, v] : report.excluded)
      std::printf("pair (%d, %d) excluded: zero pair probability\n", u, v);
    if (report.log_marginal_residual)
      std::printf("log-marginal residual (informational): %.6f\n",
                  *report.log_marginal_residual);
    std::printf("%s (max residual %.3e vs tolerance %.0e, converged=%s)\n",
                report.pass ? "PASS" : "FAIL", report.max_residual, tol,
                report.converged ? "yes" : "no");
  }
  return report.pass ? kExitOk : kExitVerifyFail;
}

int cmd_gen_data(const CommonFlags& flags, const std::string& out_path,
                 const std::string& file_format) {
  const mlrank::ExperimentConfig cfg = load_config(flags);
  const mlrank::Dataset ds = mlrank::materialize_dataset(cfg.data, cfg.seed);
  mlrank::FileFormat fmt;
  if (file_format == "csv") {
    fmt = mlrank::FileFormat::kCsv;
  } else if (file_format == "jsonl") {
    fmt = mlrank::FileFormat::kJsonl;
  } else {
    fmt = out_path.size() >= 6 &&
                  out_path.substr(out_path.size() - 6) == ".jsonl"
              ? mlrank::FileFormat::kJsonl
              : mlrank::FileFormat::kCsv;
  }
  mlrank::write_dataset(ds, out_path, fmt);
  if (flags.format == "json") {
    json out = {{"path", out_path},
                {"samples", ds.size()},
                {"vocab_size", ds.vocab_size},
                {"feature_dim", ds.feature_dim}};
    std::cout << out.dump(2) << "\n";
  } else {
    std::printf("wrote %zu samples (vocab %d, dim %d) to %s\n", ds.size(),
                ds.vocab_size, ds.feature_dim, out_path.c_str());
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairwise ranking losses and label-decision experiments"};
  app.require_subcommand(1);

  CommonFlags flags;

  auto* train = app.add_subcommand("train", "train predictor + decision heads");
  add_common(train, flags);

  auto* eval =
      app.add_subcommand("evaluate", "evaluate saved models on a dataset");
  add_common(eval, flags);
  std::string model_path;
  std::string count_path;
  std::string threshold_path;
  eval->add_option("--model", model_path, "predictor checkpoint")->required();
  eval->add_option("--count-head", count_path, "count-head checkpoint");
  eval->add_option("--threshold-head", threshold_path,
                   "threshold-head checkpoint");

  auto* compare = app.add_subcommand(
      "compare-losses", "train one predictor per loss and compare");
  add_common(compare, flags);

  auto* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient checks");
  std::int64_t gc_seed = 0;
  int gc_trials = 100;
  gradcheck->add_option("--seed", gc_seed, "seed")
      ->check(CLI::NonNegativeNumber);
  gradcheck->add_option("--trials", gc_trials, "trials per check");
  gradcheck->add_option("--format", flags.format, "stdout format")
      ->check(CLI::IsMember({"text", "json"}));

  auto* bayes = app.add_subcommand(
      "bayes-check",
      "check rank consistency of the minimized pairwise risk");
  std::string bayes_config;
  double bayes_tol = 1e-3;
  bayes->add_option("--config", bayes_config, "distribution spec (JSON)")
      ->required();
  bayes->add_option("--tol", bayes_tol, "residual tolerance")
      ->check(CLI::PositiveNumber);
  bayes->add_option("--format", flags.format, "stdout format")
      ->check(CLI::IsMember({"text", "json"}));

  auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset file");
  add_common(gen, flags, /*out_is_dir=*/false);
  std::string gen_format = "auto";
  gen->get_option("--out")->required();
  gen->add_option("--file-format", gen_format, "csv or jsonl (default: by extension)")
      ->check(CLI::IsMember({"auto", "csv", "jsonl"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      const auto cfg = load_config(flags);
      emit(mlrank::run_train(cfg, cfg.output_dir), flags.format);
      return kExitOk;
    }
    if (*eval) {
      const auto cfg = load_config(flags);
      std::optional<std::string> count;
      if (!count_path.empty()) count = count_path;
      std::optional<std::string> threshold;
      if (!threshold_path.empty()) threshold = threshold_path;
      emit(mlrank::run_evaluate(cfg, model_path, count, threshold,
                                cfg.output_dir),
           flags.format);
      return kExitOk;
    }
    if (*compare) {
      const auto cfg = load_config(flags);
      emit(mlrank::run_compare_losses(cfg, cfg.output_dir), flags.format);
      return kExitOk;
    }
    if (*gradcheck)
      return cmd_gradcheck(static_cast<std::uint64_t>(gc_seed), gc_trials,
                           flags.format);
    if (*bayes)
      return cmd_bayes_check(bayes_config, bayes_tol, flags.format);
    if (*gen) return cmd_gen_data(flags, flags.out_dir, gen_format);
  } catch (const mlrank::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const mlrank::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
