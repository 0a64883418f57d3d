#include "mlrank/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "mlrank/errors.hpp"

namespace mlrank {

namespace {

double f1_of(double p, double r) {
  return (p + r > 0) ? 2.0 * p * r / (p + r) : 0.0;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

MetricsReport evaluate(const std::vector<EvalPair>& pairs, int vocab_size) {
  if (pairs.empty())
    throw std::invalid_argument("evaluate needs at least one sample");
  if (vocab_size < 1) throw std::invalid_argument("vocab_size must be >= 1");

  MetricsReport rep;
  rep.per_class_counts.assign(static_cast<std::size_t>(vocab_size), {});

  std::int64_t exact = 0;
  std::int64_t sym_diff_total = 0;
  for (const auto& pr : pairs) {
    if (pr.truth.empty())
      throw std::invalid_argument("ground-truth label set is empty");
    pr.truth.check_range(vocab_size);
    pr.predicted.check_range(vocab_size);

    int inter = 0;
    for (int y : pr.predicted.members()) {
      auto& c = rep.per_class_counts[static_cast<std::size_t>(y)];
      c.predicted += 1;
      if (pr.truth.contains(y)) {
        c.correct += 1;
        ++inter;
      }
    }
    for (int y : pr.truth.members())
      rep.per_class_counts[static_cast<std::size_t>(y)].truth += 1;

    if (pr.predicted == pr.truth) ++exact;
    sym_diff_total +=
        (pr.predicted.size() - inter) + (pr.truth.size() - inter);
  }

  const auto n = static_cast<double>(pairs.size());
  rep.exact_match = static_cast<double>(exact) / n;
  rep.hamming = static_cast<double>(sym_diff_total) / n;

  std::int64_t sum_c = 0, sum_p = 0, sum_g = 0;
  rep.per_class_f1.assign(static_cast<std::size_t>(vocab_size), 0.0);
  double acc_p = 0, acc_r = 0, acc_f1 = 0;
  for (int y = 0; y < vocab_size; ++y) {
    const auto& c = rep.per_class_counts[static_cast<std::size_t>(y)];
    sum_c += c.correct;
    sum_p += c.predicted;
    sum_g += c.truth;
    const double prec =
        c.predicted > 0
            ? static_cast<double>(c.correct) / static_cast<double>(c.predicted)
            : (c.truth == 0 ? 1.0 : 0.0);
    const double rec =
        c.truth > 0
            ? static_cast<double>(c.correct) / static_cast<double>(c.truth)
            : 1.0;
    const double f1 = f1_of(prec, rec);
    rep.per_class_f1[static_cast<std::size_t>(y)] = f1;
    acc_p += prec;
    acc_r += rec;
    acc_f1 += f1;
  }
  rep.pc_precision = acc_p / vocab_size;
  rep.pc_recall = acc_r / vocab_size;
  rep.macro_f1 = acc_f1 / vocab_size;
  rep.f1_of_macro_pr = f1_of(rep.pc_precision, rep.pc_recall);
  rep.ov_precision =
      sum_p > 0 ? static_cast<double>(sum_c) / static_cast<double>(sum_p) : 1.0;
  rep.ov_recall =
      sum_g > 0 ? static_cast<double>(sum_c) / static_cast<double>(sum_g) : 1.0;
  return rep;
}

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json j;
  j["pc_precision"] = report.pc_precision;
  j["pc_recall"] = report.pc_recall;
  j["ov_precision"] = report.ov_precision;
  j["ov_recall"] = report.ov_recall;
  j["macro_f1"] = report.macro_f1;
  j["f1_of_macro_pr"] = report.f1_of_macro_pr;
  j["exact_match"] = report.exact_match;
  j["hamming"] = report.hamming;
  j["per_class_f1"] = report.per_class_f1;
  auto counts = nlohmann::json::array();
  for (const auto& c : report.per_class_counts)
    counts.push_back({{"correct", c.correct},
                      {"predicted", c.predicted},
                      {"truth", c.truth}});
  j["per_class_counts"] = counts;
  return j;
}

std::vector<PrPoint> pr_curve(const std::vector<Eigen::VectorXd>& scores,
                              const std::vector<LabelSet>& truths,
                              int n_points) {
  if (scores.empty() || scores.size() != truths.size())
    throw std::invalid_argument("pr_curve needs aligned, nonempty inputs");
  if (n_points < 1) throw std::invalid_argument("n_points must be >= 1");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : scores) {
    if (s.size() == 0) throw std::invalid_argument("empty score vector");
    lo = std::min(lo, s.minCoeff());
    hi = std::max(hi, s.maxCoeff());
  }

  std::vector<PrPoint> curve;
  curve.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double t =
        n_points == 1 ? lo : lo + (hi - lo) * i / (n_points - 1);
    std::int64_t correct = 0, predicted = 0, truth = 0;
    for (std::size_t s = 0; s < scores.size(); ++s) {
      truth += truths[s].size();
      for (Eigen::Index k = 0; k < scores[s].size(); ++k) {
        if (scores[s][k] > t) {
          ++predicted;
          if (truths[s].contains(static_cast<int>(k))) ++correct;
        }
      }
    }
    PrPoint pt;
    pt.threshold = t;
    pt.precision = predicted > 0 ? static_cast<double>(correct) /
                                       static_cast<double>(predicted)
                                 : 1.0;
    pt.recall = truth > 0
                    ? static_cast<double>(correct) / static_cast<double>(truth)
                    : 1.0;
    curve.push_back(pt);
  }
  return curve;
}

void write_pr_csv(const std::vector<PrPoint>& curve, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << "threshold,precision,recall\n";
  for (const auto& pt : curve)
    out << shortest(pt.threshold) << "," << shortest(pt.precision) << ","
        << shortest(pt.recall) << "\n";
}

}  // namespace mlrank
