#include "mlrank/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace mlrank {

namespace {

void check_pairs(const Eigen::VectorXd& scores, const PairSample& pairs) {
  const auto k = scores.size();
  for (const auto& p : pairs.pairs) {
    if (p.positive < 0 || p.positive >= k || p.negative < 0 ||
        p.negative >= k || p.positive == p.negative)
      throw std::invalid_argument(
          "invalid pair (" + std::to_string(p.positive) + ", " +
          std::to_string(p.negative) + ") for " + std::to_string(k) +
          " scores");
  }
}

void check_labels(const Eigen::VectorXd& scores, const LabelSet& labels) {
  labels.check_range(static_cast<int>(scores.size()));
}

// Exact rank of each score: 1 = highest; equal scores rank the lower index
// higher.
std::vector<int> ranks(const Eigen::VectorXd& scores) {
  const auto k = scores.size();
  std::vector<int> r(static_cast<std::size_t>(k));
  for (Eigen::Index u = 0; u < k; ++u) {
    int above = 0;
    for (Eigen::Index j = 0; j < k; ++j)
      if (scores[j] > scores[u] || (scores[j] == scores[u] && j < u)) ++above;
    r[static_cast<std::size_t>(u)] = above + 1;
  }
  return r;
}

}  // namespace

PairSample sample_pairs(const LabelSet& labels, int vocab_size, int budget,
                        Rng& rng) {
  if (budget < 1) throw std::invalid_argument("sample budget must be >= 1");
  if (labels.empty()) throw std::invalid_argument("labels empty");
  labels.check_range(vocab_size);
  if (labels.size() == vocab_size)
    throw std::invalid_argument("no negative labels");

  const auto& pos = labels.members();
  const auto neg = labels.absent(vocab_size);
  const auto n_pos = static_cast<std::int64_t>(pos.size());
  const auto n_neg = static_cast<std::int64_t>(neg.size());
  const std::int64_t total = n_pos * n_neg;

  PairSample out;
  if (total <= budget) {
    out.pairs.reserve(static_cast<std::size_t>(total));
    for (int u : pos)
      for (int v : neg) out.pairs.push_back({u, v});
    return out;
  }

  // Partial Fisher-Yates over the implicit index space [0, total): only the
  // touched slots are materialized, so a huge product costs O(budget).
  out.pairs.reserve(static_cast<std::size_t>(budget));
  std::unordered_map<std::int64_t, std::int64_t> moved;
  moved.reserve(static_cast<std::size_t>(budget) * 2);
  auto slot = [&](std::int64_t i) {
    auto it = moved.find(i);
    return it == moved.end() ? i : it->second;
  };
  for (std::int64_t i = 0; i < budget; ++i) {
    const std::int64_t j = rng.uniform_int(i, total - 1);
    const std::int64_t pick = slot(j);
    moved[j] = slot(i);
    out.pairs.push_back({pos[static_cast<std::size_t>(pick / n_neg)],
                         neg[static_cast<std::size_t>(pick % n_neg)]});
  }
  return out;
}

LossResult lsep(const Eigen::VectorXd& scores, const PairSample& pairs) {
  check_pairs(scores, pairs);
  LossResult res;
  res.grad = Eigen::VectorXd::Zero(scores.size());
  if (pairs.pairs.empty()) return res;

  // value = log(1 + sum exp(d_p)), d_p = f_v - f_u. Shift by
  // m = max(0, max d_p) so every exponent is <= 0; the implicit "1" becomes
  // exp(-m). Per-pair gradient weight exp(d_p) / (1 + S) = exp(d_p - value)
  // lies in [0, 1] by construction.
  double m = 0.0;
  for (const auto& p : pairs.pairs)
    m = std::max(m, scores[p.negative] - scores[p.positive]);
  double sum = std::exp(-m);
  for (const auto& p : pairs.pairs)
    sum += std::exp(scores[p.negative] - scores[p.positive] - m);
  res.value = m + std::log(sum);

  for (const auto& p : pairs.pairs) {
    const double w =
        std::exp(scores[p.negative] - scores[p.positive] - res.value);
    res.grad[p.negative] += w;
    res.grad[p.positive] -= w;
  }
  return res;
}

LossResult hinge_rank(const Eigen::VectorXd& scores, const PairSample& pairs,
                      double margin) {
  if (margin < 0) throw std::invalid_argument("margin must be >= 0");
  check_pairs(scores, pairs);
  LossResult res;
  res.grad = Eigen::VectorXd::Zero(scores.size());
  for (const auto& p : pairs.pairs) {
    const double slack = margin + scores[p.negative] - scores[p.positive];
    if (slack > 0) {
      res.value += slack;
      res.grad[p.negative] += 1.0;
      res.grad[p.positive] -= 1.0;
    }
  }
  return res;
}

LossResult warp(const Eigen::VectorXd& scores, const LabelSet& labels,
                double margin, WeightScheme scheme) {
  if (margin < 0) throw std::invalid_argument("margin must be >= 0");
  check_labels(scores, labels);
  const int k = static_cast<int>(scores.size());

  LossResult res;
  res.grad = Eigen::VectorXd::Zero(k);

  std::vector<double> weight(static_cast<std::size_t>(k) + 1, 1.0);
  if (scheme == WeightScheme::kHarmonic) {
    weight[0] = 0.0;
    for (int r = 1; r <= k; ++r)
      weight[static_cast<std::size_t>(r)] =
          weight[static_cast<std::size_t>(r) - 1] + 1.0 / r;
  }

  const auto rank = ranks(scores);
  for (int u : labels.members()) {
    const double w = weight[static_cast<std::size_t>(rank[static_cast<std::size_t>(u)])];
    for (int v : labels.absent(k)) {
      const double slack = margin + scores[v] - scores[u];
      if (slack > 0) {
        res.value += w * slack;
        res.grad[v] += w;
        res.grad[u] -= w;
      }
    }
  }
  return res;
}

LossResult bpmll(const Eigen::VectorXd& scores, const LabelSet& labels) {
  check_labels(scores, labels);
  const int k = static_cast<int>(scores.size());

  LossResult res;
  res.grad = Eigen::VectorXd::Zero(k);
  const auto neg = labels.absent(k);
  for (int u : labels.members()) {
    for (int v : neg) {
      const double d = scores[v] - scores[u];
      if (d > kExpCap) {
        // Clamped region: constant contribution, zero gradient.
        res.value += std::exp(kExpCap);
        res.clamped = true;
      } else {
        const double e = std::exp(d);
        res.value += e;
        res.grad[v] += e;
        res.grad[u] -= e;
      }
    }
  }
  return res;
}

LossResult softmax_ml(const Eigen::VectorXd& scores, const LabelSet& labels) {
  check_labels(scores, labels);
  if (labels.empty()) throw std::invalid_argument("labels empty");
  const int k = static_cast<int>(scores.size());

  const double m = scores.maxCoeff();
  double z = 0.0;
  for (int j = 0; j < k; ++j) z += std::exp(scores[j] - m);
  const double lse = m + std::log(z);

  LossResult res;
  res.grad = Eigen::VectorXd::Zero(k);
  for (int j = 0; j < k; ++j)
    res.grad[j] = labels.size() * std::exp(scores[j] - lse);
  for (int y : labels.members()) {
    res.value += lse - scores[y];
    res.grad[y] -= 1.0;
  }
  return res;
}

std::pair<double, double> asymptotic_forms(const Eigen::VectorXd& scores,
                                           const LabelSet& labels,
                                           double margin_i) {
  check_labels(scores, labels);
  const int k = static_cast<int>(scores.size());
  double hinge_form = 0.0;
  double linear_form = 0.0;
  const auto neg = labels.absent(k);
  for (int u : labels.members()) {
    for (int v : neg) {
      hinge_form += std::max(0.0, margin_i + scores[v] - scores[u]);
      linear_form += scores[v] - scores[u];
    }
  }
  return {hinge_form, linear_form};
}

const char* loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::kLsep: return "lsep";
    case LossKind::kHinge: return "hinge";
    case LossKind::kWarp: return "warp";
    case LossKind::kBpmll: return "bpmll";
    case LossKind::kSoftmax: return "softmax";
  }
  throw std::logic_error("unreachable loss kind");
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "lsep") return LossKind::kLsep;
  if (name == "hinge") return LossKind::kHinge;
  if (name == "warp") return LossKind::kWarp;
  if (name == "bpmll") return LossKind::kBpmll;
  if (name == "softmax") return LossKind::kSoftmax;
  throw std::invalid_argument(
      "unknown loss kind '" + name +
      "' (expected lsep, hinge, warp, bpmll, or softmax)");
}

LossResult score_loss(const Eigen::VectorXd& scores, const LabelSet& labels,
                      LossKind kind, const LossConfig& cfg, Rng& pair_rng) {
  const int k = static_cast<int>(scores.size());
  switch (kind) {
    case LossKind::kLsep:
      return lsep(scores, sample_pairs(labels, k, cfg.sample_budget, pair_rng));
    case LossKind::kHinge:
      return hinge_rank(
          scores, sample_pairs(labels, k, cfg.sample_budget, pair_rng),
          cfg.margin);
    case LossKind::kWarp:
      return warp(scores, labels, cfg.margin, cfg.warp_weight);
    case LossKind::kBpmll:
      return bpmll(scores, labels);
    case LossKind::kSoftmax:
      return softmax_ml(scores, labels);
  }
  throw std::logic_error("unreachable loss kind");
}

}  // namespace mlrank
