#include "mlrank/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mlrank/consistency.hpp"
#include "mlrank/decision.hpp"
#include "mlrank/losses.hpp"
#include "mlrank/predictor.hpp"
#include "mlrank/rng.hpp"

namespace mlrank {

namespace {

constexpr double kStep = 1e-5;
constexpr double kKinkMargin = 1e-3;
constexpr int kMaxRedraws = 200;

Eigen::VectorXd to_vec(const std::vector<double>& flat) {
  return Eigen::Map<const Eigen::VectorXd>(flat.data(),
                                           static_cast<Eigen::Index>(flat.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

LabelSet random_proper_subset(int k, Rng& rng) {
  const auto size = static_cast<int>(rng.uniform_int(1, k - 1));
  std::vector<std::size_t> perm = rng.permutation(static_cast<std::size_t>(k));
  std::vector<int> members;
  members.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i)
    members.push_back(static_cast<int>(perm[static_cast<std::size_t>(i)]));
  return LabelSet(std::move(members));
}

Eigen::VectorXd random_scores(int k, Rng& rng) {
  Eigen::VectorXd f(k);
  for (int j = 0; j < k; ++j) f[j] = rng.uniform(-2.0, 2.0);
  return f;
}

// True when finite differences are trustworthy for the kinked losses:
// every hinge slack over the full product and (for rank stability) every
// pairwise score gap is at least kKinkMargin away from zero.
bool margin_safe(const Eigen::VectorXd& f, const LabelSet& labels,
                 double margin, bool need_rank_stability) {
  const int k = static_cast<int>(f.size());
  const auto neg = labels.absent(k);
  for (int u : labels.members())
    for (int v : neg)
      if (std::abs(margin + f[v] - f[u]) < kKinkMargin) return false;
  if (need_rank_stability)
    for (int a = 0; a < k; ++a)
      for (int b = a + 1; b < k; ++b)
        if (std::abs(f[a] - f[b]) < kKinkMargin) return false;
  return true;
}

double min_hidden_preact_gap(const FeedForward& net,
                             const Eigen::VectorXd& x) {
  double gap = std::numeric_limits<double>::infinity();
  Eigen::VectorXd a = x;
  for (int i = 0; i + 1 < net.num_layers(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    Eigen::VectorXd z = net.weights[ui] * a + net.biases[ui];
    gap = std::min(gap, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return gap;
}

void record(GradCheckReport& rep, const std::string& name, double err,
            int trials) {
  rep.entries.push_back({name, err, trials});
}

double check_score_loss(LossKind kind, int trials, Rng& rng) {
  double worst = 0.0;
  const LossConfig cfg;  // margin 1.0, budget 1000 (full product at K <= 20)
  for (int t = 0; t < trials; ++t) {
    const int k = static_cast<int>(rng.uniform_int(3, 20));
    LabelSet y = random_proper_subset(k, rng);
    Eigen::VectorXd f = random_scores(k, rng);
    if (kind == LossKind::kHinge || kind == LossKind::kWarp) {
      int tries = 0;
      while (!margin_safe(f, y, cfg.margin, kind == LossKind::kWarp) &&
             ++tries < kMaxRedraws)
        f = random_scores(k, rng);
    }
    Rng pair_rng = rng.spawn(static_cast<std::uint64_t>(t) + 1);
    // Budget covers the full product here, so the pair draw is
    // deterministic and the objective is a fixed function of f.
    const LossResult res = score_loss(f, y, kind, cfg, pair_rng);
    const double err = fd_relative_error(
        [&](const Eigen::VectorXd& fx) {
          Rng dummy(0);
          return score_loss(fx, y, kind, cfg, dummy).value;
        },
        f, res.grad, kStep);
    worst = std::max(worst, err);
  }
  return worst;
}

double check_predictor_end_to_end(Arch arch, int trials, Rng& rng) {
  double worst = 0.0;
  const LossConfig lcfg;
  const LossKind kinds[] = {LossKind::kLsep, LossKind::kHinge, LossKind::kWarp,
                            LossKind::kBpmll, LossKind::kSoftmax};
  for (int t = 0; t < trials; ++t) {
    const LossKind kind = kinds[t % 5];
    const int d = static_cast<int>(rng.uniform_int(2, 10));
    const int k = static_cast<int>(rng.uniform_int(3, 10));
    const int hidden = static_cast<int>(rng.uniform_int(2, 6));

    PredictorModel model;
    Eigen::VectorXd x(d);
    LabelSet y;
    PairSample pairs;
    bool ok = false;
    for (int tries = 0; tries < kMaxRedraws && !ok; ++tries) {
      Rng init = rng.spawn(rng.next_u64());
      model = init_predictor(arch, d, k, hidden, init);
      for (int j = 0; j < d; ++j) x[j] = rng.normal();
      y = random_proper_subset(k, rng);
      const Eigen::VectorXd scores = model.net.forward(x);
      ok = margin_safe(scores, y, lcfg.margin, kind == LossKind::kWarp) &&
           (arch == Arch::kLinear ||
            min_hidden_preact_gap(model.net, x) > kKinkMargin);
    }
    Rng pair_rng = rng.spawn(rng.next_u64());
    pairs = sample_pairs(y, k, lcfg.sample_budget, pair_rng);

    // Objective as a function of the flattened parameters, with the pair
    // set held fixed so the sampled losses stay deterministic.
    auto objective = [&](const Eigen::VectorXd& flat) {
      FeedForward net = model.net;
      net.unflatten(to_std(flat));
      const Eigen::VectorXd scores = net.forward(x);
      switch (kind) {
        case LossKind::kLsep: return lsep(scores, pairs).value;
        case LossKind::kHinge:
          return hinge_rank(scores, pairs, lcfg.margin).value;
        case LossKind::kWarp:
          return warp(scores, y, lcfg.margin, lcfg.warp_weight).value;
        case LossKind::kBpmll: return bpmll(scores, y).value;
        case LossKind::kSoftmax: return softmax_ml(scores, y).value;
      }
      return 0.0;
    };

    FeedForward::Trace trace;
    const Eigen::VectorXd scores = model.net.forward(x, &trace);
    LossResult res;
    switch (kind) {
      case LossKind::kLsep: res = lsep(scores, pairs); break;
      case LossKind::kHinge: res = hinge_rank(scores, pairs, lcfg.margin); break;
      case LossKind::kWarp:
        res = warp(scores, y, lcfg.margin, lcfg.warp_weight);
        break;
      case LossKind::kBpmll: res = bpmll(scores, y); break;
      case LossKind::kSoftmax: res = softmax_ml(scores, y); break;
    }
    FeedForward grads = model.net.zeros_like();
    model.net.backward(trace, res.grad, grads);

    const double err = fd_relative_error(objective, to_vec(model.net.flatten()),
                                         to_vec(grads.flatten()), kStep);
    worst = std::max(worst, err);
  }
  return worst;
}

double check_count_loss(int trials, Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int in = static_cast<int>(rng.uniform_int(2, 10));
    const int k = static_cast<int>(rng.uniform_int(3, 10));
    const int n = static_cast<int>(rng.uniform_int(2, 5));

    DecisionModel model;
    Eigen::VectorXd penult(in);
    for (int tries = 0; tries < kMaxRedraws; ++tries) {
      Rng init = rng.spawn(rng.next_u64());
      model = init_decision(HeadKind::kCount, in, k, n, init, 12, 6);
      for (int j = 0; j < in; ++j) penult[j] = rng.normal();
      if (min_hidden_preact_gap(model.net, penult) > kKinkMargin) break;
    }
    const int label_count = static_cast<int>(rng.uniform_int(1, k));

    FeedForward grads = model.net.zeros_like();
    count_head_loss(model, penult, label_count, &grads);
    const double err = fd_relative_error(
        [&](const Eigen::VectorXd& flat) {
          DecisionModel m = model;
          m.net.unflatten(to_std(flat));
          return count_head_loss(m, penult, label_count, nullptr);
        },
        to_vec(model.net.flatten()), to_vec(grads.flatten()), kStep);
    worst = std::max(worst, err);
  }
  return worst;
}

double check_threshold_loss(int trials, Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int in = static_cast<int>(rng.uniform_int(2, 10));
    const int k = static_cast<int>(rng.uniform_int(3, 10));

    DecisionModel model;
    Eigen::VectorXd penult(in);
    for (int tries = 0; tries < kMaxRedraws; ++tries) {
      Rng init = rng.spawn(rng.next_u64());
      model = init_decision(HeadKind::kThreshold, in, k, 1, init, 12, 6);
      for (int j = 0; j < in; ++j) penult[j] = rng.normal();
      if (min_hidden_preact_gap(model.net, penult) > kKinkMargin) break;
    }
    const Eigen::VectorXd scores = random_scores(k, rng);
    const LabelSet y = random_proper_subset(k, rng);

    FeedForward grads = model.net.zeros_like();
    threshold_head_loss(model, scores, penult, y, &grads);
    const double err = fd_relative_error(
        [&](const Eigen::VectorXd& flat) {
          DecisionModel m = model;
          m.net.unflatten(to_std(flat));
          return threshold_head_loss(m, scores, penult, y, nullptr);
        },
        to_vec(model.net.flatten()), to_vec(grads.flatten()), kStep);
    worst = std::max(worst, err);
  }
  return worst;
}

double check_risk_grad(int trials, Rng& rng) {
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    const int k = static_cast<int>(rng.uniform_int(3, 8));
    std::vector<double> p(static_cast<std::size_t>(k));
    for (auto& v : p) v = rng.uniform(0.05, 0.95);
    const auto beta = pair_probs(LabelDistribution::independent(p));
    const Eigen::VectorXd f = random_scores(k, rng);
    const RiskEval eval = risk(f, beta);
    const double err = fd_relative_error(
        [&](const Eigen::VectorXd& fx) { return risk(fx, beta).value; }, f,
        eval.grad, kStep);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

double fd_relative_error(
    const std::function<double(const Eigen::VectorXd&)>& value_at,
    const Eigen::VectorXd& x0, const Eigen::VectorXd& analytic, double h) {
  if (analytic.size() != x0.size())
    throw std::invalid_argument("gradient size does not match point");
  Eigen::VectorXd numeric(x0.size());
  Eigen::VectorXd x = x0;
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    x[j] = x0[j] + h;
    const double up = value_at(x);
    x[j] = x0[j] - h;
    const double down = value_at(x);
    x[j] = x0[j];
    numeric[j] = (up - down) / (2.0 * h);
  }
  const double denom = std::max(
      {1.0, analytic.lpNorm<Eigen::Infinity>(),
       numeric.lpNorm<Eigen::Infinity>()});
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / denom;
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_err);
  return w;
}

GradCheckReport run_gradcheck(std::uint64_t seed, int trials) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  Rng root(seed);
  GradCheckReport rep;

  const LossKind kinds[] = {LossKind::kLsep, LossKind::kHinge, LossKind::kWarp,
                            LossKind::kBpmll, LossKind::kSoftmax};
  std::uint64_t stream = 1;
  for (LossKind kind : kinds) {
    Rng r = root.spawn(stream++);
    record(rep, loss_kind_name(kind), check_score_loss(kind, trials, r),
           trials);
  }
  {
    Rng r = root.spawn(stream++);
    record(rep, "predictor_linear",
           check_predictor_end_to_end(Arch::kLinear, trials, r), trials);
  }
  {
    Rng r = root.spawn(stream++);
    record(rep, "predictor_mlp",
           check_predictor_end_to_end(Arch::kMlp, trials, r), trials);
  }
  {
    Rng r = root.spawn(stream++);
    record(rep, "count_loss", check_count_loss(trials, r), trials);
  }
  {
    Rng r = root.spawn(stream++);
    record(rep, "threshold_loss", check_threshold_loss(trials, r), trials);
  }
  {
    Rng r = root.spawn(stream++);
    record(rep, "pairwise_risk", check_risk_grad(trials, r), trials);
  }
  return rep;
}

}  // namespace mlrank
