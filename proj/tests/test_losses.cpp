#include <doctest.h>

#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "mlrank/gradcheck.hpp"
#include "mlrank/losses.hpp"

using namespace mlrank;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

PairSample full_product(const LabelSet& labels, int vocab_size) {
  Rng rng(0);  // unused: the full product never consumes randomness
  return sample_pairs(labels, vocab_size, 1000000, rng);
}

// random score vector and a random proper nonempty label subset
std::pair<Eigen::VectorXd, LabelSet> random_instance(Rng& rng, int vocab_size) {
  Eigen::VectorXd f(vocab_size);
  for (int i = 0; i < vocab_size; ++i) f[i] = rng.uniform(-3.0, 3.0);
  const int n_pos =
      static_cast<int>(rng.uniform_int(1, vocab_size - 1));
  const auto perm = rng.permutation(static_cast<std::size_t>(vocab_size));
  std::vector<int> members(perm.begin(), perm.begin() + n_pos);
  return {f, LabelSet(members)};
}

}  // namespace

TEST_CASE("pair sampling returns the full product in deterministic order") {
  Rng rng(1);
  const auto ps = sample_pairs(LabelSet({0}), 3, 1000, rng);
  REQUIRE(ps.pairs.size() == 2);
  CHECK(ps.pairs[0].positive == 0);
  CHECK(ps.pairs[0].negative == 1);
  CHECK(ps.pairs[1].positive == 0);
  CHECK(ps.pairs[1].negative == 2);

  const auto ps2 = sample_pairs(LabelSet({1, 3}), 4, 1000, rng);
  REQUIRE(ps2.pairs.size() == 4);  // {1,3} x {0,2}, ascending u then v
  CHECK(ps2.pairs[0].positive == 1);
  CHECK(ps2.pairs[0].negative == 0);
  CHECK(ps2.pairs[1].positive == 1);
  CHECK(ps2.pairs[1].negative == 2);
  CHECK(ps2.pairs[2].positive == 3);
  CHECK(ps2.pairs[2].negative == 0);
  CHECK(ps2.pairs[3].positive == 3);
  CHECK(ps2.pairs[3].negative == 2);
}

TEST_CASE("pair sampling rejects degenerate label sets") {
  Rng rng(1);
  CHECK_THROWS_WITH_AS(sample_pairs(LabelSet({0, 1}), 2, 10, rng),
                       "no negative labels", std::invalid_argument);
  CHECK_THROWS_AS(sample_pairs(LabelSet(), 2, 10, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_pairs(LabelSet({0}), 3, 0, rng),
                  std::invalid_argument);
}

TEST_CASE("budgeted sampling draws distinct valid pairs uniformly") {
  const LabelSet labels({0});
  // product size 2, budget 1: each pair should appear ~half the time
  int first = 0;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    Rng rng(static_cast<std::uint64_t>(s));
    const auto ps = sample_pairs(labels, 3, 1, rng);
    REQUIRE(ps.pairs.size() == 1);
    if (ps.pairs[0].negative == 1) ++first;
  }
  CHECK(std::abs(first / static_cast<double>(draws) - 0.5) <= 0.02);

  // larger case: distinctness and validity of every drawn pair
  const LabelSet big({0, 5});
  Rng rng(99);
  const auto ps = sample_pairs(big, 12, 15, rng);
  REQUIRE(ps.pairs.size() == 15);
  std::set<std::pair<int, int>> seen;
  for (const auto& p : ps.pairs) {
    CHECK(big.contains(p.positive));
    CHECK(!big.contains(p.negative));
    seen.insert({p.positive, p.negative});
  }
  CHECK(seen.size() == 15);
}

TEST_CASE("budgeted sampling is uniform over a larger product") {
  // |Y| = 2, K = 6: product size 8 > budget 4
  const LabelSet labels({0, 1});
  std::vector<int> counts(8, 0);
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    Rng rng(static_cast<std::uint64_t>(s) + 1000);
    const auto ps = sample_pairs(labels, 6, 4, rng);
    for (const auto& p : ps.pairs) {
      const int u_idx = p.positive;                    // 0 or 1
      const int v_idx = p.negative - 2;                // 0..3
      ++counts[static_cast<std::size_t>(u_idx * 4 + v_idx)];
    }
  }
  // each of the 8 pairs should appear in 4/8 of draws
  for (int c : counts) {
    CHECK(std::abs(c / static_cast<double>(draws) - 0.5) <= 0.02);
  }
}

TEST_CASE("smoothed pairwise loss matches hand-computed values") {
  SUBCASE("empty pair list") {
    const auto r = lsep(vec({1.0, 2.0}), PairSample{});
    CHECK(r.value == 0.0);
    CHECK(r.grad.isZero(0.0));
  }
  SUBCASE("single tied pair gives log 2") {
    const auto r = lsep(vec({0.5, 0.5}), PairSample{{{0, 1}}});
    CHECK(r.value == doctest::Approx(0.6931471805599453).epsilon(1e-15));
  }
  SUBCASE("frozen oracle: f = (2,0,0), labels {0}, full product") {
    const auto r = lsep(vec({2.0, 0.0, 0.0}), full_product(LabelSet({0}), 3));
    CHECK(r.value == doctest::Approx(0.23954476622188453).epsilon(1e-15));
    CHECK(r.grad[0] == doctest::Approx(-0.21301395783840152).epsilon(1e-14));
    CHECK(r.grad[1] == doctest::Approx(0.10650697891920076).epsilon(1e-14));
    CHECK(r.grad[2] == doctest::Approx(0.10650697891920076).epsilon(1e-14));
  }
}

TEST_CASE("pairwise hinge matches hand-computed values") {
  SUBCASE("all slack satisfied") {
    const auto r =
        hinge_rank(vec({3.0, 0.0}), PairSample{{{0, 1}}}, 1.0);
    CHECK(r.value == 0.0);
    CHECK(r.grad.isZero(0.0));
  }
  SUBCASE("tied pair, margin 1") {
    const auto r = hinge_rank(vec({0.0, 0.0}), PairSample{{{0, 1}}}, 1.0);
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.grad[0] == doctest::Approx(-1.0));
    CHECK(r.grad[1] == doctest::Approx(1.0));
  }
  SUBCASE("frozen oracle: f = (0,2), labels {0}, margin 1") {
    const auto r =
        hinge_rank(vec({0.0, 2.0}), full_product(LabelSet({0}), 2), 1.0);
    CHECK(r.value == doctest::Approx(3.0).epsilon(1e-15));
  }
  SUBCASE("boundary slack contributes nothing") {
    // margin + f_v - f_u == 0 exactly: value 0 and subgradient 0
    const auto r = hinge_rank(vec({1.0, 0.0}), PairSample{{{0, 1}}}, 1.0);
    CHECK(r.value == 0.0);
    CHECK(r.grad.isZero(0.0));
  }
  CHECK_THROWS_AS(hinge_rank(vec({0.0, 0.0}), PairSample{{{0, 1}}}, -0.5),
                  std::invalid_argument);
}

TEST_CASE("rank-weighted hinge matches hand-computed values") {
  SUBCASE("no violations") {
    const auto r =
        warp(vec({5.0, 0.0}), LabelSet({0}), 1.0, WeightScheme::kHarmonic);
    CHECK(r.value == 0.0);
  }
  SUBCASE("rank 1 keeps weight 1") {
    const auto r =
        warp(vec({0.0, 0.0}), LabelSet({0}), 1.0, WeightScheme::kHarmonic);
    // tie ranks the lower index higher: rank(label 0) = 1, w(1) = 1
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("frozen oracle: bottom-ranked positive") {
    // rank(label 0) = 3, w(3) = 1 + 1/2 + 1/3 = 11/6; slacks 2 and 3
    const auto r =
        warp(vec({-1.0, 0.0, 1.0}), LabelSet({0}), 1.0, WeightScheme::kHarmonic);
    CHECK(r.value == doctest::Approx(9.166666666666666).epsilon(1e-14));
  }
  SUBCASE("uniform scheme reduces to the plain hinge") {
    const auto w =
        warp(vec({-1.0, 0.0, 1.0}), LabelSet({0}), 1.0, WeightScheme::kUniform);
    const auto h = hinge_rank(vec({-1.0, 0.0, 1.0}),
                              full_product(LabelSet({0}), 3), 1.0);
    CHECK(w.value == doctest::Approx(h.value).epsilon(1e-15));
  }
}

TEST_CASE("exponential pairwise loss matches hand-computed values and clamps") {
  SUBCASE("single tied pair") {
    const auto r = bpmll(vec({0.0, 0.0}), LabelSet({0}));
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(!r.clamped);
  }
  SUBCASE("frozen oracle: f = (2,0), labels {0}") {
    const auto r = bpmll(vec({2.0, 0.0}), LabelSet({0}));
    CHECK(r.value == doctest::Approx(0.1353352832366127).epsilon(1e-15));
    CHECK(r.grad[0] == doctest::Approx(-0.1353352832366127).epsilon(1e-14));
    CHECK(r.grad[1] == doctest::Approx(0.1353352832366127).epsilon(1e-14));
  }
  SUBCASE("exponent cap engaged") {
    const auto r = bpmll(vec({0.0, 40.0}), LabelSet({0}));
    CHECK(r.clamped);
    CHECK(std::isfinite(r.value));
    CHECK(r.value == doctest::Approx(std::exp(30.0)).epsilon(1e-12));
    CHECK(r.grad.isZero(0.0));  // clamped pair contributes a constant
  }
}

TEST_CASE("multi-label softmax matches hand-computed values") {
  SUBCASE("uniform scores, one label") {
    const auto r = softmax_ml(vec({0.0, 0.0}), LabelSet({0}));
    CHECK(r.value == doctest::Approx(0.6931471805599453).epsilon(1e-15));
    CHECK(r.grad[0] == doctest::Approx(-0.5).epsilon(1e-14));
    CHECK(r.grad[1] == doctest::Approx(0.5).epsilon(1e-14));
  }
  SUBCASE("uniform scores, two of three labels") {
    const auto r = softmax_ml(vec({0.0, 0.0, 0.0}), LabelSet({0, 1}));
    CHECK(r.value == doctest::Approx(2.1972245773362196).epsilon(1e-15));
  }
  SUBCASE("frozen oracle: well-separated scores") {
    const auto r = softmax_ml(vec({10.0, 0.0}), LabelSet({0}));
    CHECK(r.value ==
          doctest::Approx(4.5398899216870535e-05).epsilon(1e-10));
  }
  CHECK_THROWS_AS(softmax_ml(vec({0.0, 0.0}), LabelSet()),
                  std::invalid_argument);
}

TEST_CASE("asymptotic diagnostic forms") {
  CHECK(asymptotic_forms(vec({1.0, 2.0}), LabelSet({0, 1}), 1.0) ==
        std::pair<double, double>(0.0, 0.0));
  const auto tied = asymptotic_forms(vec({0.0, 0.0}), LabelSet({0}), 1.0);
  CHECK(tied.first == doctest::Approx(1.0));
  CHECK(tied.second == doctest::Approx(0.0));
  const auto sep = asymptotic_forms(vec({0.0, 2.0}), LabelSet({0}), 0.0);
  CHECK(sep.first == doctest::Approx(2.0));
  CHECK(sep.second == doctest::Approx(2.0));
}

TEST_CASE("pairwise losses have zero-sum gradients") {
  Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const int k = static_cast<int>(rng.uniform_int(3, 12));
    auto [f, labels] = random_instance(rng, k);
    const auto pairs = full_product(labels, k);

    CHECK(std::abs(lsep(f, pairs).grad.sum()) <= 1e-12);
    CHECK(std::abs(hinge_rank(f, pairs, 1.0).grad.sum()) <= 1e-12);
    CHECK(std::abs(
              warp(f, labels, 1.0, WeightScheme::kHarmonic).grad.sum()) <=
          1e-12);
    CHECK(std::abs(bpmll(f, labels).grad.sum()) <= 1e-12);
  }
}

TEST_CASE("pairwise losses are translation invariant") {
  Rng rng(37);
  for (int t = 0; t < 50; ++t) {
    const int k = static_cast<int>(rng.uniform_int(3, 12));
    auto [f, labels] = random_instance(rng, k);
    const auto pairs = full_product(labels, k);
    const double c = rng.uniform(-50.0, 50.0);
    const Eigen::VectorXd g = f.array() + c;

    CHECK(std::abs(lsep(f, pairs).value - lsep(g, pairs).value) <= 1e-10);
    CHECK(std::abs(hinge_rank(f, pairs, 1.0).value -
                   hinge_rank(g, pairs, 1.0).value) <= 1e-10);
    CHECK(std::abs(warp(f, labels, 1.0, WeightScheme::kHarmonic).value -
                   warp(g, labels, 1.0, WeightScheme::kHarmonic).value) <=
          1e-10);
    CHECK(std::abs(bpmll(f, labels).value - bpmll(g, labels).value) <= 1e-10);
  }
}

TEST_CASE("smoothed pairwise loss dominates its lower bounds") {
  Rng rng(41);
  for (int t = 0; t < 100; ++t) {
    const int k = static_cast<int>(rng.uniform_int(3, 10));
    auto [f, labels] = random_instance(rng, k);
    const auto pairs = full_product(labels, k);
    const auto r = lsep(f, pairs);

    double max_gap = 0.0;
    for (const auto& p : pairs.pairs) {
      const double d = f[p.negative] - f[p.positive];
      max_gap = std::max(max_gap, d);
      CHECK(r.value >= std::log1p(std::exp(std::min(d, 700.0))) - 1e-12);
    }
    CHECK(r.value >= max_gap - 1e-12);
    CHECK(r.value >= 0.0);
  }
}

TEST_CASE("smoothed pairwise loss stays finite at extreme score scales") {
  const Eigen::VectorXd f = vec({-1e4, 1e4, 0.0});
  const auto pairs = full_product(LabelSet({0}), 3);
  const auto r = lsep(f, pairs);
  CHECK(std::isfinite(r.value));
  CHECK(r.grad.allFinite());
  CHECK(r.value == doctest::Approx(2e4).epsilon(1e-12));

  // the un-damped exponential loss trips its cap on the same input
  const auto b = bpmll(f, LabelSet({0}));
  CHECK(b.clamped);
  CHECK(std::isfinite(b.value));
}

TEST_CASE("sampling exactness: full product equals sampled pairs under budget") {
  Rng rng(43);
  for (int t = 0; t < 20; ++t) {
    const int k = static_cast<int>(rng.uniform_int(3, 8));
    auto [f, labels] = random_instance(rng, k);
    const int product = labels.size() * (k - labels.size());

    Rng sample_rng(rng.next_u64());
    const auto sampled = sample_pairs(labels, k, product, sample_rng);
    const auto full = full_product(labels, k);
    REQUIRE(sampled.pairs.size() == full.pairs.size());
    CHECK(lsep(f, sampled).value == lsep(f, full).value);  // exact
  }
}

TEST_CASE("non-violating pairs lose gradient influence exponentially") {
  for (double gap : {1.0, 5.0, 10.0, 20.0}) {
    // positive ahead by `gap`; single pair
    const auto r = lsep(vec({gap, 0.0}), PairSample{{{0, 1}}});
    CHECK(std::abs(r.grad[0]) <= std::exp(-gap));
    CHECK(std::abs(r.grad[1]) <= std::exp(-gap));
  }
  // monotone: widening the gap shrinks the pair weight
  double prev = 1.0;
  for (double gap : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double w = lsep(vec({gap, 0.0}), PairSample{{{0, 1}}}).grad[1];
    CHECK(w < prev);
    prev = w;
  }
}

TEST_CASE("loss kind names round trip and reject unknowns") {
  for (LossKind kind : {LossKind::kLsep, LossKind::kHinge, LossKind::kWarp,
                        LossKind::kBpmll, LossKind::kSoftmax}) {
    CHECK(parse_loss_kind(loss_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(parse_loss_kind("focal"), std::invalid_argument);
}

TEST_CASE("analytic gradients agree with finite differences") {
  // 100 random instances per loss, K in 3..20, as run by the shared
  // finite-difference suite; the score-space losses must clear 1e-5.
  const GradCheckReport report = run_gradcheck(2024, 100);
  for (const auto& e : report.entries) {
    if (e.name == "lsep" || e.name == "hinge" || e.name == "warp" ||
        e.name == "bpmll" || e.name == "softmax") {
      CHECK_MESSAGE(e.max_rel_err <= 1e-5, e.name);
    }
  }
}
