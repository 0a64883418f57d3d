#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mlrank/data.hpp"
#include "mlrank/errors.hpp"

using namespace mlrank;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.vocab_size != b.vocab_size || a.feature_dim != b.feature_dim ||
      a.size() != b.size())
    return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a.samples[i].labels == b.samples[i].labels)) return false;
    if (a.samples[i].features != b.samples[i].features) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("label set basics") {
  LabelSet s(std::vector<int>{3, 1});
  CHECK(s.members() == std::vector<int>{1, 3});
  CHECK(s.contains(1));
  CHECK(!s.contains(2));
  CHECK(s.absent(4) == std::vector<int>{0, 2});
  CHECK_THROWS_AS(LabelSet(std::vector<int>{1, 1}), std::invalid_argument);
  CHECK_THROWS_AS(LabelSet(std::vector<int>{-1}), std::invalid_argument);
  CHECK_THROWS_AS(s.check_range(3), std::invalid_argument);
}

TEST_CASE("dataset validation catches structural problems") {
  Dataset ds;
  ds.vocab_size = 3;
  ds.feature_dim = 2;
  ds.samples.push_back({Eigen::Vector2d(0.0, 1.0), LabelSet({0})});
  CHECK_NOTHROW(ds.validate());

  SUBCASE("empty labels") {
    ds.samples.push_back({Eigen::Vector2d(0.0, 1.0), LabelSet()});
    CHECK_THROWS_WITH_AS(ds.validate(),
                         doctest::Contains("sample 1"),
                         std::invalid_argument);
  }
  SUBCASE("label out of range") {
    ds.samples.push_back({Eigen::Vector2d(0.0, 1.0), LabelSet({5})});
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  }
  SUBCASE("ragged features") {
    ds.samples.push_back({Eigen::Vector3d(0.0, 1.0, 2.0), LabelSet({1})});
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  }
  SUBCASE("vocab too small") {
    ds.vocab_size = 1;
    CHECK_THROWS_AS(ds.validate(), std::invalid_argument);
  }
}

TEST_CASE("independent distribution accepts boundary probabilities") {
  // p = 1 / p = 0 are degenerate but well-defined: the label is always /
  // never present.
  const auto dist = LabelDistribution::independent({1.0, 0.0});
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const LabelSet y = dist.sample_nonempty(rng);
    CHECK(y.members() == std::vector<int>{0});
  }
  CHECK(dist.empty_mass() == 0.0);
  CHECK_THROWS_AS(LabelDistribution::independent({0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LabelDistribution::independent({0.5, 1.5}),
                  std::invalid_argument);
}

TEST_CASE("joint distribution validates and normalizes") {
  CHECK_THROWS_AS(LabelDistribution::joint(1, {0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LabelDistribution::joint(13, std::vector<double>(8192, 1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(LabelDistribution::joint(2, {0.1, 0.2, 0.3}),
                  std::invalid_argument);  // wrong table size
  CHECK_THROWS_AS(LabelDistribution::joint(2, {0.5, -0.1, 0.3, 0.3}),
                  std::invalid_argument);
  CHECK_THROWS_AS(LabelDistribution::joint(2, {0.0, 0.0, 0.0, 0.0}),
                  std::invalid_argument);

  // unnormalized table is rescaled
  const auto dist = LabelDistribution::joint(2, {0.0, 3.0, 1.0, 0.0});
  const auto m = dist.marginals();
  CHECK(m[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("joint marginals match hand enumeration") {
  // P({label 0}) = 0.6, P({label 0, label 1}) = 0.4
  std::vector<double> probs(4, 0.0);
  probs[0b01] = 0.6;
  probs[0b11] = 0.4;
  const auto dist = LabelDistribution::joint(2, probs);
  const auto m = dist.marginals();
  CHECK(m[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m[1] == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(dist.empty_mass() == 0.0);
}

TEST_CASE("synthetic generation is deterministic") {
  const auto dist = LabelDistribution::independent({0.8, 0.4, 0.3});
  const Dataset a = generate_synthetic(dist, 50, FeatureMode::kCluster, 0.1, 7);
  const Dataset b = generate_synthetic(dist, 50, FeatureMode::kCluster, 0.1, 7);
  const Dataset c = generate_synthetic(dist, 50, FeatureMode::kCluster, 0.1, 8);
  CHECK(datasets_equal(a, b));
  CHECK(!datasets_equal(a, c));
  CHECK_NOTHROW(a.validate());
  CHECK(a.feature_dim == 3);
  CHECK(a.vocab_size == 3);
}

TEST_CASE("synthetic label frequencies match the nonempty-conditioned law") {
  // Generated datasets never contain empty label sets (training data must
  // not), so the per-label frequency target is p_k / (1 - P(empty)), not
  // p_k itself. For p = (0.9, 0.5, 0.1): P(empty) = 0.1*0.5*0.9 = 0.045.
  const std::vector<double> p{0.9, 0.5, 0.1};
  const auto dist = LabelDistribution::independent(p);
  const int n = 100000;
  const Dataset ds =
      generate_synthetic(dist, n, FeatureMode::kCluster, 0.0, 123);

  const double nonempty = 1.0 - dist.empty_mass();
  CHECK(nonempty == doctest::Approx(0.955).epsilon(1e-12));
  for (int k = 0; k < 3; ++k) {
    int count = 0;
    for (const auto& s : ds.samples) count += s.labels.contains(k) ? 1 : 0;
    const double freq = static_cast<double>(count) / n;
    const double expect = p[static_cast<std::size_t>(k)] / nonempty;
    const double tol = 3.0 * std::sqrt(expect * (1.0 - expect) / n);
    CHECK(std::abs(freq - expect) <= tol);
  }
  for (const auto& s : ds.samples) CHECK(!s.labels.empty());
}

TEST_CASE("cluster features sit at 4x one-hot sums in the noiseless limit") {
  std::vector<double> probs(8, 0.0);
  probs[0b011] = 0.5;
  probs[0b100] = 0.5;
  const auto dist = LabelDistribution::joint(3, probs);
  const Dataset ds = generate_synthetic(dist, 40, FeatureMode::kCluster, 0.0, 3);
  for (const auto& s : ds.samples) {
    for (int k = 0; k < 3; ++k) {
      const double want = s.labels.contains(k) ? 4.0 : 0.0;
      CHECK(s.features[k] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("linear-logits mode reproduces independent rates noiselessly") {
  const std::vector<double> p{0.7, 0.3};
  const auto dist = LabelDistribution::independent(p);
  const int n = 100000;
  const Dataset ds =
      generate_synthetic(dist, n, FeatureMode::kLinearLogits, 0.0, 77);
  const double nonempty = 1.0 - (1 - 0.7) * (1 - 0.3);
  for (int k = 0; k < 2; ++k) {
    int count = 0;
    for (const auto& s : ds.samples) count += s.labels.contains(k) ? 1 : 0;
    const double expect = p[static_cast<std::size_t>(k)] / nonempty;
    const double tol = 3.0 * std::sqrt(expect * (1.0 - expect) / n);
    CHECK(std::abs(static_cast<double>(count) / n - expect) <= tol);
  }
}

TEST_CASE("linear-logits rejects joint distributions") {
  const auto dist = LabelDistribution::joint(2, {0.0, 0.5, 0.5, 0.0});
  CHECK_THROWS_AS(
      generate_synthetic(dist, 10, FeatureMode::kLinearLogits, 0.0, 1),
      std::invalid_argument);
}

TEST_CASE("split honors the rounded sizes and partitions the data") {
  const auto dist = LabelDistribution::independent({1.0, 0.0});
  const Dataset ds = generate_synthetic(dist, 100, FeatureMode::kCluster, 1.0, 5);

  const auto [train, holdout] = split(ds, 0.05, 11);
  CHECK(train.size() == 95);
  CHECK(holdout.size() == 5);
  CHECK(train.vocab_size == ds.vocab_size);

  // partition: every original feature vector appears exactly once overall
  std::multiset<double> original;
  std::multiset<double> recombined;
  for (const auto& s : ds.samples) original.insert(s.features.sum());
  for (const auto& s : train.samples) recombined.insert(s.features.sum());
  for (const auto& s : holdout.samples) recombined.insert(s.features.sum());
  CHECK(original == recombined);

  const auto [t2, h2] = split(ds, 0.05, 11);
  CHECK(datasets_equal(train, t2));
  CHECK(datasets_equal(holdout, h2));

  CHECK_THROWS_AS(split(ds, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(split(ds, 0.001, 1), std::invalid_argument);  // empty holdout
}

TEST_CASE("label noise keeps sets nonempty and proper, at the right rate") {
  // p_3 = 0 keeps full-cover sets out of the input, so properness holds for
  // untouched samples too.
  const auto dist = LabelDistribution::independent({0.9, 0.5, 0.1, 0.0});
  const Dataset ds = generate_synthetic(dist, 20000, FeatureMode::kCluster, 0.0, 9);
  const Dataset noisy = apply_label_noise(ds, 0.1, 21);
  REQUIRE(noisy.size() == ds.size());

  int changed = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(!noisy.samples[i].labels.empty());
    CHECK(noisy.samples[i].labels.size() < noisy.vocab_size);
    CHECK(noisy.samples[i].features == ds.samples[i].features);
    if (!(noisy.samples[i].labels == ds.samples[i].labels)) ++changed;
  }
  const double rate = static_cast<double>(changed) / static_cast<double>(ds.size());
  CHECK(rate == doctest::Approx(0.1).epsilon(0.15));

  const Dataset same = apply_label_noise(ds, 0.0, 21);
  CHECK(datasets_equal(same, ds));
}

TEST_CASE("csv round trip preserves the dataset") {
  const auto dist = LabelDistribution::independent({0.8, 0.5, 0.2});
  const Dataset ds = generate_synthetic(dist, 30, FeatureMode::kCluster, 0.7, 2);
  const auto path = temp_file("mlrank_roundtrip.csv");
  write_dataset(ds, path.string(), FileFormat::kCsv);
  const Dataset back = load_dataset(path.string(), FileFormat::kCsv);
  CHECK(datasets_equal(ds, back));
}

TEST_CASE("jsonl round trip preserves the dataset") {
  const auto dist = LabelDistribution::independent({0.8, 0.5, 0.2});
  const Dataset ds = generate_synthetic(dist, 30, FeatureMode::kCluster, 0.7, 2);
  const auto path = temp_file("mlrank_roundtrip.jsonl");
  write_dataset(ds, path.string(), FileFormat::kJsonl);
  const Dataset back = load_dataset(path.string(), FileFormat::kJsonl);
  CHECK(datasets_equal(ds, back));
}

TEST_CASE("csv and jsonl encode the same dataset identically") {
  Dataset ds;
  ds.vocab_size = 4;
  ds.feature_dim = 3;
  ds.samples.push_back({Eigen::Vector3d(0.5, 1.25, -0.375), LabelSet({0, 2})});
  ds.samples.push_back({Eigen::Vector3d(-1.0, 0.0, 2.0), LabelSet({1})});

  const auto csv_path = temp_file("mlrank_pair.csv");
  const auto jsonl_path = temp_file("mlrank_pair.jsonl");
  write_dataset(ds, csv_path.string(), FileFormat::kCsv);
  write_dataset(ds, jsonl_path.string(), FileFormat::kJsonl);
  const Dataset from_csv = load_dataset(csv_path.string(), FileFormat::kCsv);
  const Dataset from_jsonl =
      load_dataset(jsonl_path.string(), FileFormat::kJsonl);
  CHECK(datasets_equal(from_csv, from_jsonl));
  CHECK(datasets_equal(from_csv, ds));
}

TEST_CASE("csv loader reports labeled parse failures with line numbers") {
  const auto path = temp_file("mlrank_bad.csv");
  const auto manifest = temp_file("mlrank_bad.csv.manifest.json");

  SUBCASE("label out of range") {
    std::ofstream(path) << "f1,f2,labels\n0.1,0.2,1|3\n0.3,0.4,5\n";
    std::ofstream(manifest) << "{\"vocab_size\": 4}";
    CHECK_THROWS_WITH_AS(load_dataset(path.string(), FileFormat::kCsv),
                         doctest::Contains("out of range"), ConfigError);
    CHECK_THROWS_WITH_AS(load_dataset(path.string(), FileFormat::kCsv),
                         doctest::Contains("line 3"), ConfigError);
  }
  SUBCASE("empty label set") {
    std::ofstream(path) << "f1,f2,labels\n0.1,0.2,\n";
    std::ofstream(manifest) << "{\"vocab_size\": 4}";
    CHECK_THROWS_WITH_AS(load_dataset(path.string(), FileFormat::kCsv),
                         doctest::Contains("empty label"), ConfigError);
  }
  SUBCASE("inconsistent feature dimension") {
    std::ofstream(path) << "f1,f2,labels\n0.1,0.2,1\n0.3,2\n";
    std::ofstream(manifest) << "{\"vocab_size\": 4}";
    CHECK_THROWS_AS(load_dataset(path.string(), FileFormat::kCsv), ConfigError);
  }
  SUBCASE("missing manifest") {
    std::ofstream(path) << "f1,f2,labels\n0.1,0.2,1\n";
    std::filesystem::remove(manifest);
    CHECK_THROWS_WITH_AS(load_dataset(path.string(), FileFormat::kCsv),
                         doctest::Contains("manifest"), ConfigError);
  }
  SUBCASE("unparseable feature") {
    std::ofstream(path) << "f1,f2,labels\n0.1,abc,1\n";
    std::ofstream(manifest) << "{\"vocab_size\": 4}";
    CHECK_THROWS_WITH_AS(load_dataset(path.string(), FileFormat::kCsv),
                         doctest::Contains("line 2"), ConfigError);
  }
}

TEST_CASE("csv matching the documented shape parses as expected") {
  const auto path = temp_file("mlrank_doc.csv");
  std::ofstream(path) << "f1,f2,f3,labels\n"
                      << "0.5,1.2,-0.3,1|3\n"
                      << "1.0,0.0,0.25,2\n";
  std::ofstream(temp_file("mlrank_doc.csv.manifest.json"))
      << "{\"vocab_size\": 4}";
  const Dataset ds = load_dataset(path.string(), FileFormat::kCsv);
  REQUIRE(ds.size() == 2);
  CHECK(ds.feature_dim == 3);
  CHECK(ds.vocab_size == 4);
  // file labels are 1-based; in-memory labels are 0-based
  CHECK(ds.samples[0].labels.members() == std::vector<int>{0, 2});
  CHECK(ds.samples[1].labels.members() == std::vector<int>{1});
  CHECK(ds.samples[0].features[2] == doctest::Approx(-0.3));
}
