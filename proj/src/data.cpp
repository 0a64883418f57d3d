#include "mlrank/data.hpp"

#include <json.hpp>

#include <Eigen/Dense>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "mlrank/errors.hpp"

namespace mlrank {

namespace {

using nlohmann::json;

constexpr double kClusterScale = 4.0;
constexpr int kMaxJointVocab = 12;
constexpr int kMaxRedraws = 100000;

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Inverse standard normal CDF: Acklam's rational approximation refined with
// one Halley step against erfc, accurate to ~1e-13 over (0, 1).
double inverse_normal_cdf(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();

  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
  return x - u / (1.0 + x * u / 2.0);
}

// Random orthogonal matrix: QR of a Gaussian matrix with the sign of each
// column fixed so the factorization is unique.
Eigen::MatrixXd random_orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = qr.matrixQR();
  for (int j = 0; j < n; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last)
    throw ConfigError("line " + std::to_string(line_no) +
                      ": cannot parse number '" + cell + "'");
  return v;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string manifest_path(const std::string& path) {
  return path + ".manifest.json";
}

void write_manifest(const std::string& path, int vocab_size) {
  json m;
  m["vocab_size"] = vocab_size;
  std::ofstream out(manifest_path(path));
  if (!out) throw ConfigError("cannot write manifest for " + path);
  out << m.dump() << "\n";
}

int read_manifest(const std::string& path) {
  std::ifstream in(manifest_path(path));
  if (!in)
    throw ConfigError("manifest not found: " + manifest_path(path) +
                      " (expected sidecar with vocab_size)");
  json m;
  try {
    in >> m;
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + manifest_path(path) + ": " +
                      e.what());
  }
  if (!m.contains("vocab_size") || !m["vocab_size"].is_number_integer())
    throw ConfigError("manifest " + manifest_path(path) +
                      " lacks integer vocab_size");
  const int k = m["vocab_size"].get<int>();
  if (k < 2)
    throw ConfigError("manifest vocab_size must be >= 2, got " +
                      std::to_string(k));
  return k;
}

LabelSet parse_label_list(const std::vector<int>& one_based,
                          std::size_t line_no, int vocab_size) {
  if (one_based.empty())
    throw ConfigError("line " + std::to_string(line_no) + ": empty label set");
  std::vector<int> zero_based;
  zero_based.reserve(one_based.size());
  for (int v : one_based) {
    if (v < 1 || v > vocab_size)
      throw ConfigError("line " + std::to_string(line_no) + ": label " +
                        std::to_string(v) + " out of range 1.." +
                        std::to_string(vocab_size));
    zero_based.push_back(v - 1);
  }
  try {
    return LabelSet(std::move(zero_based));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
  }
}

}  // namespace

void Dataset::validate() const {
  if (vocab_size < 2)
    throw std::invalid_argument("vocab_size must be >= 2, got " +
                                std::to_string(vocab_size));
  if (feature_dim < 1)
    throw std::invalid_argument("feature_dim must be >= 1, got " +
                                std::to_string(feature_dim));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (s.features.size() != feature_dim)
      throw std::invalid_argument(
          "sample " + std::to_string(i) + ": feature dimension " +
          std::to_string(s.features.size()) + " != " +
          std::to_string(feature_dim));
    if (s.labels.empty())
      throw std::invalid_argument("sample " + std::to_string(i) +
                                  ": empty label set");
    try {
      s.labels.check_range(vocab_size);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("sample " + std::to_string(i) + ": " +
                                  e.what());
    }
  }
}

LabelDistribution LabelDistribution::independent(std::vector<double> p) {
  if (p.size() < 2)
    throw std::invalid_argument("independent distribution needs >= 2 labels");
  for (std::size_t k = 0; k < p.size(); ++k)
    if (!(p[k] >= 0.0 && p[k] <= 1.0))
      throw std::invalid_argument("marginal p[" + std::to_string(k) +
                                  "] = " + std::to_string(p[k]) +
                                  " outside [0, 1]");
  LabelDistribution d;
  d.independent_ = true;
  d.vocab_size_ = static_cast<int>(p.size());
  d.p_ = std::move(p);
  return d;
}

LabelDistribution LabelDistribution::joint(int vocab_size,
                                           std::vector<double> probs) {
  if (vocab_size < 2)
    throw std::invalid_argument("joint distribution needs vocab_size >= 2");
  if (vocab_size > kMaxJointVocab)
    throw std::invalid_argument(
        "joint mode supports vocab_size <= " + std::to_string(kMaxJointVocab) +
        ", got " + std::to_string(vocab_size));
  const std::size_t want = std::size_t{1} << vocab_size;
  if (probs.size() != want)
    throw std::invalid_argument("joint table needs " + std::to_string(want) +
                                " entries, got " +
                                std::to_string(probs.size()));
  double total = 0.0;
  for (std::size_t m = 0; m < probs.size(); ++m) {
    if (!(probs[m] >= 0.0))
      throw std::invalid_argument("joint probability for mask " +
                                  std::to_string(m) + " is negative");
    total += probs[m];
  }
  if (!(total > 0.0))
    throw std::invalid_argument("joint table must have positive total mass");
  for (auto& v : probs) v /= total;
  LabelDistribution d;
  d.independent_ = false;
  d.vocab_size_ = vocab_size;
  d.probs_ = std::move(probs);
  return d;
}

const std::vector<double>& LabelDistribution::bernoulli_p() const {
  if (!independent_)
    throw std::logic_error("bernoulli_p() on a joint distribution");
  return p_;
}

const std::vector<double>& LabelDistribution::joint_probs() const {
  if (independent_)
    throw std::logic_error("joint_probs() on an independent distribution");
  return probs_;
}

std::vector<double> LabelDistribution::marginals() const {
  if (independent_) return p_;
  std::vector<double> m(vocab_size_, 0.0);
  for (std::size_t mask = 0; mask < probs_.size(); ++mask)
    for (int k = 0; k < vocab_size_; ++k)
      if (mask & (std::size_t{1} << k)) m[k] += probs_[mask];
  return m;
}

double LabelDistribution::empty_mass() const {
  if (!independent_) return probs_[0];
  double q = 1.0;
  for (double pk : p_) q *= (1.0 - pk);
  return q;
}

LabelSet LabelDistribution::sample(Rng& rng) const {
  if (independent_) {
    std::vector<int> members;
    for (int k = 0; k < vocab_size_; ++k)
      if (rng.uniform() < p_[k]) members.push_back(k);
    return LabelSet(std::move(members));
  }
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t mask = 0; mask < probs_.size(); ++mask) {
    acc += probs_[mask];
    if (u < acc)
      return LabelSet::from_mask(static_cast<std::uint32_t>(mask),
                                 vocab_size_);
  }
  // u landed in the rounding slack past the last positive entry.
  for (std::size_t mask = probs_.size(); mask-- > 0;)
    if (probs_[mask] > 0.0)
      return LabelSet::from_mask(static_cast<std::uint32_t>(mask),
                                 vocab_size_);
  throw NumericalError("joint table has no positive mass");
}

LabelSet LabelDistribution::sample_nonempty(Rng& rng) const {
  for (int attempt = 0; attempt < kMaxRedraws; ++attempt) {
    LabelSet y = sample(rng);
    if (!y.empty()) return y;
  }
  throw NumericalError(
      "label distribution has (near-)zero mass on nonempty sets");
}

Dataset generate_synthetic(const LabelDistribution& dist, int n_samples,
                           FeatureMode mode, double noise_sigma,
                           std::uint64_t seed) {
  if (n_samples < 1)
    throw std::invalid_argument("n_samples must be >= 1, got " +
                                std::to_string(n_samples));
  if (noise_sigma < 0.0)
    throw std::invalid_argument("noise_sigma must be >= 0");

  const int k = dist.vocab_size();
  Rng root(seed);
  Rng label_rng = root.spawn(1);
  Rng feature_rng = root.spawn(2);

  Dataset ds;
  ds.vocab_size = k;
  ds.feature_dim = k;
  ds.samples.reserve(static_cast<std::size_t>(n_samples));

  if (mode == FeatureMode::kCluster) {
    for (int i = 0; i < n_samples; ++i) {
      LabelSet y = dist.sample_nonempty(label_rng);
      Eigen::VectorXd x = Eigen::VectorXd::Zero(k);
      for (int label : y.members()) x[label] += kClusterScale;
      if (noise_sigma > 0.0)
        for (int j = 0; j < k; ++j) x[j] += noise_sigma * feature_rng.normal();
      ds.samples.push_back({std::move(x), std::move(y)});
    }
    return ds;
  }

  // kLinearLogits: labels must be recoverable by a linear map of the
  // features, which is only well-defined for per-label Bernoulli rates.
  if (!dist.is_independent())
    throw std::invalid_argument(
        "linear-logits feature mode requires an independent distribution");
  const auto& p = dist.bernoulli_p();
  std::vector<double> cut(p.size());
  for (std::size_t j = 0; j < p.size(); ++j)
    cut[j] = inverse_normal_cdf(1.0 - p[j]);

  Rng map_rng = root.spawn(3);
  const Eigen::MatrixXd rot = random_orthogonal(k, map_rng);

  for (int i = 0; i < n_samples; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= kMaxRedraws)
        throw NumericalError(
            "label distribution has (near-)zero mass on nonempty sets");
      Eigen::VectorXd x(k);
      for (int j = 0; j < k; ++j) x[j] = feature_rng.normal();
      const Eigen::VectorXd z = rot * x;
      std::vector<int> members;
      for (int j = 0; j < k; ++j) {
        const bool on =
            noise_sigma == 0.0
                ? z[j] > cut[j]
                : label_rng.uniform() < sigmoid((z[j] - cut[j]) / noise_sigma);
        if (on) members.push_back(j);
      }
      if (!members.empty()) {
        ds.samples.push_back({std::move(x), LabelSet(std::move(members))});
        break;
      }
    }
  }
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& ds, double holdout_fraction,
                                  std::uint64_t seed) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
    throw std::invalid_argument("holdout_fraction must be in (0, 1)");
  const auto n = ds.samples.size();
  const auto h = static_cast<std::size_t>(
      std::lround(static_cast<double>(n) * holdout_fraction));
  if (h == 0 || h == n)
    throw std::invalid_argument(
        "split would leave an empty part (n = " + std::to_string(n) +
        ", holdout_fraction = " + std::to_string(holdout_fraction) + ")");

  Rng rng(seed);
  auto perm = rng.permutation(n);
  std::vector<std::size_t> hold(perm.begin(), perm.begin() + h);
  std::vector<std::size_t> train(perm.begin() + h, perm.end());
  std::sort(hold.begin(), hold.end());
  std::sort(train.begin(), train.end());

  Dataset a, b;
  a.feature_dim = b.feature_dim = ds.feature_dim;
  a.vocab_size = b.vocab_size = ds.vocab_size;
  a.samples.reserve(train.size());
  b.samples.reserve(hold.size());
  for (auto i : train) a.samples.push_back(ds.samples[i]);
  for (auto i : hold) b.samples.push_back(ds.samples[i]);
  return {std::move(a), std::move(b)};
}

Dataset apply_label_noise(const Dataset& ds, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0))
    throw std::invalid_argument("noise rate must be in [0, 1]");
  Rng rng(seed);
  Dataset out = ds;
  const int k = ds.vocab_size;
  for (auto& s : out.samples) {
    if (rng.uniform() >= rate) continue;
    const int pick = static_cast<int>(rng.uniform_int(0, k - 1));
    std::vector<int> members = s.labels.members();
    if (s.labels.contains(pick)) {
      if (members.size() >= 2) {
        members.erase(std::find(members.begin(), members.end(), pick));
      } else {
        // Sole positive: removing it would empty the set, so add a random
        // absent label instead.
        auto absent = s.labels.absent(k);
        members.push_back(
            absent[static_cast<std::size_t>(rng.uniform_int(
                0, static_cast<std::int64_t>(absent.size()) - 1))]);
      }
    } else {
      if (static_cast<int>(members.size()) == k - 1) {
        // Adding would cover the whole vocabulary; drop a random positive
        // to keep the set a proper subset.
        const auto drop = static_cast<std::size_t>(rng.uniform_int(
            0, static_cast<std::int64_t>(members.size()) - 1));
        members.erase(members.begin() + static_cast<std::ptrdiff_t>(drop));
      } else {
        members.push_back(pick);
      }
    }
    s.labels = LabelSet(std::move(members));
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::string& path,
                   FileFormat format) {
  ds.validate();
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);

  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");

  if (format == FileFormat::kCsv) {
    for (int j = 0; j < ds.feature_dim; ++j) out << "f" << (j + 1) << ",";
    out << "labels\n";
    for (const auto& s : ds.samples) {
      for (int j = 0; j < ds.feature_dim; ++j)
        out << format_number(s.features[j]) << ",";
      const auto& m = s.labels.members();
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) out << "|";
        out << (m[i] + 1);
      }
      out << "\n";
    }
  } else {
    for (const auto& s : ds.samples) {
      json row;
      row["features"] = json::array();
      for (int j = 0; j < ds.feature_dim; ++j)
        row["features"].push_back(s.features[j]);
      row["labels"] = json::array();
      for (int label : s.labels.members()) row["labels"].push_back(label + 1);
      out << row.dump() << "\n";
    }
  }
  out.close();
  write_manifest(path, ds.vocab_size);
}

namespace {

Dataset load_csv(const std::string& path, int vocab_size) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_on(line, ',');
  if (header.size() < 2 || header.back() != "labels")
    throw ConfigError(path + ": header must be f1,...,fd,labels");
  const auto dim = header.size() - 1;

  Dataset ds;
  ds.feature_dim = static_cast<int>(dim);
  ds.vocab_size = vocab_size;

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_on(line, ',');
    if (cells.size() != dim + 1)
      throw ConfigError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(dim + 1) + " fields, got " +
                        std::to_string(cells.size()));
    Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < dim; ++j)
      x[static_cast<Eigen::Index>(j)] = parse_number(cells[j], line_no);
    std::vector<int> labels;
    for (const auto& cell : split_on(cells[dim], '|')) {
      if (cell.empty())
        throw ConfigError("line " + std::to_string(line_no) +
                          ": empty label set");
      labels.push_back(
          static_cast<int>(parse_number(cell, line_no)));
    }
    ds.samples.push_back(
        {std::move(x), parse_label_list(labels, line_no, vocab_size)});
  }
  return ds;
}

Dataset load_jsonl(const std::string& path, int vocab_size) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);

  Dataset ds;
  ds.vocab_size = vocab_size;
  ds.feature_dim = -1;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!row.is_object() || !row.contains("features") ||
        !row.contains("labels") || !row["features"].is_array() ||
        !row["labels"].is_array())
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected object with features[] and labels[]");
    Eigen::VectorXd x(static_cast<Eigen::Index>(row["features"].size()));
    for (std::size_t j = 0; j < row["features"].size(); ++j) {
      const auto& v = row["features"][j];
      if (!v.is_number())
        throw ConfigError("line " + std::to_string(line_no) +
                          ": feature is not a number");
      x[static_cast<Eigen::Index>(j)] = v.get<double>();
    }
    std::vector<int> labels;
    for (const auto& v : row["labels"]) {
      if (!v.is_number_integer())
        throw ConfigError("line " + std::to_string(line_no) +
                          ": label is not an integer");
      labels.push_back(v.get<int>());
    }
    if (ds.feature_dim < 0) ds.feature_dim = static_cast<int>(x.size());
    if (x.size() != ds.feature_dim)
      throw ConfigError("line " + std::to_string(line_no) +
                        ": feature dimension " + std::to_string(x.size()) +
                        " != " + std::to_string(ds.feature_dim));
    ds.samples.push_back(
        {std::move(x), parse_label_list(labels, line_no, vocab_size)});
  }
  if (ds.samples.empty()) throw ConfigError(path + ": no samples");
  return ds;
}

}  // namespace

Dataset load_dataset(const std::string& path, FileFormat format) {
  const int vocab_size = read_manifest(path);
  Dataset ds = format == FileFormat::kCsv ? load_csv(path, vocab_size)
                                          : load_jsonl(path, vocab_size);
  try {
    ds.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return ds;
}

}  // namespace mlrank
