#include "mlrank/checkpoint.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mlrank/errors.hpp"

namespace mlrank {

using nlohmann::json;

json net_to_json(const FeedForward& net) {
  json layers = json::array();
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    const auto& w = net.weights[i];
    const auto& b = net.biases[i];
    json layer;
    layer["rows"] = w.rows();
    layer["cols"] = w.cols();
    auto wj = json::array();
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) wj.push_back(w(r, c));
    layer["weights"] = std::move(wj);
    auto bj = json::array();
    for (Eigen::Index r = 0; r < b.size(); ++r) bj.push_back(b[r]);
    layer["bias"] = std::move(bj);
    layers.push_back(std::move(layer));
  }
  return layers;
}

FeedForward net_from_json(const json& layers) {
  if (!layers.is_array() || layers.empty())
    throw ConfigError("checkpoint: layers must be a nonempty array");
  FeedForward net;
  for (const auto& layer : layers) {
    if (!layer.contains("rows") || !layer.contains("cols") ||
        !layer.contains("weights") || !layer.contains("bias"))
      throw ConfigError("checkpoint: layer needs rows/cols/weights/bias");
    const auto rows = layer["rows"].get<Eigen::Index>();
    const auto cols = layer["cols"].get<Eigen::Index>();
    if (rows < 1 || cols < 1)
      throw ConfigError("checkpoint: layer shape must be positive");
    const auto& wj = layer["weights"];
    const auto& bj = layer["bias"];
    if (!wj.is_array() ||
        wj.size() != static_cast<std::size_t>(rows * cols))
      throw ConfigError("checkpoint: weights size != rows*cols");
    if (!bj.is_array() || bj.size() != static_cast<std::size_t>(rows))
      throw ConfigError("checkpoint: bias size != rows");
    Eigen::MatrixXd w(rows, cols);
    std::size_t idx = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        const double v = wj[idx++].get<double>();
        if (!std::isfinite(v))
          throw ConfigError("checkpoint: non-finite weight");
        w(r, c) = v;
      }
    Eigen::VectorXd b(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const double v = bj[static_cast<std::size_t>(r)].get<double>();
      if (!std::isfinite(v)) throw ConfigError("checkpoint: non-finite bias");
      b[r] = v;
    }
    if (!net.weights.empty() && net.weights.back().rows() != cols)
      throw ConfigError("checkpoint: layer input dim does not chain");
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  return net;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return j;
}

void write_json_file(const json& j, const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
}

}  // namespace mlrank
