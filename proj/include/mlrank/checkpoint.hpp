#pragma once

#include <json.hpp>
#include <string>

#include "mlrank/net.hpp"

namespace mlrank {

/// Layer-by-layer JSON encoding of network parameters:
/// [{"rows": R, "cols": C, "weights": [R*C row-major], "bias": [R]}, ...].
/// Doubles are emitted in shortest round-trip form, so save/load is exact.
nlohmann::json net_to_json(const FeedForward& net);
FeedForward net_from_json(const nlohmann::json& layers);  // validates shapes

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const nlohmann::json& j, const std::string& path);

}  // namespace mlrank
