#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "soel/network.hpp"

namespace soel::snn {

/// Versioned network container. Written as JSON:
///   {"format": "soelsim-checkpoint", "version": 1,
///    "payload": {"network": ..., "shadow": [...], "metadata": {...}},
///    "sha256": hex digest of the compact payload dump}
/// Loading verifies the format tag, version and digest.
struct Checkpoint {
  static constexpr int kVersion = 1;

  NetworkSpec network;
  /// Full-precision training weights per layer (empty vectors for pool
  /// layers, or no entries at all when absent).
  std::vector<std::vector<double>> shadow;
  nlohmann::json metadata = nlohmann::json::object();

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view text);

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json to_json(const NeuronParams& params);
NeuronParams neuron_params_from_json(const nlohmann::json& j, const NeuronParams& defaults = {});
nlohmann::json to_json(const NetworkSpec& net);
NetworkSpec network_from_json(const nlohmann::json& j);

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace soel::snn
