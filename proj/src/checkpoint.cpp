#include "soel/checkpoint.hpp"

#include <openssl/sha.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "soel/error.hpp"

namespace soel::snn {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "soelsim-checkpoint";

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::SumPool: return "sum_pool";
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
  }
  return "?";
}

LayerKind kind_from(const std::string& s) {
  if (s == "sum_pool") return LayerKind::SumPool;
  if (s == "conv") return LayerKind::Conv;
  if (s == "dense") return LayerKind::Dense;
  throw Error(Errc::CorruptCheckpoint, "unknown layer kind '" + s + "'");
}

json shape_json(const Shape3& s) { return json::array({s.channels, s.height, s.width}); }

Shape3 shape_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>()}; }

}  // namespace

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, SHA256_DIGEST_LENGTH> digest{};
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest.data());
  std::string hex;
  hex.reserve(digest.size() * 2);
  char buf[3];
  for (unsigned char b : digest) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    hex += buf;
  }
  return hex;
}

json to_json(const NeuronParams& p) {
  return {{"u_threshold", p.u_threshold},
          {"current_decay", p.current_decay},
          {"voltage_decay", p.voltage_decay},
          {"refractory_decay", p.refractory_decay},
          {"bias", p.bias},
          {"reset", p.reset == ResetMode::HardReset ? "hard" : "soft_subtract"}};
}

NeuronParams neuron_params_from_json(const json& j, const NeuronParams& defaults) {
  NeuronParams p = defaults;
  p.u_threshold = j.value("u_threshold", p.u_threshold);
  p.current_decay = j.value("current_decay", p.current_decay);
  p.voltage_decay = j.value("voltage_decay", p.voltage_decay);
  p.refractory_decay = j.value("refractory_decay", p.refractory_decay);
  p.bias = j.value("bias", p.bias);
  const std::string reset = j.value("reset", std::string(p.reset == ResetMode::HardReset ? "hard" : "soft_subtract"));
  if (reset == "hard") {
    p.reset = ResetMode::HardReset;
  } else if (reset == "soft_subtract") {
    p.reset = ResetMode::SoftSubtract;
  } else {
    throw Error(Errc::InvalidConfig, "reset must be 'hard' or 'soft_subtract'");
  }
  return p;
}

json to_json(const NetworkSpec& net) {
  json layers = json::array();
  for (const LayerSpec& l : net.layers) {
    layers.push_back({{"kind", kind_name(l.kind)},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"zero_padding", l.zero_padding},
                      {"pool_gain", l.pool_gain},
                      {"in", shape_json(l.in)},
                      {"out", shape_json(l.out)},
                      {"params", to_json(l.params)},
                      {"plastic", l.plastic},
                      {"weights", l.weights.values}});
  }
  return {{"input", shape_json(net.input)}, {"layers", std::move(layers)}};
}

NetworkSpec network_from_json(const json& j) {
  NetworkSpec net;
  net.input = shape_from(j.at("input"));
  for (const json& lj : j.at("layers")) {
    LayerSpec l;
    l.kind = kind_from(lj.at("kind").get<std::string>());
    l.kernel = lj.at("kernel").get<int>();
    l.stride = lj.at("stride").get<int>();
    l.zero_padding = lj.at("zero_padding").get<bool>();
    l.pool_gain = lj.at("pool_gain").get<int>();
    l.in = shape_from(lj.at("in"));
    l.out = shape_from(lj.at("out"));
    l.params = neuron_params_from_json(lj.at("params"));
    l.plastic = lj.at("plastic").get<bool>();
    l.weights.values = lj.at("weights").get<std::vector<std::int16_t>>();
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

std::string serialize_checkpoint(const Checkpoint& checkpoint) {
  checkpoint.network.validate();
  json payload{{"network", to_json(checkpoint.network)},
               {"shadow", checkpoint.shadow},
               {"metadata", checkpoint.metadata}};
  const std::string body = payload.dump();
  json doc{{"format", kFormat}, {"version", Checkpoint::kVersion}, {"payload", std::move(payload)},
           {"sha256", sha256_hex(body)}};
  return doc.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != kFormat) throw Error(Errc::CorruptCheckpoint, "wrong format tag");
    const int version = doc.at("version").get<int>();
    if (version != Checkpoint::kVersion) {
      throw Error(Errc::CorruptCheckpoint, "unsupported checkpoint version " + std::to_string(version));
    }
    const json& payload = doc.at("payload");
    if (sha256_hex(payload.dump()) != doc.at("sha256").get<std::string>()) {
      throw Error(Errc::CorruptCheckpoint, "content hash mismatch");
    }
    Checkpoint c;
    c.network = network_from_json(payload.at("network"));
    c.shadow = payload.at("shadow").get<std::vector<std::vector<double>>>();
    c.metadata = payload.at("metadata");
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptCheckpoint, e.what());
  }
}

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  const std::string text = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path);
  out << text;
  if (!out) throw Error(Errc::Io, "short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open checkpoint " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(text);
}

}  // namespace soel::snn
