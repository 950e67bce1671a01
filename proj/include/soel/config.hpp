#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "soel/network.hpp"
#include "soel/plasticity.hpp"
#include "soel/precision.hpp"
#include "soel/pretrain.hpp"
#include "soel/synth.hpp"

namespace soel::app {

struct DataConfig {
  std::size_t classes = 11;
  std::size_t samples_per_class = 20;
  events::SynthOptions synth;
  /// Dataset directory holding manifest.csv (input of pretrain and fewshot).
  std::string dir;
};

struct NetworkConfig {
  int input_size = 32;
  std::vector<std::string> layers{"8c5z", "4a", "N"};
  snn::NeuronParams neuron;
};

struct FewshotConfig {
  std::size_t n_pretrain = 4;
  std::size_t n_novel = 3;
  std::vector<int> shots{1, 5};
  int folds = 5;
  std::uint64_t window_ms = 1400;
  std::string checkpoint;
};

/// Everything a command needs. Every field has a default; a config file
/// only lists what it changes. Randomness derives from `seed` alone.
struct RunConfig {
  std::uint64_t seed = 1;
  Precision precision = Precision::Hardware;
  DataConfig data;
  NetworkConfig network;
  pretrain::TrainerConfig pretrain;
  plasticity::SoelConfig soel;
  FewshotConfig fewshot;

  /// Copies seed and precision into the module configs and validates them.
  /// Throws Errc::InvalidConfig.
  void resolve();
};

/// Unknown keys and wrongly typed values throw Errc::InvalidConfig.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

}  // namespace soel::app
