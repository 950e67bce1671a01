#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "soel/neuron.hpp"

namespace soel::snn {

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::string str() const;

  friend bool operator==(const Shape3&, const Shape3&) = default;
};

/// Deployable weights: even integers in [-256, 254].
struct QuantizedWeights {
  static constexpr std::int16_t kMin = -256;
  static constexpr std::int16_t kMax = 254;
  static constexpr std::int16_t kStep = 2;

  std::vector<std::int16_t> values;

  static bool on_grid(std::int32_t w) { return w >= kMin && w <= kMax && w % kStep == 0; }
  bool valid() const;

  friend bool operator==(const QuantizedWeights&, const QuantizedWeights&) = default;
};

/// clamp(round_half_even(w / 2) * 2, -256, 254) for each element.
std::int16_t quantize_weight(double shadow);
QuantizedWeights quantize_weights(std::span<const double> shadow);

enum class LayerKind { SumPool, Conv, Dense };

/// One layer. Conv weights are laid out [out_c][in_c][ky][kx], dense
/// weights [out][in] with the input flattened as [c][y][x]. Pool layers
/// have no neurons: they pass pool_gain times the window sum downstream.
struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int kernel = 1;
  int stride = 1;
  bool zero_padding = false;
  int pool_gain = 1;
  Shape3 in;
  Shape3 out;
  NeuronParams params;
  QuantizedWeights weights;
  bool plastic = false;

  bool has_neurons() const { return kind != LayerKind::SumPool; }
  int padding() const { return kind == LayerKind::Conv && zero_padding ? kernel / 2 : 0; }
  std::size_t weight_count() const;
  /// Table-style notation: "4a", "16c5z", "512".
  std::string notation() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  Shape3 input;
  std::vector<LayerSpec> layers;

  /// Shapes compose, weights are sized and on grid, the last layer is
  /// dense and at most one layer is plastic. Throws Errc::InvalidNetwork.
  void validate() const;
  const Shape3& output_shape() const { return layers.back().out; }
  std::size_t output_size() const { return output_shape().size(); }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Builds a network from layer tokens: "Ya" (YxY sum pool), "XcY" / "XcYz"
/// (X filters of YxY, optionally zero padded), "X" (dense of X units) and
/// "N" (dense of n_outputs units). Weights start at zero.
NetworkSpec build_network(const Shape3& input, std::span<const std::string> tokens, const NeuronParams& params,
                          int n_outputs);

/// 128x128x2 -> 4a -> 16c5z -> 2a -> 32c3z -> 2a -> 512 -> N.
NetworkSpec table1_network(int n_classes, const NeuronParams& params = {});

}  // namespace soel::snn
