#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "soel/events.hpp"
#include "soel/kernels.hpp"
#include "soel/network.hpp"

namespace soel::snn {

struct SimOptions {
  OverflowMode overflow = OverflowMode::Strict;
  kernels::Backend backend = kernels::Backend::OpenMP;
};

/// Sparse activity of one layer over time: for step k the active units are
/// index[offset[k] .. offset[k+1]) with their values (1 for spikes, window
/// sums for pool layers).
struct Raster {
  std::size_t width = 0;
  std::vector<std::uint32_t> offset{0};
  std::vector<std::uint32_t> index;
  std::vector<std::int32_t> value;

  std::size_t n_steps() const { return offset.size() - 1; }
  void push_step(std::span<const std::int32_t> activity);
  /// Dense copy of step k.
  void expand(std::size_t step, std::span<std::int32_t> out) const;
  std::int64_t total() const;

  friend bool operator==(const Raster&, const Raster&) = default;
};

/// Steps a fixed-point network one timestep at a time. Pool layers forward
/// window sums; conv and dense layers step their neurons on the weighted
/// input and forward spikes.
class Simulator {
 public:
  Simulator(const NetworkSpec& net, SimOptions options = {});

  void reset();
  void step(std::span<const std::uint8_t> frame);

  const NetworkSpec& network() const { return *net_; }
  std::span<const std::int32_t> activity(std::size_t layer) const { return activity_[layer]; }
  std::span<const std::int32_t> weighted_input(std::size_t layer) const { return drive_[layer]; }
  std::span<const NeuronState> states(std::size_t layer) const { return states_[layer]; }
  /// Pre-reset membrane voltage of the last step (neuron layers only).
  std::span<const std::int32_t> membrane(std::size_t layer) const { return membrane_[layer]; }
  std::span<const std::int32_t> input() const { return input_; }

 private:
  const NetworkSpec* net_;
  SimOptions options_;
  std::vector<std::int32_t> input_;
  std::vector<std::vector<std::int32_t>> drive_;
  std::vector<std::vector<std::int32_t>> activity_;
  std::vector<std::vector<NeuronState>> states_;
  std::vector<std::vector<std::int32_t>> membrane_;
};

enum class RecordMode { OutputCounts, AllSpikes };

struct RunRecord {
  std::size_t n_steps = 0;
  std::vector<std::int64_t> output_counts;
  /// Per-layer activity (AllSpikes only).
  std::vector<Raster> layers;
  /// Activity feeding the final layer, i.e. the presynaptic side of the
  /// plastic layer (AllSpikes only).
  Raster features;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

/// Resets all state to zero and runs the whole sequence.
RunRecord run_network(const NetworkSpec& net, const events::SpikeFrameSequence& input, RecordMode record,
                      SimOptions options = {});

/// Activity entering the final layer for every step, computed without the
/// final layer. Equivalent to run_network(...).features.
Raster extract_features(const NetworkSpec& net, const events::SpikeFrameSequence& input, SimOptions options = {});

}  // namespace soel::snn
