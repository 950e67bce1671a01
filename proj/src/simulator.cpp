#include "soel/simulator.hpp"

#include <algorithm>
#include <numeric>

#include "soel/error.hpp"

namespace soel::snn {

void Raster::push_step(std::span<const std::int32_t> activity) {
  if (width == 0) width = activity.size();
  for (std::size_t j = 0; j < activity.size(); ++j) {
    if (activity[j] != 0) {
      index.push_back(static_cast<std::uint32_t>(j));
      value.push_back(activity[j]);
    }
  }
  offset.push_back(static_cast<std::uint32_t>(index.size()));
}

void Raster::expand(std::size_t step, std::span<std::int32_t> out) const {
  std::fill(out.begin(), out.end(), 0);
  for (std::uint32_t p = offset[step]; p < offset[step + 1]; ++p) out[index[p]] = value[p];
}

std::int64_t Raster::total() const { return std::accumulate(value.begin(), value.end(), std::int64_t{0}); }

Simulator::Simulator(const NetworkSpec& net, SimOptions options) : net_(&net), options_(options) {
  net.validate();
  input_.assign(net.input.size(), 0);
  for (const LayerSpec& l : net.layers) {
    drive_.emplace_back(l.out.size(), 0);
    activity_.emplace_back(l.out.size(), 0);
    states_.emplace_back(l.has_neurons() ? l.out.size() : 0);
    membrane_.emplace_back(l.has_neurons() ? l.out.size() : 0, 0);
  }
}

void Simulator::reset() {
  std::fill(input_.begin(), input_.end(), 0);
  for (std::size_t i = 0; i < net_->layers.size(); ++i) {
    std::fill(drive_[i].begin(), drive_[i].end(), 0);
    std::fill(activity_[i].begin(), activity_[i].end(), 0);
    std::fill(states_[i].begin(), states_[i].end(), NeuronState{});
    std::fill(membrane_[i].begin(), membrane_[i].end(), 0);
  }
}

void Simulator::step(std::span<const std::uint8_t> frame) {
  if (frame.size() != input_.size()) {
    throw Error(Errc::ShapeMismatch, "frame has " + std::to_string(frame.size()) + " cells, network expects " +
                                         std::to_string(input_.size()));
  }
  std::copy(frame.begin(), frame.end(), input_.begin());
  std::span<const std::int32_t> in = input_;
  for (std::size_t i = 0; i < net_->layers.size(); ++i) {
    const LayerSpec& l = net_->layers[i];
    const std::span<const std::int16_t> w = l.weights.values;
    if (l.kind == LayerKind::SumPool) {
      kernels::accumulate<std::int16_t, std::int32_t>(options_.backend, l, w, in, activity_[i]);
      std::copy(activity_[i].begin(), activity_[i].end(), drive_[i].begin());
    } else {
      kernels::accumulate<std::int16_t, std::int32_t>(options_.backend, l, w, in, drive_[i]);
      kernels::step_neurons(options_.backend, states_[i], l.params, drive_[i], activity_[i], membrane_[i],
                             options_.overflow);
    }
    in = activity_[i];
  }
}

namespace {

void check_input(const NetworkSpec& net, const events::SpikeFrameSequence& input) {
  const Shape3 in{events::SpikeFrameSequence::kChannels, input.height, input.width};
  if (!(in == net.input)) {
    throw Error(Errc::ShapeMismatch, "input " + in.str() + " does not match network input " + net.input.str());
  }
}

}  // namespace

RunRecord run_network(const NetworkSpec& net, const events::SpikeFrameSequence& input, RecordMode record,
                      SimOptions options) {
  check_input(net, input);
  Simulator sim(net, options);
  RunRecord rec;
  rec.n_steps = input.n_steps;
  rec.output_counts.assign(net.output_size(), 0);
  const std::size_t n_layers = net.layers.size();
  if (record == RecordMode::AllSpikes) {
    rec.layers.resize(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) rec.layers[i].width = net.layers[i].out.size();
    rec.features.width = net.layers.back().in.size();
  }
  for (std::size_t k = 0; k < input.n_steps; ++k) {
    sim.step(input.frame(k));
    const auto out = sim.activity(n_layers - 1);
    for (std::size_t j = 0; j < out.size(); ++j) rec.output_counts[j] += out[j];
    if (record == RecordMode::AllSpikes) {
      for (std::size_t i = 0; i < n_layers; ++i) rec.layers[i].push_step(sim.activity(i));
      rec.features.push_step(n_layers >= 2 ? sim.activity(n_layers - 2) : sim.input());
    }
  }
  return rec;
}

Raster extract_features(const NetworkSpec& net, const events::SpikeFrameSequence& input, SimOptions options) {
  check_input(net, input);
  Simulator sim(net, options);
  Raster raster;
  raster.width = net.layers.back().in.size();
  const std::size_t n_layers = net.layers.size();
  for (std::size_t k = 0; k < input.n_steps; ++k) {
    sim.step(input.frame(k));
    raster.push_step(n_layers >= 2 ? sim.activity(n_layers - 2) : sim.input());
  }
  return raster;
}

}  // namespace soel::snn
