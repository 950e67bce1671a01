#include "soel/neuron.hpp"

#include <algorithm>
#include <string>

#include "soel/error.hpp"

namespace soel::snn {

namespace {

void check_decay(int decay) {
  if (decay < 0 || decay > kDecayScale) {
    throw Error(Errc::DecayOutOfRange, "decay " + std::to_string(decay) + " not in [0, 4096]");
  }
}

std::int32_t fit(std::int64_t v, OverflowMode mode, const char* what) {
  if (v > kStateMax || v < kStateMin) {
    if (mode == OverflowMode::Strict) throw Error(Errc::Overflow, std::string(what) + " register overflow");
    return static_cast<std::int32_t>(std::clamp<std::int64_t>(v, kStateMin, kStateMax));
  }
  return static_cast<std::int32_t>(v);
}

}  // namespace

void NeuronParams::validate() const {
  check_decay(current_decay);
  check_decay(voltage_decay);
  check_decay(refractory_decay);
  if (u_threshold <= 0) throw Error(Errc::InvalidNetwork, "threshold must be positive");
}

DecayFactor decay_factor(int decay) {
  check_decay(decay);
  return {kDecayScale - decay};
}

std::int32_t apply_decay(std::int32_t state, int decay) {
  check_decay(decay);
  const std::int64_t scaled = static_cast<std::int64_t>(state) * (kDecayScale - decay);
  // Integer division truncates toward zero for both signs.
  return static_cast<std::int32_t>(scaled / kDecayScale);
}

StepResult step_neuron(const NeuronState& state, const NeuronParams& params, std::int64_t weighted_input,
                       OverflowMode overflow) {
  StepResult r;
  r.state.current = fit(static_cast<std::int64_t>(apply_decay(state.current, params.current_decay)) + weighted_input,
                        overflow, "current");
  std::int64_t u = static_cast<std::int64_t>(apply_decay(state.voltage, params.voltage_decay)) + r.state.current +
                   params.bias;
  u = fit(u, overflow, "voltage");
  r.membrane = static_cast<std::int32_t>(u);
  r.spike = u >= params.u_threshold;
  if (params.reset == ResetMode::HardReset) {
    if (r.spike) u = 0;
  } else {
    const std::int64_t refr = static_cast<std::int64_t>(apply_decay(state.refractory, params.refractory_decay)) +
                              (r.spike ? kRefractoryOne : 0);
    r.state.refractory = fit(refr, overflow, "refractory");
    u -= static_cast<std::int64_t>(params.u_threshold) * r.state.refractory / kRefractoryOne;
    u = fit(u, overflow, "voltage");
  }
  r.state.voltage = static_cast<std::int32_t>(u);
  return r;
}

}  // namespace soel::snn
