#pragma once

#include <cstdint>

namespace soel::snn {

/// Decay constants are integers on a 4096 scale; the per-step factor is
/// (4096 - decay) / 4096.
inline constexpr int kDecayScale = 4096;

/// Membrane and current registers are 24-bit signed.
inline constexpr std::int32_t kStateMax = (1 << 23) - 1;
inline constexpr std::int32_t kStateMin = -(1 << 23);

/// The refractory register counts spikes in units of 1/4096.
inline constexpr std::int32_t kRefractoryOne = 4096;

enum class ResetMode { HardReset, SoftSubtract };

/// Strict raises Errc::Overflow when a register leaves 24 bits, Saturate
/// clamps it.
enum class OverflowMode { Strict, Saturate };

struct NeuronParams {
  std::int32_t u_threshold = 80 * 64;
  int current_decay = 1024;
  int voltage_decay = 128;
  int refractory_decay = kDecayScale;  // SoftSubtract only
  std::int32_t bias = 0;
  ResetMode reset = ResetMode::HardReset;

  void validate() const;

  friend bool operator==(const NeuronParams&, const NeuronParams&) = default;
};

struct NeuronState {
  std::int32_t current = 0;
  std::int32_t voltage = 0;
  std::int32_t refractory = 0;

  friend bool operator==(const NeuronState&, const NeuronState&) = default;
};

/// Per-step multiplicative factor (4096 - decay) / 4096 as an exact ratio.
struct DecayFactor {
  int numerator;
  static constexpr int denominator = kDecayScale;
  double value() const { return static_cast<double>(numerator) / denominator; }
};

DecayFactor decay_factor(int decay);

/// state * (4096 - decay) / 4096, truncated toward zero so positive and
/// negative states leak symmetrically.
std::int32_t apply_decay(std::int32_t state, int decay);

struct StepResult {
  NeuronState state;
  bool spike = false;
  std::int32_t membrane = 0;  // U' before any reset or subtraction
};

/// One discrete CUBA LIF step:
///   I' = decay(I) + input
///   U' = decay(U) + I' + bias
///   spike = U' >= threshold
/// HardReset zeroes U' on a spike. SoftSubtract keeps a decaying spike
/// register R' = decay(R) + spike and subtracts threshold * R' from U'.
StepResult step_neuron(const NeuronState& state, const NeuronParams& params, std::int64_t weighted_input,
                       OverflowMode overflow = OverflowMode::Strict);

}  // namespace soel::snn
