#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "soel/events.hpp"
#include "soel/network.hpp"
#include "soel/optimizer.hpp"
#include "soel/precision.hpp"
#include "soel/rng.hpp"

namespace soel::pretrain {

/// Boxcar stand-in for the spike derivative.
struct SurrogateConfig {
  double half_width = 2560.0;
  double scale = 1.0 / 5120.0;
};

/// scale if |u - u_threshold| <= half_width, else 0.
double surrogate_derivative(double u, const SurrogateConfig& cfg, double u_threshold);

struct CountLoss {
  double loss = 0.0;
  /// dL/dS_i for every timestep (the count error spread uniformly).
  std::vector<double> grad_per_step;
};

/// L = sum_i (target_i - count_i)^2 with target_true for the label and
/// target_false elsewhere. Throws Errc::LabelOutOfRange.
CountLoss spike_count_loss(std::span<const double> counts, std::size_t label, double target_true,
                           double target_false);

/// Spike nonlinearity of the full-precision forward pass. Ramp is the
/// integral of the boxcar surrogate, scale * clamp(U - theta + hw, 0, 2 hw),
/// and disables the reset; with it the backward pass is the exact gradient
/// of the forward pass, which is what the finite-difference check needs.
enum class SpikeFunction { Step, Ramp };

struct TrainerConfig {
  OptimizerConfig optimizer;
  int epochs = 10;
  int batch_size = 4;
  /// Credit from a loss at step t reaches inputs back to step t - truncation + 1.
  int truncation = 64;
  double target_true_per_100 = 30.0;
  double target_false_per_100 = 5.0;
  SurrogateConfig surrogate;
  Precision precision = Precision::Hardware;
  SpikeFunction spike_function = SpikeFunction::Step;
  bool augment = true;
  /// Jitter limits and the presentation window (also used without augmentation).
  events::AugmentLimits augment_limits;
  double init_gain = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Full-precision weights per layer, shaped like LayerSpec::weights
/// (empty for pool layers).
using ShadowWeights = std::vector<std::vector<double>>;

ShadowWeights init_shadow(const snn::NetworkSpec& net, double gain, Rng& rng);

/// `net` with every weighted layer replaced by quantize_weights(shadow).
snn::NetworkSpec deploy(const snn::NetworkSpec& net, const ShadowWeights& shadow);

struct TrainHooks {
  /// Called with the exact network used for every hardware-precision forward pass.
  std::function<void(const snn::NetworkSpec&)> on_forward;
};

struct LabeledFrames {
  const events::SpikeFrameSequence* frames = nullptr;
  std::size_t label = 0;
};

struct BatchGradients {
  ShadowWeights grad;  // mean over the batch
  double loss = 0.0;   // mean over the batch
  std::size_t correct = 0;
};

/// Reverse-mode gradients through the unrolled discrete dynamics. Reset is
/// excluded from the backward graph and rounding is straight-through.
BatchGradients bptt_gradients(const snn::NetworkSpec& net, const ShadowWeights& shadow,
                              std::span<const LabeledFrames> batch, const TrainerConfig& cfg,
                              const TrainHooks* hooks = nullptr);

/// Mean loss of the same forward pass bptt_gradients differentiates.
double evaluate_loss(const snn::NetworkSpec& net, const ShadowWeights& shadow, std::span<const LabeledFrames> batch,
                     const TrainerConfig& cfg);

struct LabeledStream {
  events::EventStream stream;
  std::size_t label = 0;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  ShadowWeights shadow;
  snn::NetworkSpec network;  // quantized, deployable
  std::vector<EpochStats> curve;
};

/// Epoch loop: augment -> quantized forward -> loss -> BPTT -> optimizer.
/// Deterministic in cfg.seed. Throws Errc::EmptyDataset or Errc::DivergedLoss.
TrainResult train(const snn::NetworkSpec& net, std::span<const LabeledStream> data, const TrainerConfig& cfg,
                  const TrainHooks* hooks = nullptr);

/// As above, starting from `initial` instead of a fresh initialization.
TrainResult train(const snn::NetworkSpec& net, ShadowWeights initial, std::span<const LabeledStream> data,
                  const TrainerConfig& cfg, const TrainHooks* hooks = nullptr);

/// Stream -> network input: downscale if larger than the input, take the
/// presentation window (augmented when `rng` is given), bin at 1 ms.
events::SpikeFrameSequence prepare_input(const snn::NetworkSpec& net, const events::EventStream& stream,
                                         const TrainerConfig& cfg, Rng* rng);

}  // namespace soel::pretrain
