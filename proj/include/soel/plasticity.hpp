#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "soel/network.hpp"
#include "soel/precision.hpp"
#include "soel/rng.hpp"
#include "soel/simulator.hpp"

namespace soel::plasticity {

/// Evenly spaced values lo, lo + step, ..., hi.
struct Grid {
  double lo;
  double hi;
  double step;
};
inline constexpr Grid kTraceGrid{0.0, 127.0, 1.0};
inline constexpr Grid kWeightGrid{-256.0, 254.0, 2.0};
inline constexpr Grid kIntegerGrid{-1e18, 1e18, 1.0};

/// Clamps to the grid, then rounds to one of the two neighbouring grid
/// points with probability proportional to proximity. Values on the grid
/// are returned without consuming randomness.
double stochastic_round(double value, const Grid& grid, Rng& rng);

/// Postsynaptic factor of the update.
enum class SigmaMode { StraightThrough, Gated };

struct SoelConfig {
  double eta = 1.0 / 64.0;
  int C = 64;
  int T = 32;
  int theta_init = 0;
  int theta_inc = 1;
  int theta_dec = 1;
  int theta_min = 0;
  int target_active = 10;
  int target_inactive = 0;
  double alpha1 = 0.75;
  double alpha2 = 0.96875;
  double impulse = 16.0;
  Precision precision = Precision::Hardware;
  SigmaMode sigma = SigmaMode::StraightThrough;
  double gate_half_width = 2560.0;  // Gated only
  snn::OverflowMode overflow = snn::OverflowMode::Saturate;
  /// Learning rate of the per-step comparison rule.
  double baseline_eta = 1.0 / 64.0;

  /// Throws Errc::InvalidConfig.
  void validate() const;
};

/// Two first-order presynaptic traces; X2 - X1 is a second-order kernel.
struct TraceState {
  std::vector<double> x1;
  std::vector<double> x2;
  double alpha1 = 0.75;
  double alpha2 = 0.96875;

  TraceState() = default;
  TraceState(std::size_t n, double a1, double a2) : x1(n, 0.0), x2(n, 0.0), alpha1(a1), alpha2(a2) {}
  double p(std::size_t j) const { return x2[j] - x1[j]; }
};

/// X' = alpha X + impulse * a for each presynaptic unit with activity a
/// (1 for a spike, the window sum for a pool unit). In hardware precision
/// both traces are stochastically rounded onto [0, 127].
void update_traces(TraceState& traces, std::span<const std::int32_t> activity, double impulse, Precision precision,
                   Rng& rng);

inline int compute_error(int target, int spike_count) { return target - spike_count; }

struct ErrorEvent {
  int E = 0;
  bool triggered = false;
};

/// Triggered iff |err| > theta; E = C + err when triggered, C otherwise.
/// Throws Errc::OffsetUnderflow when C + err < 0.
ErrorEvent error_event(int err, int theta, int C);

int adapt_threshold(int theta, bool triggered, const SoelConfig& cfg);

/// Sum of products: each term is scale * prod_l (variable_l + offset_l).
struct Factor {
  enum class Var { PreX1, PreX2, PostError, Constant };
  Var var = Var::Constant;
  double offset = 0.0;
};

struct Term {
  double scale = 1.0;
  std::vector<Factor> factors;
};

struct PlasticityRule {
  std::vector<Term> terms;

  /// Weight change for one synapse; `error` is the postsynaptic register E.
  double evaluate(double x1, double x2, double error) const;
  /// Throws Errc::InvalidConfig when there are no terms.
  void validate() const;
  std::string str() const;
};

/// eta (E - C) X2 - eta (E - C) X1.
PlasticityRule soel_rule(double eta, int C);

/// Applies `rule` to one weight row, scaling each change by `sigma` and
/// rounding stochastically onto the weight grid. Returns the number of
/// synapses written (those whose change before rounding is non-zero).
std::size_t apply_rule(std::span<std::int16_t> row, const PlasticityRule& rule, int E, const TraceState& traces,
                       double sigma, Rng& rng);

/// W' = W + eta (E - C)(X2 - X1) with stochastic rounding and clamping.
std::size_t apply_update(std::span<std::int16_t> row, int E, int C, double eta, const TraceState& traces, Rng& rng);

struct PlasticNeuronState {
  int spike_count = 0;
  int theta = 0;
  bool learning = true;
  int E = 0;
};

struct WindowLogEntry {
  std::size_t step = 0;  // last step of the window
  std::size_t neuron = 0;
  int err = 0;
  int theta = 0;  // threshold the error was compared against
  bool triggered = false;
  int E = 0;
  std::size_t updates_applied = 0;
};

struct PresentResult {
  std::vector<WindowLogEntry> log;
  std::vector<std::int64_t> output_counts;
  std::uint64_t updates = 0;
  std::size_t windows_triggered = 0;
};

/// Online learner for the plastic (final) layer. Runs that layer on
/// precomputed presynaptic activity; the threshold persists across
/// presentations, spike counts and traces restart with each one.
class SoelEngine {
 public:
  /// `layer` must be dense; it is updated in place and must outlive the engine.
  SoelEngine(snn::LayerSpec& layer, SoelConfig cfg, Rng rng);

  /// Presents one sample with label `label`. With learning disabled this
  /// is plain inference. Throws Errc::PresentationTooShort when the sample
  /// is shorter than one window.
  PresentResult present(const snn::Raster& features, std::size_t label, bool learning = true);

  const std::vector<PlasticNeuronState>& neurons() const { return neurons_; }
  const snn::LayerSpec& layer() const { return *layer_; }

 private:
  snn::LayerSpec* layer_;
  SoelConfig cfg_;
  Rng rng_;
  PlasticityRule rule_;
  std::vector<PlasticNeuronState> neurons_;
};

/// One presentation with a fresh engine.
PresentResult soel_present(snn::LayerSpec& layer, const snn::Raster& features, std::size_t label,
                           const SoelConfig& cfg, Rng& rng);

/// Output spike counts of the layer with no plasticity.
std::vector<std::int64_t> infer_counts(const snn::LayerSpec& layer, const snn::Raster& features,
                                       snn::OverflowMode overflow = snn::OverflowMode::Saturate);

/// Comparison rule that updates every timestep: err = Y / T - S[t] and
/// dW = baseline_eta * err * (X2 - X1) whenever err != 0. Counts writes the
/// same way as the engine.
PresentResult baseline_present(snn::LayerSpec& layer, const snn::Raster& features, std::size_t label,
                               const SoelConfig& cfg, Rng& rng);

/// CSV with header step,neuron,err,theta,triggered,E,updates_applied.
std::string window_log_csv(std::span<const WindowLogEntry> log);

}  // namespace soel::plasticity
