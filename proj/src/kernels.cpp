#include "soel/kernels.hpp"

#include <algorithm>
#include <string>

#include "soel/error.hpp"

namespace soel::snn::kernels {

void serial::step_neurons(std::span<NeuronState> states, const NeuronParams& params,
                          std::span<const std::int32_t> input, std::span<std::int32_t> spikes, std::span<std::int32_t> membrane,
                          OverflowMode overflow) {
  for (std::size_t i = 0; i < states.size(); ++i) {
    const StepResult r = step_neuron(states[i], params, input[i], overflow);
    states[i] = r.state;
    spikes[i] = r.spike ? 1 : 0;
    if (!membrane.empty()) membrane[i] = r.membrane;
  }
}

void parallel::step_neurons(std::span<NeuronState> states, const NeuronParams& params,
                            std::span<const std::int32_t> input, std::span<std::int32_t> spikes,
                            std::span<std::int32_t> membrane, OverflowMode overflow) {
  params.validate();
  const std::int64_t ci = kDecayScale - params.current_decay;
  const std::int64_t cv = kDecayScale - params.voltage_decay;
  const std::int64_t cr = kDecayScale - params.refractory_decay;
  const std::int64_t theta = params.u_threshold;
  const bool strict = overflow == OverflowMode::Strict;
  const bool hard = params.reset == ResetMode::HardReset;
  const bool keep_membrane = !membrane.empty();
  auto fit = [](std::int64_t v) { return std::clamp<std::int64_t>(v, kStateMin, kStateMax); };
  const auto n = static_cast<std::int64_t>(states.size());
  std::int64_t first_overflow = n;
#pragma omp parallel for schedule(static) reduction(min : first_overflow)
  for (std::int64_t i = 0; i < n; ++i) {
    NeuronState& s = states[i];
    const std::int64_t cur = s.current * ci / kDecayScale + input[i];
    std::int64_t u = s.voltage * cv / kDecayScale + fit(cur) + params.bias;
    bool over = cur != fit(cur) || u != fit(u);
    u = fit(u);
    if (keep_membrane) membrane[i] = static_cast<std::int32_t>(u);
    const bool spike = u >= theta;
    if (hard) {
      if (spike) u = 0;
    } else {
      const std::int64_t r = s.refractory * cr / kDecayScale + (spike ? kRefractoryOne : 0);
      over = over || r != fit(r);
      s.refractory = static_cast<std::int32_t>(fit(r));
      u -= theta * s.refractory / kRefractoryOne;
      over = over || u != fit(u);
      u = fit(u);
    }
    s.current = static_cast<std::int32_t>(fit(cur));
    s.voltage = static_cast<std::int32_t>(u);
    spikes[i] = spike ? 1 : 0;
    if (strict && over) first_overflow = std::min(first_overflow, i);
  }
  if (first_overflow < n) throw Error(Errc::Overflow, "register overflow in neuron " + std::to_string(first_overflow));
}

void set_max_threads(int jobs) {
#ifdef _OPENMP
  if (jobs >= 1) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

}  // namespace soel::snn::kernels
