// Serial reference vs OpenMP kernels on Table I layer shapes.
//   bench_kernels [--benchmark_filter=...]  (threads via OMP_NUM_THREADS)

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "soel/kernels.hpp"
#include "soel/pretrain.hpp"
#include "soel/simulator.hpp"

using namespace soel;
using namespace soel::snn;

namespace {

// One layer of table1_network with random on-grid weights and input of
// the given density.
struct LayerCase {
  LayerSpec layer;
  std::vector<std::int32_t> in;
  std::vector<std::int32_t> out;
};

LayerCase make_case(std::size_t index, double density) {
  const NetworkSpec net = table1_network(11);
  Rng rng(42);
  const auto shadow = pretrain::init_shadow(net, 2.0, rng);
  LayerCase c{pretrain::deploy(net, shadow).layers.at(index), {}, {}};
  c.in.resize(c.layer.in.size());
  for (auto& v : c.in) v = rng.bernoulli(density) ? 1 : 0;
  c.out.resize(c.layer.out.size());
  return c;
}

void run_layer(benchmark::State& state, kernels::Backend backend, std::size_t index) {
  LayerCase c = make_case(index, static_cast<double>(state.range(0)) / 100.0);
  const std::span<const std::int16_t> w(c.layer.weights.values);
  for (auto _ : state) {
    kernels::accumulate<std::int16_t, std::int32_t>(backend, c.layer, w, c.in, c.out);
    benchmark::DoNotOptimize(c.out.data());
  }
  state.SetLabel(c.layer.notation());
}

void BM_Conv16c5z_Serial(benchmark::State& s) { run_layer(s, kernels::Backend::Serial, 1); }
void BM_Conv16c5z_OpenMP(benchmark::State& s) { run_layer(s, kernels::Backend::OpenMP, 1); }
void BM_Conv32c3z_Serial(benchmark::State& s) { run_layer(s, kernels::Backend::Serial, 3); }
void BM_Conv32c3z_OpenMP(benchmark::State& s) { run_layer(s, kernels::Backend::OpenMP, 3); }
void BM_Dense512_Serial(benchmark::State& s) { run_layer(s, kernels::Backend::Serial, 5); }
void BM_Dense512_OpenMP(benchmark::State& s) { run_layer(s, kernels::Backend::OpenMP, 5); }

void run_neurons(benchmark::State& state, kernels::Backend backend) {
  const std::size_t n = 16 * 32 * 32;
  std::vector<NeuronState> states(n);
  std::vector<std::int32_t> input(n), spikes(n);
  Rng rng(7);
  for (auto& v : input) v = static_cast<std::int32_t>(rng.uniform_int(0, 3000));
  for (auto _ : state) {
    kernels::step_neurons(backend, states, NeuronParams{}, input, spikes, {}, OverflowMode::Saturate);
    benchmark::DoNotOptimize(spikes.data());
  }
}

void BM_StepNeurons_Serial(benchmark::State& s) { run_neurons(s, kernels::Backend::Serial); }
void BM_StepNeurons_OpenMP(benchmark::State& s) { run_neurons(s, kernels::Backend::OpenMP); }

void run_network_steps(benchmark::State& state, kernels::Backend backend) {
  const NetworkSpec base = table1_network(11);
  Rng rng(3);
  const NetworkSpec net = pretrain::deploy(base, pretrain::init_shadow(base, 2.0, rng));
  events::SpikeFrameSequence frames;
  frames.width = frames.height = 128;
  frames.n_steps = 20;
  frames.data.resize(frames.n_steps * frames.frame_size());
  for (auto& v : frames.data) v = rng.bernoulli(0.02) ? 1 : 0;
  for (auto _ : state) {
    auto rec = run_network(net, frames, RecordMode::OutputCounts, {OverflowMode::Saturate, backend});
    benchmark::DoNotOptimize(rec.output_counts.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.n_steps));
}

void BM_Table1Net20Steps_Serial(benchmark::State& s) { run_network_steps(s, kernels::Backend::Serial); }
void BM_Table1Net20Steps_OpenMP(benchmark::State& s) { run_network_steps(s, kernels::Backend::OpenMP); }

}  // namespace

BENCHMARK(BM_Conv16c5z_Serial)->Arg(2)->Arg(10)->Arg(30);
BENCHMARK(BM_Conv16c5z_OpenMP)->Arg(2)->Arg(10)->Arg(30);
BENCHMARK(BM_Conv32c3z_Serial)->Arg(2)->Arg(10)->Arg(30);
BENCHMARK(BM_Conv32c3z_OpenMP)->Arg(2)->Arg(10)->Arg(30);
BENCHMARK(BM_Dense512_Serial)->Arg(2)->Arg(10)->Arg(30);
BENCHMARK(BM_Dense512_OpenMP)->Arg(2)->Arg(10)->Arg(30);
BENCHMARK(BM_StepNeurons_Serial);
BENCHMARK(BM_StepNeurons_OpenMP);
BENCHMARK(BM_Table1Net20Steps_Serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Table1Net20Steps_OpenMP)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
