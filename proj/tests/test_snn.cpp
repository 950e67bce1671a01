#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "soel/error.hpp"
#include "soel/kernels.hpp"
#include "soel/network.hpp"
#include "soel/neuron.hpp"
#include "soel/rng.hpp"
#include "soel/simulator.hpp"

using namespace soel;
using namespace soel::snn;

namespace {

// Straight-line neuron: trunc-toward-zero leak, hard reset.
struct RefNeuron {
  long long i = 0, u = 0;
  bool step(long long in, const NeuronParams& p) {
    i = i * (4096 - p.current_decay) / 4096 + in;
    u = u * (4096 - p.voltage_decay) / 4096 + i + p.bias;
    if (u >= p.u_threshold) {
      u = 0;
      return true;
    }
    return false;
  }
};

void fill_random(LayerSpec& l, Rng& rng, int lo, int hi) {
  for (auto& w : l.weights.values) w = static_cast<std::int16_t>(2 * rng.uniform_int(lo / 2, hi / 2));
}

events::SpikeFrameSequence random_frames(Rng& rng, int w, int h, std::size_t steps, double p) {
  events::SpikeFrameSequence f;
  f.width = static_cast<std::uint16_t>(w);
  f.height = static_cast<std::uint16_t>(h);
  f.n_steps = steps;
  f.data.resize(steps * f.frame_size());
  for (auto& v : f.data) v = rng.bernoulli(p) ? 1 : 0;
  return f;
}

}  // namespace

TEST(Decay, Boundaries) {
  EXPECT_DOUBLE_EQ(decay_factor(0).value(), 1.0);
  EXPECT_DOUBLE_EQ(decay_factor(4096).value(), 0.0);
  EXPECT_DOUBLE_EQ(decay_factor(1024).value(), 0.75);
  EXPECT_EQ(apply_decay(1000, 1024), 750);
  EXPECT_EQ(apply_decay(-1000, 1024), -750);
  EXPECT_EQ(apply_decay(7, 1024), 5);
  EXPECT_EQ(apply_decay(-7, 1024), -5);
  EXPECT_THROW(decay_factor(4097), Error);
  EXPECT_THROW(decay_factor(-1), Error);
}

TEST(StepNeuron, ZeroIsFixedPoint) {
  const auto r = step_neuron({}, {}, 0);
  EXPECT_EQ(r.state, NeuronState{});
  EXPECT_FALSE(r.spike);
}

TEST(StepNeuron, FirstSpikeUnderConstantDrive) {
  NeuronParams p;
  // Oracle: iterate I = 0.75 I + 2048, U = 0.96875 U + I with exact
  // integer truncation, find the first step with U >= 5120.
  long long i = 0, u = 0;
  int expect = -1;
  for (int k = 0; k < 100 && expect < 0; ++k) {
    i = i * 3072 / 4096 + 2048;
    u = u * 3968 / 4096 + i;
    if (u >= 5120) expect = k;
  }
  NeuronState s;
  int first = -1;
  for (int k = 0; k < 100 && first < 0; ++k) {
    const auto r = step_neuron(s, p, 2048);
    if (r.spike) {
      first = k;
      EXPECT_EQ(r.state.voltage, 0);
      EXPECT_GE(r.membrane, 5120);
    }
    s = r.state;
  }
  EXPECT_EQ(first, expect);
  EXPECT_EQ(first, 1);
}

TEST(StepNeuron, PulseResponseIsDoubleExponential) {
  NeuronParams p;
  p.u_threshold = kStateMax;
  NeuronState s;
  const double a = 0.75, b = 0.96875;
  for (int k = 0; k < 40; ++k) {
    const auto r = step_neuron(s, p, k == 0 ? 100000 : 0);
    s = r.state;
    // Convolution of the pulse with both leaks; truncation loses < 1 per step per register.
    double expect = 0;
    for (int m = 0; m <= k; ++m) expect += 100000 * std::pow(a, m) * std::pow(b, k - m);
    EXPECT_NEAR(s.voltage, expect, 2.0 * (k + 1) * (k + 1)) << "step " << k;
  }
}

TEST(StepNeuron, DecayExtremes) {
  NeuronParams p;
  p.current_decay = 4096;
  p.voltage_decay = 4096;
  p.u_threshold = kStateMax;
  NeuronState s;
  for (int k = 0; k < 5; ++k) {
    s = step_neuron(s, p, 100 * (k + 1)).state;
    EXPECT_EQ(s.current, 100 * (k + 1));
    EXPECT_EQ(s.voltage, 100 * (k + 1));
  }
  p.current_decay = p.voltage_decay = 0;
  NeuronState c{0, 123, 0};
  for (int k = 0; k < 5; ++k) c = step_neuron(c, p, 0).state;
  EXPECT_EQ(c.voltage, 123);
}

TEST(StepNeuron, SoftSubtract) {
  NeuronParams p;
  p.reset = ResetMode::SoftSubtract;
  p.refractory_decay = 2048;
  p.current_decay = kDecayScale;
  NeuronState s;
  const auto r = step_neuron(s, p, 6000);
  ASSERT_TRUE(r.spike);
  EXPECT_EQ(r.state.refractory, kRefractoryOne);
  EXPECT_EQ(r.state.voltage, 6000 - 5120);
  const auto r2 = step_neuron(r.state, p, 0);
  EXPECT_EQ(r2.state.refractory, 2048);
}

TEST(StepNeuron, OverflowModes) {
  NeuronParams p;
  p.u_threshold = kStateMax;
  EXPECT_THROW(step_neuron({}, p, kStateMax + 1LL), Error);
  const auto r = step_neuron({}, p, kStateMax + 1000LL, OverflowMode::Saturate);
  EXPECT_EQ(r.state.current, kStateMax);
}

TEST(StepNeuron, SubthresholdLinearity) {
  NeuronParams p;
  p.u_threshold = kStateMax;
  Rng rng(4);
  std::vector<long long> a(60), b(60);
  for (auto& v : a) v = rng.uniform_int(0, 3) * 300;
  for (auto& v : b) v = rng.uniform_int(0, 3) * 300;
  NeuronState sa, sb, sab;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sa = step_neuron(sa, p, a[k]).state;
    sb = step_neuron(sb, p, b[k]).state;
    sab = step_neuron(sab, p, a[k] + b[k]).state;
    EXPECT_LE(std::abs(sab.voltage - sa.voltage - sb.voltage), 2 * static_cast<int>(k + 1));
  }
}

TEST(Quantize, Rule) {
  EXPECT_EQ(quantize_weight(0.0), 0);
  EXPECT_EQ(quantize_weight(3.7), 4);
  EXPECT_EQ(quantize_weight(-3.7), -4);
  EXPECT_EQ(quantize_weight(300.0), 254);
  EXPECT_EQ(quantize_weight(-300.0), -256);
  EXPECT_EQ(quantize_weight(1.0), 0);   // half to even: 0.5 -> 0
  EXPECT_EQ(quantize_weight(3.0), 4);   // 1.5 -> 2
  EXPECT_EQ(quantize_weight(5.0), 4);   // 2.5 -> 2
  Rng rng(2);
  std::vector<double> shadow(5000);
  for (auto& w : shadow) w = rng.uniform(-400.0, 400.0);
  EXPECT_TRUE(quantize_weights(shadow).valid());
}

TEST(Network, BuildAndValidate) {
  const std::vector<std::string> toks{"8c5z", "4a", "N"};
  const auto net = build_network({2, 32, 32}, toks, {}, 3);
  ASSERT_EQ(net.layers.size(), 3u);
  EXPECT_EQ(net.layers[0].out, (Shape3{8, 32, 32}));
  EXPECT_EQ(net.layers[1].out, (Shape3{8, 8, 8}));
  EXPECT_EQ(net.output_size(), 3u);
  EXPECT_EQ(net.layers[0].notation(), "8c5z");
  net.validate();

  const auto t1 = table1_network(11);
  EXPECT_EQ(t1.input, (Shape3{2, 128, 128}));
  EXPECT_EQ(t1.layers[1].out, (Shape3{16, 32, 32}));
  EXPECT_EQ(t1.layers[5].out.size(), 512u);
  EXPECT_EQ(t1.output_size(), 11u);

  auto bad = net;
  bad.layers[0].weights.values[0] = 3;
  EXPECT_THROW(bad.validate(), Error);
  bad = net;
  bad.layers[0].plastic = bad.layers[2].plastic = true;
  EXPECT_THROW(bad.validate(), Error);
  const std::vector<std::string> pool_last{"4a"};
  EXPECT_THROW(build_network({2, 32, 32}, pool_last, {}, 3).validate(), Error);
}

TEST(Kernels, SinglePixelPool) {
  const std::vector<std::string> toks{"4a", "N"};
  const auto net = build_network({2, 8, 8}, toks, {}, 1);
  const LayerSpec& pool = net.layers[0];
  std::vector<std::int32_t> in(pool.in.size(), 0), out(pool.out.size());
  in[(1 * 8 + 5) * 8 + 6] = 1;
  kernels::accumulate<std::int16_t, std::int32_t>(kernels::Backend::Serial, pool, {}, in, out);
  EXPECT_EQ(std::count(out.begin(), out.end(), 1), 1);
  EXPECT_EQ(out[(1 * 2 + 1) * 2 + 1], 1);
}

TEST(Kernels, ConvEqualsDenseMatrix) {
  Rng rng(12);
  const std::vector<std::string> toks{"3c3z", "N"};
  auto net = build_network({2, 8, 8}, toks, {}, 1);
  LayerSpec& conv = net.layers[0];
  fill_random(conv, rng, -256, 254);
  // Explicit matrix built from the convolution definition.
  const std::size_t n_in = conv.in.size(), n_out = conv.out.size();
  std::vector<std::int32_t> m(n_in * n_out, 0);
  for (int o = 0; o < 3; ++o)
    for (int oy = 0; oy < 8; ++oy)
      for (int ox = 0; ox < 8; ++ox)
        for (int c = 0; c < 2; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy + ky - 1, ix = ox + kx - 1;
              if (iy < 0 || iy >= 8 || ix < 0 || ix >= 8) continue;
              m[((o * 8 + oy) * 8 + ox) * n_in + (c * 8 + iy) * 8 + ix] =
                  conv.weights.values[((o * 2 + c) * 3 + ky) * 3 + kx];
            }
  std::vector<std::int32_t> in(n_in);
  for (auto& v : in) v = rng.bernoulli(0.3);
  for (const auto b : {kernels::Backend::Serial, kernels::Backend::OpenMP}) {
    std::vector<std::int32_t> out(n_out);
    kernels::accumulate<std::int16_t, std::int32_t>(b, conv, conv.weights.values, in, out);
    for (std::size_t i = 0; i < n_out; ++i) {
      std::int32_t expect = 0;
      for (std::size_t j = 0; j < n_in; ++j) expect += m[i * n_in + j] * in[j];
      ASSERT_EQ(out[i], expect) << i;
    }
  }
}

TEST(Kernels, SerialAndParallelBitIdentical) {
  Rng rng(13);
  const std::vector<std::string> toks{"8c5z", "4a", "16c3", "N"};
  auto net = build_network({2, 32, 32}, toks, {}, 5);
  for (auto& l : net.layers) fill_random(l, rng, -256, 254);
  for (const LayerSpec& l : net.layers) {
    std::vector<double> in(l.in.size());
    for (auto& v : in) v = rng.bernoulli(0.2) ? rng.uniform(-3.0, 3.0) : 0.0;
    std::vector<double> a(l.out.size()), b(l.out.size());
    kernels::accumulate<std::int16_t, double>(kernels::Backend::Serial, l, l.weights.values, in, a);
    kernels::accumulate<std::int16_t, double>(kernels::Backend::OpenMP, l, l.weights.values, in, b);
    EXPECT_EQ(a, b) << l.notation();
  }
  std::vector<NeuronState> s1(4096), s2(4096);
  std::vector<std::int32_t> in(4096), sp1(4096), sp2(4096), m1(4096), m2(4096);
  for (int step = 0; step < 30; ++step) {
    for (auto& v : in) v = static_cast<std::int32_t>(rng.uniform_int(-3000, 6000));
    kernels::step_neurons(kernels::Backend::Serial, s1, {}, in, sp1, m1, OverflowMode::Strict);
    kernels::step_neurons(kernels::Backend::OpenMP, s2, {}, in, sp2, m2, OverflowMode::Strict);
    ASSERT_EQ(s1, s2);
    ASSERT_EQ(sp1, sp2);
    ASSERT_EQ(m1, m2);
  }
  // Overflow is reported by both backends.
  std::vector<std::int32_t> huge(4096, kStateMax);
  EXPECT_THROW(kernels::step_neurons(kernels::Backend::OpenMP, s2, {}, huge, sp2, m2, OverflowMode::Strict), Error);
  EXPECT_THROW(kernels::step_neurons(kernels::Backend::Serial, s1, {}, huge, sp1, m1, OverflowMode::Strict), Error);
}

TEST(RunNetwork, ZeroInputGivesZeroCounts) {
  Rng rng(14);
  const std::vector<std::string> toks{"4c3z", "2a", "N"};
  auto net = build_network({2, 8, 8}, toks, {}, 3);
  for (auto& l : net.layers) fill_random(l, rng, -256, 254);
  events::SpikeFrameSequence f;
  f.width = f.height = 8;
  f.n_steps = 20;
  f.data.assign(20 * f.frame_size(), 0);
  const auto r = run_network(net, f, RecordMode::OutputCounts);
  EXPECT_EQ(r.output_counts, std::vector<std::int64_t>(3, 0));
}

TEST(RunNetwork, MatchesStraightLineOracle) {
  Rng rng(15);
  const std::vector<std::string> toks{"2c3z", "2a", "N"};
  auto net = build_network({2, 6, 6}, toks, {}, 3);
  fill_random(net.layers[0], rng, 0, 254);
  fill_random(net.layers[2], rng, -100, 254);
  for (auto& w : net.layers[0].weights.values) w = static_cast<std::int16_t>(w * 8 > 254 ? 254 : w * 8);
  const auto frames = random_frames(rng, 6, 6, 60, 0.25);
  const NeuronParams p;

  // Oracle: conv neurons on 2x6x6, 2x2 sum pool, dense neurons.
  std::vector<RefNeuron> conv_n(72), out_n(3);
  std::vector<std::int64_t> counts(3, 0);
  std::size_t conv_spikes = 0;
  const auto& wc = net.layers[0].weights.values;
  const auto& wd = net.layers[2].weights.values;
  for (std::size_t k = 0; k < frames.n_steps; ++k) {
    std::vector<int> cs(72, 0);
    for (int o = 0; o < 2; ++o)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) {
          long long drive = 0;
          for (int c = 0; c < 2; ++c)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int iy = y + ky - 1, ix = x + kx - 1;
                if (iy < 0 || iy >= 6 || ix < 0 || ix >= 6) continue;
                drive += wc[((o * 2 + c) * 3 + ky) * 3 + kx] * frames.at(k, c, iy, ix);
              }
          cs[(o * 6 + y) * 6 + x] = conv_n[(o * 6 + y) * 6 + x].step(drive, p);
          conv_spikes += cs[(o * 6 + y) * 6 + x];
        }
    std::vector<long long> pooled(18, 0);
    for (int o = 0; o < 2; ++o)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) pooled[(o * 3 + y / 2) * 3 + x / 2] += cs[(o * 6 + y) * 6 + x];
    for (int i = 0; i < 3; ++i) {
      long long drive = 0;
      for (int j = 0; j < 18; ++j) drive += wd[i * 18 + j] * pooled[j];
      counts[i] += out_n[i].step(drive, p);
    }
  }
  ASSERT_GT(conv_spikes, 0u);
  for (const auto b : {kernels::Backend::Serial, kernels::Backend::OpenMP}) {
    const auto r = run_network(net, frames, RecordMode::AllSpikes, {OverflowMode::Strict, b});
    EXPECT_EQ(r.output_counts, counts);
    EXPECT_EQ(static_cast<std::size_t>(r.layers[0].total()), conv_spikes);
    EXPECT_EQ(r.features, extract_features(net, frames, {OverflowMode::Strict, b}));
  }
  EXPECT_EQ(run_network(net, frames, RecordMode::AllSpikes), run_network(net, frames, RecordMode::AllSpikes));
}

TEST(RunNetwork, HardResetInvariant) {
  Rng rng(16);
  const std::vector<std::string> toks{"N"};
  auto net = build_network({2, 4, 4}, toks, {}, 4);
  fill_random(net.layers[0], rng, 100, 254);
  const auto frames = random_frames(rng, 4, 4, 50, 0.5);
  Simulator sim(net);
  for (std::size_t k = 0; k < frames.n_steps; ++k) {
    sim.step(frames.frame(k));
    for (std::size_t i = 0; i < 4; ++i) {
      if (sim.activity(0)[i]) EXPECT_EQ(sim.states(0)[i].voltage, 0);
    }
  }
}

TEST(RunNetwork, ShapeMismatch) {
  const std::vector<std::string> toks{"N"};
  const auto net = build_network({2, 4, 4}, toks, {}, 2);
  events::SpikeFrameSequence f;
  f.width = f.height = 5;
  f.n_steps = 1;
  f.data.assign(f.frame_size(), 0);
  EXPECT_THROW(run_network(net, f, RecordMode::OutputCounts), Error);
}
