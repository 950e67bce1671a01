#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "soel/error.hpp"
#include "soel/optimizer.hpp"
#include "soel/pretrain.hpp"
#include "soel/rng.hpp"
#include "soel/synth.hpp"

using namespace soel;
using namespace soel::pretrain;

namespace {

events::SpikeFrameSequence frames_from(const std::vector<std::vector<std::uint8_t>>& steps, int w, int h) {
  events::SpikeFrameSequence f;
  f.width = static_cast<std::uint16_t>(w);
  f.height = static_cast<std::uint16_t>(h);
  f.n_steps = steps.size();
  for (const auto& s : steps) f.data.insert(f.data.end(), s.begin(), s.end());
  return f;
}

events::SpikeFrameSequence random_frames(Rng& rng, int w, int h, std::size_t n, double p) {
  std::vector<std::vector<std::uint8_t>> steps(n, std::vector<std::uint8_t>(2u * w * h));
  for (auto& s : steps)
    for (auto& v : s) v = rng.bernoulli(p) ? 1 : 0;
  return frames_from(steps, w, h);
}

TrainerConfig full_precision(SpikeFunction fn) {
  TrainerConfig c;
  c.precision = Precision::Full;
  c.spike_function = fn;
  c.truncation = 1000;
  return c;
}

}  // namespace

TEST(Surrogate, Boxcar) {
  const SurrogateConfig c{100.0, 0.25};
  EXPECT_EQ(surrogate_derivative(5120, c, 5120), 0.25);
  EXPECT_EQ(surrogate_derivative(5120 + 200, c, 5120), 0.0);
  EXPECT_EQ(surrogate_derivative(5120 - 100, c, 5120), 0.25);
  // Midpoint quadrature of the boxcar.
  double integral = 0.0;
  const double du = 0.01;
  for (double u = 4000.0; u < 6000.0; u += du) integral += surrogate_derivative(u + du / 2, c, 5120) * du;
  EXPECT_NEAR(integral, 2.0 * c.half_width * c.scale, 1e-6);
}

TEST(CountLoss, Formula) {
  const std::vector<double> exact{30.0, 5.0};
  const auto z = spike_count_loss(exact, 0, 30, 5);
  EXPECT_EQ(z.loss, 0.0);
  EXPECT_EQ(z.grad_per_step, (std::vector<double>{0.0, 0.0}));

  const std::vector<double> under{10.0, 5.0};
  const auto l = spike_count_loss(under, 0, 30, 5);
  EXPECT_EQ(l.loss, 400.0);
  // Under-firing true class: descending the gradient raises its count.
  EXPECT_LT(l.grad_per_step[0], 0.0);
  EXPECT_THROW(spike_count_loss(under, 2, 30, 5), Error);
}

TEST(Bptt, ZeroInputZeroGradient) {
  const std::vector<std::string> toks{"4c3z", "2a", "N"};
  const auto net = snn::build_network({2, 6, 6}, toks, {}, 2);
  Rng rng(1);
  const auto shadow = init_shadow(net, 1.0, rng);
  const auto f = frames_from(std::vector<std::vector<std::uint8_t>>(10, std::vector<std::uint8_t>(72, 0)), 6, 6);
  const std::vector<LabeledFrames> batch{{&f, 1}};
  for (const auto prec : {Precision::Hardware, Precision::Full}) {
    TrainerConfig c;
    c.precision = prec;
    const auto g = bptt_gradients(net, shadow, batch, c);
    for (const auto& layer : g.grad)
      for (double v : layer) EXPECT_EQ(v, 0.0);
  }
}

TEST(Bptt, SingleSynapseHandDerivation) {
  // One output unit driven by the ON channel of a 1x1 input.
  const std::vector<std::string> toks{"N"};
  const auto net = snn::build_network({2, 1, 1}, toks, {}, 1);
  const ShadowWeights shadow{{0.0, 1500.0}};
  const std::vector<int> x{1, 0, 1, 1, 0};
  std::vector<std::vector<std::uint8_t>> steps;
  for (int v : x) steps.push_back({0, static_cast<std::uint8_t>(v)});
  const auto f = frames_from(steps, 1, 1);
  TrainerConfig c = full_precision(SpikeFunction::Step);
  c.surrogate = {3000.0, 1.0 / 1000.0};
  const std::vector<LabeledFrames> batch{{&f, 0}};
  const auto g = bptt_gradients(net, shadow, batch, c);

  // Forward by hand: I = 0.75 I + w x, U = 0.96875 U + I, hard reset at 5120.
  const double ai = 0.75, av = 0.96875, w = 1500.0;
  double i = 0, u = 0, count = 0;
  std::vector<double> dsig, dudw;
  double fi = 0, fu = 0;  // dI/dw, dU/dw ignoring the reset
  for (int t = 0; t < 5; ++t) {
    i = ai * i + w * x[t];
    u = av * u + i;
    fi = ai * fi + x[t];
    fu = av * fu + fi;
    dsig.push_back(std::abs(u - 5120.0) <= 3000.0 ? 1.0 / 1000.0 : 0.0);
    dudw.push_back(fu);
    if (u >= 5120.0) {
      count += 1;
      u = 0;
    }
  }
  const double target = 30.0 * 5 / 100.0;
  const double dlds = -2.0 * (target - count);
  double expect = 0;
  for (int t = 0; t < 5; ++t) expect += dlds * dsig[t] * dudw[t];
  ASSERT_NE(expect, 0.0);
  EXPECT_NEAR(g.grad[0][1], expect, 1e-12 * std::abs(expect));
  EXPECT_EQ(g.grad[0][0], 0.0);
  EXPECT_NEAR(g.loss, (target - count) * (target - count), 1e-12);
}

TEST(Bptt, MatchesFiniteDifferencesWithRamp) {
  const std::vector<std::string> toks{"3", "N"};
  const auto net = snn::build_network({2, 1, 1}, toks, {}, 2);
  Rng rng(3);
  ShadowWeights shadow = init_shadow(net, 1.0, rng);
  const auto f = random_frames(rng, 1, 1, 15, 0.6);
  TrainerConfig c = full_precision(SpikeFunction::Ramp);
  // Wide enough that no unit sits on a flat part of the ramp.
  c.surrogate = {20000.0, 1.0 / 40000.0};
  const std::vector<LabeledFrames> batch{{&f, 1}};
  const auto g = bptt_gradients(net, shadow, batch, c);
  double max_rel = 0.0;
  std::size_t checked = 0;
  for (std::size_t l = 0; l < shadow.size(); ++l) {
    for (std::size_t k = 0; k < shadow[l].size(); ++k) {
      const double h = 1e-3;
      auto plus = shadow, minus = shadow;
      plus[l][k] += h;
      minus[l][k] -= h;
      const double fd = (evaluate_loss(net, plus, batch, c) - evaluate_loss(net, minus, batch, c)) / (2 * h);
      const double scale = std::max({std::abs(fd), std::abs(g.grad[l][k]), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - g.grad[l][k]) / scale);
      checked += fd != 0.0;
    }
  }
  EXPECT_EQ(checked, 12u);
  EXPECT_LT(max_rel, 1e-4);
}

TEST(Bptt, ForwardUsesQuantizedWeights) {
  const std::vector<std::string> toks{"4c3z", "2a", "N"};
  const auto net = snn::build_network({2, 6, 6}, toks, {}, 2);
  Rng rng(4);
  const auto shadow = init_shadow(net, 2.0, rng);
  const auto f = random_frames(rng, 6, 6, 20, 0.3);
  const std::vector<LabeledFrames> batch{{&f, 0}, {&f, 1}};
  int calls = 0;
  TrainHooks hooks;
  hooks.on_forward = [&](const snn::NetworkSpec& used) {
    ++calls;
    EXPECT_EQ(used, deploy(net, shadow));
    for (const auto& l : used.layers) EXPECT_TRUE(l.weights.valid());
  };
  bptt_gradients(net, shadow, batch, TrainerConfig{}, &hooks);
  EXPECT_EQ(calls, 2);
}

TEST(Bptt, NarrowSurrogateSilencesHiddenLayers) {
  const std::vector<std::string> toks{"4c3z", "2a", "N"};
  const auto net = snn::build_network({2, 6, 6}, toks, {}, 2);
  Rng rng(5);
  const auto shadow = init_shadow(net, 3.0, rng);
  const auto f = random_frames(rng, 6, 6, 30, 0.3);
  TrainerConfig c = full_precision(SpikeFunction::Step);
  c.surrogate.half_width = 1e-9;
  const std::vector<LabeledFrames> batch{{&f, 0}};
  const auto g = bptt_gradients(net, shadow, batch, c);
  for (double v : g.grad[0]) EXPECT_EQ(v, 0.0);
}

TEST(Optimizer, AdamAndNadamFirstSteps) {
  for (const auto kind : {OptimizerKind::Adam, OptimizerKind::Nadam}) {
    OptimizerConfig c;
    c.kind = kind;
    c.learning_rate = 0.1;
    AdaptiveMoment opt(c, 1);
    std::vector<double> p{1.0};
    const std::vector<double> g1{2.0}, g2{-1.0};
    opt.step(p, g1);
    opt.step(p, g2);
    // Hand-unrolled recursion.
    double m = 0, v = 0, x = 1.0;
    for (int t = 1; t <= 2; ++t) {
      const double g = t == 1 ? 2.0 : -1.0;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double b1 = 1 - std::pow(0.9, t), b1n = 1 - std::pow(0.9, t + 1), b2 = 1 - std::pow(0.999, t);
      const double mh = kind == OptimizerKind::Nadam ? 0.9 * m / b1n + 0.1 * g / b1 : m / b1;
      x -= 0.1 * mh / (std::sqrt(v / b2) + 1e-8);
    }
    EXPECT_NEAR(p[0], x, 1e-14);
    EXPECT_EQ(opt.steps(), 2);
  }
  EXPECT_EQ(optimizer_from_string("adam"), OptimizerKind::Adam);
  EXPECT_THROW(optimizer_from_string("sgd"), Error);
}

TEST(Bptt, SmallStepsDescend) {
  const std::vector<std::string> toks{"4", "N"};
  const auto net = snn::build_network({2, 2, 2}, toks, {}, 2);
  Rng rng(6);
  ShadowWeights shadow = init_shadow(net, 4.0, rng);
  const auto f = random_frames(rng, 2, 2, 30, 0.4);
  TrainerConfig c = full_precision(SpikeFunction::Ramp);
  c.surrogate = {5000.0, 1.0 / 10000.0};
  c.optimizer.learning_rate = 1e-5;
  const std::vector<LabeledFrames> batch{{&f, 0}};
  std::vector<AdaptiveMoment> opt;
  for (const auto& l : shadow) opt.emplace_back(c.optimizer, l.size());
  double prev = evaluate_loss(net, shadow, batch, c);
  for (int s = 0; s < 5; ++s) {
    const auto g = bptt_gradients(net, shadow, batch, c);
    for (std::size_t l = 0; l < shadow.size(); ++l) opt[l].step(shadow[l], g.grad[l]);
    const double now = evaluate_loss(net, shadow, batch, c);
    EXPECT_LE(now, prev);
    prev = now;
  }
}

namespace {

std::vector<LabeledStream> tiny_task(int per_class, std::uint64_t seed) {
  events::SynthOptions o;
  o.width = o.height = 16;
  o.duration_ms = 120;
  std::vector<LabeledStream> data;
  const int classes[] = {0, 4, 6};
  for (int c = 0; c < 3; ++c)
    for (int s = 0; s < per_class; ++s)
      data.push_back({events::synth_gesture(classes[c], seed * 100 + static_cast<std::uint64_t>(s), o),
                      static_cast<std::size_t>(c)});
  return data;
}

TrainerConfig tiny_config() {
  TrainerConfig c;
  c.epochs = 3;
  c.batch_size = 3;
  c.augment_limits = {1, 5.0, 100'000};
  c.optimizer.learning_rate = 1.0;
  c.init_gain = 2.0;
  c.seed = 9;
  return c;
}

}  // namespace

TEST(Train, ZeroLearningRateKeepsWeights) {
  const std::vector<std::string> toks{"N"};
  const auto net = snn::build_network({2, 16, 16}, toks, {}, 3);
  auto c = tiny_config();
  c.optimizer.learning_rate = 0.0;
  Rng rng(c.seed);
  const auto init = init_shadow(net, c.init_gain, rng);
  const auto r = train(net, init, tiny_task(2, 1), c);
  EXPECT_EQ(r.shadow, init);
  EXPECT_EQ(r.curve.size(), 3u);
}

TEST(Train, DeterministicInSeed) {
  const std::vector<std::string> toks{"4c3z", "4a", "N"};
  const auto net = snn::build_network({2, 16, 16}, toks, {}, 3);
  const auto data = tiny_task(2, 2);
  auto c = tiny_config();
  c.epochs = 2;
  for (const auto prec : {Precision::Hardware, Precision::Full}) {
    c.precision = prec;
    const auto a = train(net, data, c);
    const auto b = train(net, data, c);
    EXPECT_EQ(a.shadow, b.shadow);
    EXPECT_EQ(a.network, b.network);
    EXPECT_TRUE(a.network.layers[0].weights.valid());
    ASSERT_EQ(a.curve.size(), 2u);
    EXPECT_EQ(a.curve[0].loss, b.curve[0].loss);
  }
}

TEST(Train, Errors) {
  const std::vector<std::string> toks{"N"};
  const auto net = snn::build_network({2, 16, 16}, toks, {}, 3);
  const auto c = tiny_config();
  auto code = [&](std::vector<LabeledStream> d) {
    try {
      train(net, d, c);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  EXPECT_EQ(code({}), Errc::EmptyDataset);
  auto one_class = tiny_task(1, 3);
  one_class.resize(1);
  EXPECT_EQ(code(one_class), Errc::EmptyDataset);
  auto bad_label = tiny_task(1, 3);
  bad_label[0].label = 7;
  EXPECT_EQ(code(bad_label), Errc::LabelOutOfRange);
}

TEST(Train, TinyThreeClassTaskReachesNinetyPercent) {
  const std::vector<std::string> toks{"N"};
  const auto net = snn::build_network({2, 16, 16}, toks, {}, 3);
  auto c = tiny_config();
  c.epochs = 80;
  c.init_gain = 8.0;
  c.optimizer.learning_rate = 2.0;
  c.augment = false;
  c.target_true_per_100 = 20;
  c.target_false_per_100 = 2;
  const auto r = train(net, tiny_task(4, 4), c);
  ASSERT_EQ(r.curve.size(), 80u);
  EXPECT_GE(r.curve.back().accuracy, 0.9);
  EXPECT_LT(r.curve.back().loss, r.curve.front().loss);
}
