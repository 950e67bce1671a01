#include "soel/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <set>

#include "soel/error.hpp"
#include "soel/kernels.hpp"
#include "soel/simulator.hpp"

namespace soel::pretrain {

namespace {

using snn::LayerKind;
using snn::LayerSpec;
using snn::NetworkSpec;
namespace kernels = snn::kernels;

// Sparse per-step values: step k holds index[offset[k] .. offset[k+1]).
struct SparseSeq {
  std::vector<std::uint32_t> offset{0};
  std::vector<std::uint32_t> index;
  std::vector<double> value;

  template <class T>
  void push(std::span<const T> dense) {
    for (std::size_t j = 0; j < dense.size(); ++j) {
      if (dense[j] != T{}) {
        index.push_back(static_cast<std::uint32_t>(j));
        value.push_back(static_cast<double>(dense[j]));
      }
    }
    offset.push_back(static_cast<std::uint32_t>(index.size()));
  }
  void push_pairs(const std::vector<std::pair<std::uint32_t, double>>& pairs) {
    for (const auto& [i, v] : pairs) {
      index.push_back(i);
      value.push_back(v);
    }
    offset.push_back(static_cast<std::uint32_t>(index.size()));
  }
};

struct ForwardTrace {
  std::size_t n_steps = 0;
  std::vector<SparseSeq> input_of;  // activity entering layer l
  std::vector<SparseSeq> dsig;      // surrogate derivative per neuron layer
  std::vector<double> counts;
};

double decay_value(int decay) { return snn::decay_factor(decay).value(); }

ForwardTrace forward_hardware(const NetworkSpec& q, const events::SpikeFrameSequence& frames,
                              const SurrogateConfig& sg) {
  snn::Simulator sim(q, {snn::OverflowMode::Saturate, kernels::Backend::OpenMP});
  const std::size_t n_layers = q.layers.size();
  ForwardTrace tr;
  tr.n_steps = frames.n_steps;
  tr.input_of.resize(n_layers);
  tr.dsig.resize(n_layers);
  tr.counts.assign(q.output_size(), 0.0);
  std::vector<std::pair<std::uint32_t, double>> pairs;
  for (std::size_t k = 0; k < frames.n_steps; ++k) {
    sim.step(frames.frame(k));
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto in = l == 0 ? sim.input() : sim.activity(l - 1);
      tr.input_of[l].push(in);
      const LayerSpec& layer = q.layers[l];
      if (!layer.has_neurons()) continue;
      pairs.clear();
      const auto u = sim.membrane(l);
      const double theta = layer.params.u_threshold;
      for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = surrogate_derivative(u[i], sg, theta);
        if (d != 0.0) pairs.emplace_back(static_cast<std::uint32_t>(i), d);
      }
      tr.dsig[l].push_pairs(pairs);
    }
    const auto out = sim.activity(n_layers - 1);
    for (std::size_t i = 0; i < out.size(); ++i) tr.counts[i] += out[i];
  }
  return tr;
}

ForwardTrace forward_full(const NetworkSpec& net, const ShadowWeights& shadow, const events::SpikeFrameSequence& frames,
                          const TrainerConfig& cfg) {
  const std::size_t n_layers = net.layers.size();
  ForwardTrace tr;
  tr.n_steps = frames.n_steps;
  tr.input_of.resize(n_layers);
  tr.dsig.resize(n_layers);
  tr.counts.assign(net.output_size(), 0.0);

  std::vector<std::vector<double>> act(n_layers), drive(n_layers), cur(n_layers), volt(n_layers), refr(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t n = net.layers[l].out.size();
    act[l].assign(n, 0.0);
    drive[l].assign(n, 0.0);
    cur[l].assign(n, 0.0);
    volt[l].assign(n, 0.0);
    refr[l].assign(n, 0.0);
  }
  std::vector<double> input(net.input.size());
  std::vector<std::pair<std::uint32_t, double>> pairs;
  const bool ramp = cfg.spike_function == SpikeFunction::Ramp;
  const double hw = cfg.surrogate.half_width;
  const double scale = cfg.surrogate.scale;

  for (std::size_t k = 0; k < frames.n_steps; ++k) {
    const auto frame = frames.frame(k);
    std::transform(frame.begin(), frame.end(), input.begin(), [](std::uint8_t v) { return double(v); });
    for (std::size_t l = 0; l < n_layers; ++l) {
      const LayerSpec& layer = net.layers[l];
      const std::span<const double> in = l == 0 ? std::span<const double>(input) : std::span<const double>(act[l - 1]);
      tr.input_of[l].push(in);
      if (!layer.has_neurons()) {
        kernels::accumulate<double, double>(kernels::Backend::OpenMP, layer, {}, in, act[l]);
        continue;
      }
      kernels::accumulate<double, double>(kernels::Backend::OpenMP, layer, shadow[l], in, drive[l]);
      const auto& p = layer.params;
      const double ai = decay_value(p.current_decay);
      const double av = decay_value(p.voltage_decay);
      const double ar = decay_value(p.refractory_decay);
      const double theta = p.u_threshold;
      pairs.clear();
      for (std::size_t i = 0; i < act[l].size(); ++i) {
        cur[l][i] = ai * cur[l][i] + drive[l][i];
        double u = av * volt[l][i] + cur[l][i] + p.bias;
        const double d = surrogate_derivative(u, cfg.surrogate, theta);
        if (d != 0.0) pairs.emplace_back(static_cast<std::uint32_t>(i), d);
        double s;
        if (ramp) {
          s = scale * std::clamp(u - theta + hw, 0.0, 2.0 * hw);
        } else {
          s = u >= theta ? 1.0 : 0.0;
          if (p.reset == snn::ResetMode::HardReset) {
            if (s != 0.0) u = 0.0;
          } else {
            refr[l][i] = ar * refr[l][i] + s;
            u -= theta * refr[l][i];
          }
        }
        volt[l][i] = u;
        act[l][i] = s;
      }
      tr.dsig[l].push_pairs(pairs);
    }
    for (std::size_t i = 0; i < tr.counts.size(); ++i) tr.counts[i] += act[n_layers - 1][i];
  }
  return tr;
}

// Truncated response of the two-stage (current, voltage) filter:
// h[k] = (av^(k+1) - ai^(k+1)) / (av - ai) for k < L, and (k+1) av^k when
// the two decays coincide.
struct Kernel {
  double ai = 0.0;
  double av = 0.0;
  std::size_t L = 1;
  bool split = true;  // av != ai: two first-order recursions suffice
  std::vector<double> h;

  Kernel(const snn::NeuronParams& p, int truncation)
      : ai(decay_value(p.current_decay)), av(decay_value(p.voltage_decay)), L(static_cast<std::size_t>(truncation)) {
    split = std::abs(av - ai) > 1e-9;
    h.resize(L);
    for (std::size_t k = 0; k < L; ++k) {
      const double e = static_cast<double>(k);
      h[k] = split ? (std::pow(av, e + 1.0) - std::pow(ai, e + 1.0)) / (av - ai) : (e + 1.0) * std::pow(av, e);
    }
  }
};

// Pair of truncated first-order filters over a vector, run forward
// (causal, for input traces) or backward (anti-causal, for credit).
// value(j) = sum_{k<L} h[k] x[s -/+ k][j].
class TwoStageFilter {
 public:
  TwoStageFilter(const Kernel& k, std::size_t n) : k_(k), v_(n, 0.0), i_(n, 0.0) {
    avl_ = std::pow(k.av, static_cast<double>(k.L));
    ail_ = std::pow(k.ai, static_cast<double>(k.L));
  }
  // Shift by one step, then add `now` and drop the entry leaving the window.
  template <class Add, class Drop>
  void advance(Add&& add_now, Drop&& drop_old) {
    if (k_.split) {
      for (std::size_t j = 0; j < v_.size(); ++j) {
        v_[j] *= k_.av;
        i_[j] *= k_.ai;
      }
      add_now([&](std::size_t j, double x) {
        v_[j] += x;
        i_[j] += x;
      });
      drop_old([&](std::size_t j, double x) {
        v_[j] -= avl_ * x;
        i_[j] -= ail_ * x;
      });
    } else {
      // Direct sum over a history of sparse vectors.
      history_.emplace_back();
      add_now([&](std::size_t j, double x) { history_.back().emplace_back(j, x); });
      if (history_.size() > k_.L) history_.erase(history_.begin());
      std::fill(v_.begin(), v_.end(), 0.0);
      const std::size_t n = history_.size();
      for (std::size_t a = 0; a < n; ++a) {
        const double hk = k_.h[n - 1 - a];
        for (const auto& [j, x] : history_[a]) v_[j] += hk * x;
      }
    }
  }
  double value(std::size_t j) const {
    return k_.split ? (k_.av * v_[j] - k_.ai * i_[j]) / (k_.av - k_.ai) : v_[j];
  }

 private:
  const Kernel& k_;
  std::vector<double> v_, i_;
  double avl_ = 0.0, ail_ = 0.0;
  std::vector<std::vector<std::pair<std::size_t, double>>> history_;
};

template <class Fn>
void for_step(const SparseSeq& seq, std::size_t t, Fn&& fn) {
  for (std::uint32_t e = seq.offset[t]; e < seq.offset[t + 1]; ++e) fn(seq.index[e], seq.value[e]);
}

// dL/dx for every step and unit from sparse dL/dU (anti-causal filter).
void credit_to_drive(const SparseSeq& g_u, std::size_t n, std::size_t T, const Kernel& kern, std::vector<double>& gx) {
  gx.assign(T * n, 0.0);
  TwoStageFilter f(kern, n);
  for (std::size_t t = T; t-- > 0;) {
    f.advance([&](auto&& add) { for_step(g_u, t, add); },
              [&](auto&& drop) {
                if (t + kern.L < T) for_step(g_u, t + kern.L, drop);
              });
    double* row = gx.data() + t * n;
    for (std::size_t i = 0; i < n; ++i) row[i] = f.value(i);
  }
}

// Dense layer: dW[i][j] = sum_t gx[t][i] a[t][j].
void dense_weight_grad(const LayerSpec& layer, const SparseSeq& in_act, const std::vector<double>& gx, std::size_t T,
                       std::vector<double>& grad) {
  const std::size_t n_in = layer.in.size();
  const std::size_t n_out = layer.out.size();
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t i = 0; i < n_out; ++i) {
      const double g = gx[t * n_out + i];
      if (g == 0.0) continue;
      double* row = grad.data() + i * n_in;
      for_step(in_act, t, [&](std::uint32_t j, double a) { row[j] += g * a; });
    }
  }
}

// Conv layer: dW = sum_s g_u[s] * (h filtered input)[s], so only the steps
// and units with non-zero credit are visited.
void conv_weight_grad(const LayerSpec& layer, const SparseSeq& in_act, const SparseSeq& g_u, std::size_t T,
                      const Kernel& kern, std::vector<double>& grad) {
  TwoStageFilter pin(kern, layer.in.size());
  const int k = layer.kernel;
  const int pad = layer.padding();
  const int out_plane = layer.out.height * layer.out.width;
  for (std::size_t s = 0; s < T; ++s) {
    pin.advance([&](auto&& add) { for_step(in_act, s, add); },
                [&](auto&& drop) {
                  if (s >= kern.L) for_step(in_act, s - kern.L, drop);
                });
    for_step(g_u, s, [&](std::uint32_t n, double g) {
      const int o = static_cast<int>(n) / out_plane;
      const int oy = (static_cast<int>(n) % out_plane) / layer.out.width;
      const int ox = static_cast<int>(n) % layer.out.width;
      for (int c = 0; c < layer.in.channels; ++c) {
        double* wk = grad.data() + (static_cast<std::size_t>(o) * layer.in.channels + c) * k * k;
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * layer.stride + ky - pad;
          if (iy < 0 || iy >= layer.in.height) continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * layer.stride + kx - pad;
            if (ix < 0 || ix >= layer.in.width) continue;
            wk[ky * k + kx] += g * pin.value((static_cast<std::size_t>(c) * layer.in.height + iy) * layer.in.width + ix);
          }
        }
      }
    });
  }
}

// dL/d(activity of layer l) at one step and unit, routed through the layers
// above. gx[m] holds dL/dx of weighted layer m (dense, T x n) when needed.
class ActivityGrad {
 public:
  ActivityGrad(const NetworkSpec& net, const std::vector<std::vector<double>>& w,
               const std::vector<std::vector<double>>& gx, std::span<const double> g_top)
      : net_(net), w_(w), gx_(gx), g_top_(g_top) {}

  double at(std::size_t l, std::size_t t, std::size_t j) const {
    if (l + 1 == net_.layers.size()) return g_top_[j];
    const LayerSpec& up = net_.layers[l + 1];
    const int plane = up.in.height * up.in.width;
    const int c = static_cast<int>(j) / plane;
    const int y = (static_cast<int>(j) % plane) / up.in.width;
    const int x = static_cast<int>(j) % up.in.width;
    const std::size_t n_out = up.out.size();
    switch (up.kind) {
      case LayerKind::SumPool: {
        const int py = y / up.kernel;
        const int px = x / up.kernel;
        if (py >= up.out.height || px >= up.out.width) return 0.0;
        return up.pool_gain * at(l + 1, t, (static_cast<std::size_t>(c) * up.out.height + py) * up.out.width + px);
      }
      case LayerKind::Dense: {
        const double* g = gx_[l + 1].data() + t * n_out;
        const std::size_t n_in = up.in.size();
        double acc = 0.0;
        for (std::size_t m = 0; m < n_out; ++m) acc += w_[l + 1][m * n_in + j] * g[m];
        return acc;
      }
      case LayerKind::Conv: {
        const double* g = gx_[l + 1].data() + t * n_out;
        const int k = up.kernel;
        const int pad = up.padding();
        double acc = 0.0;
        for (int o = 0; o < up.out.channels; ++o) {
          const double* wk = w_[l + 1].data() + (static_cast<std::size_t>(o) * up.in.channels + c) * k * k;
          for (int ky = 0; ky < k; ++ky) {
            const int ny = y + pad - ky;
            if (ny < 0 || ny % up.stride != 0 || ny / up.stride >= up.out.height) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int nx = x + pad - kx;
              if (nx < 0 || nx % up.stride != 0 || nx / up.stride >= up.out.width) continue;
              acc += wk[ky * k + kx] *
                     g[(static_cast<std::size_t>(o) * up.out.height + ny / up.stride) * up.out.width + nx / up.stride];
            }
          }
        }
        return acc;
      }
    }
    return 0.0;
  }

 private:
  const NetworkSpec& net_;
  const std::vector<std::vector<double>>& w_;
  const std::vector<std::vector<double>>& gx_;
  std::span<const double> g_top_;
};

// Full backward pass of one sample.
ShadowWeights backward(const NetworkSpec& net, const std::vector<std::vector<double>>& w, const ForwardTrace& tr,
                       std::span<const double> g_top, int truncation) {
  const std::size_t n_layers = net.layers.size();
  const std::size_t T = tr.n_steps;
  std::size_t lowest = n_layers;
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (net.layers[l].has_neurons()) {
      lowest = l;
      break;
    }
  }
  ShadowWeights grad(n_layers);
  std::vector<std::vector<double>> gx(n_layers);
  const ActivityGrad g_act(net, w, gx, g_top);
  std::vector<std::pair<std::uint32_t, double>> pairs;
  for (std::size_t l = n_layers; l-- > lowest;) {
    const LayerSpec& layer = net.layers[l];
    if (!layer.has_neurons()) continue;
    SparseSeq g_u;
    for (std::size_t t = 0; t < T; ++t) {
      pairs.clear();
      for_step(tr.dsig[l], t, [&](std::uint32_t i, double d) {
        const double g = d * g_act.at(l, t, i);
        if (g != 0.0) pairs.emplace_back(i, g);
      });
      g_u.push_pairs(pairs);
    }
    const Kernel kern(layer.params, truncation);
    grad[l].assign(layer.weight_count(), 0.0);
    const bool feeds_lower = l > lowest;
    if (layer.kind == LayerKind::Dense || feeds_lower) credit_to_drive(g_u, layer.out.size(), T, kern, gx[l]);
    if (layer.kind == LayerKind::Dense) {
      dense_weight_grad(layer, tr.input_of[l], gx[l], T, grad[l]);
    } else {
      conv_weight_grad(layer, tr.input_of[l], g_u, T, kern, grad[l]);
    }
  }
  return grad;
}

struct ItemResult {
  ShadowWeights grad;
  double loss = 0.0;
  bool correct = false;
};

std::size_t argmax_low(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

void check_labels(const NetworkSpec& net, std::span<const LabeledFrames> batch) {
  if (batch.empty()) throw Error(Errc::EmptyDataset, "empty batch");
  for (const auto& item : batch) {
    if (item.label >= net.output_size()) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(item.label));
    if (item.frames == nullptr) throw Error(Errc::EmptyDataset, "missing frames");
  }
}

ForwardTrace run_forward(const NetworkSpec& net, const ShadowWeights& shadow, const NetworkSpec* deployed,
                         const LabeledFrames& item, const TrainerConfig& cfg) {
  if (cfg.precision == Precision::Hardware) return forward_hardware(*deployed, *item.frames, cfg.surrogate);
  return forward_full(net, shadow, *item.frames, cfg);
}

CountLoss item_loss(const ForwardTrace& tr, std::size_t label, const TrainerConfig& cfg) {
  const double scale = static_cast<double>(tr.n_steps) / 100.0;
  return spike_count_loss(tr.counts, label, cfg.target_true_per_100 * scale, cfg.target_false_per_100 * scale);
}

}  // namespace

double surrogate_derivative(double u, const SurrogateConfig& cfg, double u_threshold) {
  return std::abs(u - u_threshold) <= cfg.half_width ? cfg.scale : 0.0;
}

CountLoss spike_count_loss(std::span<const double> counts, std::size_t label, double target_true,
                           double target_false) {
  if (label >= counts.size()) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label));
  CountLoss out;
  out.grad_per_step.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double diff = (i == label ? target_true : target_false) - counts[i];
    out.loss += diff * diff;
    out.grad_per_step[i] = -2.0 * diff;
  }
  return out;
}

void TrainerConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (epochs < 0) bad("epochs must be >= 0");
  if (batch_size < 1) bad("batch_size must be >= 1");
  if (truncation < 1) bad("truncation must be >= 1");
  if (!(optimizer.learning_rate >= 0.0)) bad("learning rate must be >= 0");
  if (!(surrogate.half_width > 0.0) || !(surrogate.scale > 0.0)) bad("surrogate must be positive");
  if (augment_limits.window == 0) bad("window must be > 0");
  if (augment_limits.xy_jitter_max < 0 || augment_limits.rotation_max_deg < 0.0) bad("augment limits must be >= 0");
}

ShadowWeights init_shadow(const NetworkSpec& net, double gain, Rng& rng) {
  ShadowWeights shadow(net.layers.size());
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerSpec& layer = net.layers[l];
    if (!layer.has_neurons()) continue;
    const double fan_in = layer.kind == LayerKind::Dense
                              ? static_cast<double>(layer.in.size())
                              : static_cast<double>(layer.in.channels) * layer.kernel * layer.kernel;
    const double sd = gain * 256.0 / std::sqrt(fan_in);
    shadow[l].resize(layer.weight_count());
    for (double& w : shadow[l]) w = sd * rng.normal();
  }
  return shadow;
}

NetworkSpec deploy(const NetworkSpec& net, const ShadowWeights& shadow) {
  NetworkSpec out = net;
  for (std::size_t l = 0; l < out.layers.size(); ++l) {
    if (!out.layers[l].has_neurons()) continue;
    if (shadow[l].size() != out.layers[l].weight_count()) throw Error(Errc::ShapeMismatch, "shadow size");
    out.layers[l].weights = snn::quantize_weights(shadow[l]);
  }
  return out;
}

BatchGradients bptt_gradients(const NetworkSpec& net, const ShadowWeights& shadow, std::span<const LabeledFrames> batch,
                              const TrainerConfig& cfg, const TrainHooks* hooks) {
  check_labels(net, batch);
  const std::size_t n_layers = net.layers.size();
  NetworkSpec deployed;
  if (cfg.precision == Precision::Hardware) {
    deployed = deploy(net, shadow);
    if (hooks && hooks->on_forward) {
      for (std::size_t b = 0; b < batch.size(); ++b) hooks->on_forward(deployed);
    }
  }
  // Weights seen by the backward pass: exactly those of the forward pass.
  std::vector<std::vector<double>> w_used(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (!net.layers[l].has_neurons()) continue;
    if (cfg.precision == Precision::Hardware) {
      const auto& q = deployed.layers[l].weights.values;
      w_used[l].assign(q.begin(), q.end());
    } else {
      w_used[l] = shadow[l];
    }
  }
  std::vector<ItemResult> items(batch.size());
  const auto n_items = static_cast<std::int64_t>(batch.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t b = 0; b < n_items; ++b) {
    try {
      const auto u = static_cast<std::size_t>(b);
      ItemResult& res = items[u];
      const ForwardTrace tr = run_forward(net, shadow, &deployed, batch[u], cfg);
      const CountLoss cl = item_loss(tr, batch[u].label, cfg);
      res.loss = cl.loss;
      res.correct = argmax_low(tr.counts) == batch[u].label;
      res.grad = backward(net, w_used, tr, cl.grad_per_step, cfg.truncation);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  BatchGradients out;
  out.grad.resize(n_layers);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (!net.layers[l].has_neurons()) continue;
    out.grad[l].assign(net.layers[l].weight_count(), 0.0);
    for (const auto& item : items) {
      for (std::size_t i = 0; i < out.grad[l].size(); ++i) out.grad[l][i] += item.grad[l][i] * inv;
    }
  }
  for (const auto& item : items) {
    out.loss += item.loss * inv;
    out.correct += item.correct ? 1 : 0;
  }
  return out;
}

double evaluate_loss(const NetworkSpec& net, const ShadowWeights& shadow, std::span<const LabeledFrames> batch,
                     const TrainerConfig& cfg) {
  check_labels(net, batch);
  NetworkSpec deployed;
  if (cfg.precision == Precision::Hardware) deployed = deploy(net, shadow);
  double total = 0.0;
  for (const auto& item : batch) total += item_loss(run_forward(net, shadow, &deployed, item, cfg), item.label, cfg).loss;
  return total / static_cast<double>(batch.size());
}

events::SpikeFrameSequence prepare_input(const NetworkSpec& net, const events::EventStream& stream,
                                         const TrainerConfig& cfg, Rng* rng) {
  const auto side = static_cast<std::uint16_t>(net.input.width);
  if (net.input.width != net.input.height) throw Error(Errc::ShapeMismatch, "input must be square");
  events::EventStream s = stream.width == side && stream.height == side ? stream : events::downscale(stream, side);
  events::AugmentTransform tf;
  if (rng != nullptr) {
    tf = events::sample_augment(s, cfg.augment_limits, *rng);
  } else {
    if (s.duration < cfg.augment_limits.window) {
      throw Error(Errc::StreamShorterThanWindow, "stream is shorter than the presentation window");
    }
    tf.window_start = (s.duration - cfg.augment_limits.window) / 2;
    tf.window = cfg.augment_limits.window;
  }
  return events::bin_events(events::apply_augment(s, tf), 1000, side, side);
}

TrainResult train(const NetworkSpec& net, std::span<const LabeledStream> data, const TrainerConfig& cfg,
                  const TrainHooks* hooks) {
  cfg.validate();
  Rng init = Rng::stream(cfg.seed, "init");
  return train(net, init_shadow(net, cfg.init_gain, init), data, cfg, hooks);
}

TrainResult train(const NetworkSpec& net, ShadowWeights initial, std::span<const LabeledStream> data,
                  const TrainerConfig& cfg, const TrainHooks* hooks) {
  cfg.validate();
  net.validate();
  if (data.empty()) throw Error(Errc::EmptyDataset, "no training samples");
  std::set<std::size_t> classes;
  for (const auto& d : data) {
    if (d.label >= net.output_size()) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(d.label));
    classes.insert(d.label);
  }
  if (classes.size() < 2) throw Error(Errc::EmptyDataset, "need at least two classes");

  TrainResult res;
  res.shadow = std::move(initial);
  if (res.shadow.size() != net.layers.size()) throw Error(Errc::ShapeMismatch, "shadow layer count");
  std::vector<AdaptiveMoment> opt;
  std::vector<std::size_t> opt_layer;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    if (!net.layers[l].has_neurons()) continue;
    opt.emplace_back(cfg.optimizer, net.layers[l].weight_count());
    opt_layer.push_back(l);
  }
  Rng aug = Rng::stream(cfg.seed, "augment");
  Rng order = Rng::stream(cfg.seed, "order");

  std::vector<std::size_t> perm(data.size());
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = perm.size(); i-- > 1;) {
      std::swap(perm[i], perm[static_cast<std::size_t>(order.uniform_int(0, static_cast<std::int64_t>(i)))]);
    }
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < perm.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(perm.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<events::SpikeFrameSequence> frames;
      frames.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        frames.push_back(prepare_input(net, data[perm[i]].stream, cfg, cfg.augment ? &aug : nullptr));
      }
      std::vector<LabeledFrames> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back({&frames[i - start], data[perm[i]].label});
      const BatchGradients g = bptt_gradients(net, res.shadow, batch, cfg, hooks);
      if (!std::isfinite(g.loss)) throw Error(Errc::DivergedLoss, "loss is not finite at epoch " + std::to_string(epoch));
      for (std::size_t o = 0; o < opt.size(); ++o) {
        const std::size_t l = opt_layer[o];
        for (double v : g.grad[l]) {
          if (!std::isfinite(v)) throw Error(Errc::DivergedLoss, "gradient is not finite");
        }
        opt[o].step(res.shadow[l], g.grad[l]);
      }
      loss_sum += g.loss * static_cast<double>(batch.size());
      correct += g.correct;
    }
    res.curve.push_back({epoch, loss_sum / static_cast<double>(data.size()),
                         static_cast<double>(correct) / static_cast<double>(data.size())});
  }
  res.network = deploy(net, res.shadow);
  return res;
}

}  // namespace soel::pretrain
