#include "soel/plasticity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "soel/error.hpp"
#include "soel/kernels.hpp"

namespace soel::plasticity {

namespace {

namespace kernels = snn::kernels;

void check_layer(const snn::LayerSpec& layer) {
  if (layer.kind != snn::LayerKind::Dense) throw Error(Errc::InvalidNetwork, "plastic layer must be dense");
  if (layer.weights.values.size() != layer.weight_count()) throw Error(Errc::InvalidNetwork, "weights not sized");
}

void check_features(const snn::LayerSpec& layer, const snn::Raster& features, int T) {
  if (features.width != layer.in.size()) {
    throw Error(Errc::ShapeMismatch, "features have " + std::to_string(features.width) + " units, layer expects " +
                                         std::to_string(layer.in.size()));
  }
  if (features.n_steps() < static_cast<std::size_t>(T)) {
    throw Error(Errc::PresentationTooShort, std::to_string(features.n_steps()) + " steps is shorter than one window");
  }
}

// Dense-layer stepping shared by the engine, the baseline and inference.
struct LayerRunner {
  const snn::LayerSpec& layer;
  snn::OverflowMode overflow;
  std::vector<std::int32_t> in, drive, spikes, membrane;
  std::vector<snn::NeuronState> states;

  LayerRunner(const snn::LayerSpec& l, snn::OverflowMode ov)
      : layer(l),
        overflow(ov),
        in(l.in.size()),
        drive(l.out.size()),
        spikes(l.out.size()),
        membrane(l.out.size()),
        states(l.out.size()) {}

  void step(const snn::Raster& features, std::size_t k) {
    features.expand(k, in);
    kernels::accumulate<std::int16_t, std::int32_t>(kernels::Backend::Serial, layer, layer.weights.values,
                                                    std::span<const std::int32_t>(in), drive);
    kernels::step_neurons(kernels::Backend::Serial, states, layer.params, drive, spikes, membrane, overflow);
  }
};

std::span<std::int16_t> row_of(snn::LayerSpec& layer, std::size_t i) {
  const std::size_t n_in = layer.in.size();
  return {layer.weights.values.data() + i * n_in, n_in};
}

}  // namespace

double stochastic_round(double value, const Grid& grid, Rng& rng) {
  const double v = std::clamp(value, grid.lo, grid.hi);
  const double pos = (v - grid.lo) / grid.step;
  const double below = std::floor(pos);
  const double frac = pos - below;
  if (frac == 0.0) return grid.lo + below * grid.step;
  return grid.lo + (rng.uniform() < frac ? below + 1.0 : below) * grid.step;
}

void SoelConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(Errc::InvalidConfig, what); };
  if (T < 1) bad("T must be >= 1");
  if (C <= 0) bad("C must be positive");
  if (theta_inc < 0 || theta_dec < 0) bad("threshold adaptation constants must be >= 0");
  if (theta_min < 0 || theta_init < theta_min) bad("theta_init must be >= theta_min >= 0");
  if (target_active < 0 || target_inactive < 0) bad("targets must be >= 0");
  if (!(alpha1 >= 0.0 && alpha1 < alpha2 && alpha2 < 1.0)) bad("need 0 <= alpha1 < alpha2 < 1");
  if (!(impulse > 0.0)) bad("impulse must be positive");
  if (!(eta > 0.0) || !(baseline_eta > 0.0)) bad("learning rates must be positive");
  if (!(gate_half_width > 0.0)) bad("gate_half_width must be positive");
}

void update_traces(TraceState& traces, std::span<const std::int32_t> activity, double impulse, Precision precision,
                   Rng& rng) {
  if (activity.size() != traces.x1.size()) throw Error(Errc::ShapeMismatch, "trace/activity size");
  for (std::size_t j = 0; j < activity.size(); ++j) {
    const double in = impulse * activity[j];
    double x1 = traces.alpha1 * traces.x1[j] + in;
    double x2 = traces.alpha2 * traces.x2[j] + in;
    if (precision == Precision::Hardware) {
      x1 = stochastic_round(x1, kTraceGrid, rng);
      x2 = stochastic_round(x2, kTraceGrid, rng);
    }
    traces.x1[j] = x1;
    traces.x2[j] = x2;
  }
}

ErrorEvent error_event(int err, int theta, int C) {
  if (C + err < 0) {
    throw Error(Errc::OffsetUnderflow, "C + err = " + std::to_string(C + err) + " is negative");
  }
  if (err > theta || err < -theta) return {C + err, true};
  return {C, false};
}

int adapt_threshold(int theta, bool triggered, const SoelConfig& cfg) {
  if (triggered) return theta + cfg.theta_inc;
  return std::max(cfg.theta_min, theta - cfg.theta_dec);
}

double PlasticityRule::evaluate(double x1, double x2, double error) const {
  double total = 0.0;
  for (const Term& term : terms) {
    double prod = term.scale;
    for (const Factor& f : term.factors) {
      double v = 0.0;
      switch (f.var) {
        case Factor::Var::PreX1: v = x1; break;
        case Factor::Var::PreX2: v = x2; break;
        case Factor::Var::PostError: v = error; break;
        case Factor::Var::Constant: break;
      }
      prod *= v + f.offset;
    }
    total += prod;
  }
  return total;
}

void PlasticityRule::validate() const {
  if (terms.empty()) throw Error(Errc::InvalidConfig, "plasticity rule has no terms");
}

std::string PlasticityRule::str() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    if (k) os << " + ";
    os << terms[k].scale;
    for (const Factor& f : terms[k].factors) {
      static const char* names[] = {"X1", "X2", "E", "1"};
      os << " * (" << names[static_cast<int>(f.var)];
      if (f.offset != 0.0) os << (f.offset > 0 ? " + " : " - ") << std::abs(f.offset);
      os << ")";
    }
  }
  return os.str();
}

PlasticityRule soel_rule(double eta, int C) {
  using V = Factor::Var;
  const Factor err{V::PostError, -static_cast<double>(C)};
  return {{Term{eta, {err, Factor{V::PreX2, 0.0}}}, Term{-eta, {err, Factor{V::PreX1, 0.0}}}}};
}

std::size_t apply_rule(std::span<std::int16_t> row, const PlasticityRule& rule, int E, const TraceState& traces,
                       double sigma, Rng& rng) {
  if (row.size() != traces.x1.size()) throw Error(Errc::ShapeMismatch, "weight row/trace size");
  std::size_t written = 0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double dw = sigma * rule.evaluate(traces.x1[j], traces.x2[j], E);
    if (dw == 0.0) continue;
    row[j] = static_cast<std::int16_t>(stochastic_round(row[j] + dw, kWeightGrid, rng));
    ++written;
  }
  return written;
}

std::size_t apply_update(std::span<std::int16_t> row, int E, int C, double eta, const TraceState& traces, Rng& rng) {
  return apply_rule(row, soel_rule(eta, C), E, traces, 1.0, rng);
}

SoelEngine::SoelEngine(snn::LayerSpec& layer, SoelConfig cfg, Rng rng)
    : layer_(&layer), cfg_(cfg), rng_(rng), rule_(soel_rule(cfg.eta, cfg.C)) {
  cfg_.validate();
  check_layer(layer);
  neurons_.assign(layer.out.size(), PlasticNeuronState{0, cfg_.theta_init, true, cfg_.C});
}

PresentResult SoelEngine::present(const snn::Raster& features, std::size_t label, bool learning) {
  check_features(*layer_, features, cfg_.T);
  const std::size_t n_out = layer_->out.size();
  if (learning && label >= n_out) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label));
  LayerRunner run(*layer_, cfg_.overflow);
  TraceState traces(layer_->in.size(), cfg_.alpha1, cfg_.alpha2);
  PresentResult res;
  res.output_counts.assign(n_out, 0);
  for (auto& n : neurons_) n.spike_count = 0;
  const auto T = static_cast<std::size_t>(cfg_.T);
  const double theta_u = layer_->params.u_threshold;

  for (std::size_t k = 0; k < features.n_steps(); ++k) {
    run.step(features, k);
    if (learning) update_traces(traces, run.in, cfg_.impulse, cfg_.precision, rng_);
    for (std::size_t i = 0; i < n_out; ++i) {
      res.output_counts[i] += run.spikes[i];
      neurons_[i].spike_count += run.spikes[i];
    }
    if (!learning || (k + 1) % T != 0) continue;
    for (std::size_t i = 0; i < n_out; ++i) {
      PlasticNeuronState& n = neurons_[i];
      if (!n.learning) continue;
      const int target = i == label ? cfg_.target_active : cfg_.target_inactive;
      const int err = compute_error(target, n.spike_count);
      const ErrorEvent ev = error_event(err, n.theta, cfg_.C);
      WindowLogEntry entry{k, i, err, n.theta, ev.triggered, ev.E, 0};
      n.E = ev.E;
      if (ev.triggered) {
        double sigma = 1.0;
        if (cfg_.sigma == SigmaMode::Gated) {
          sigma = std::abs(run.membrane[i] - theta_u) <= cfg_.gate_half_width ? 1.0 : 0.0;
        }
        entry.updates_applied = apply_rule(row_of(*layer_, i), rule_, ev.E, traces, sigma, rng_);
        res.updates += entry.updates_applied;
        ++res.windows_triggered;
        n.spike_count = 0;
      }
      n.theta = adapt_threshold(n.theta, ev.triggered, cfg_);
      res.log.push_back(entry);
    }
  }
  return res;
}

PresentResult soel_present(snn::LayerSpec& layer, const snn::Raster& features, std::size_t label,
                           const SoelConfig& cfg, Rng& rng) {
  SoelEngine engine(layer, cfg, rng);
  PresentResult res = engine.present(features, label);
  return res;
}

std::vector<std::int64_t> infer_counts(const snn::LayerSpec& layer, const snn::Raster& features,
                                       snn::OverflowMode overflow) {
  check_layer(layer);
  if (features.width != layer.in.size()) throw Error(Errc::ShapeMismatch, "feature width");
  LayerRunner run(layer, overflow);
  std::vector<std::int64_t> counts(layer.out.size(), 0);
  for (std::size_t k = 0; k < features.n_steps(); ++k) {
    run.step(features, k);
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += run.spikes[i];
  }
  return counts;
}

PresentResult baseline_present(snn::LayerSpec& layer, const snn::Raster& features, std::size_t label,
                               const SoelConfig& cfg, Rng& rng) {
  cfg.validate();
  check_layer(layer);
  check_features(layer, features, cfg.T);
  const std::size_t n_out = layer.out.size();
  if (label >= n_out) throw Error(Errc::LabelOutOfRange, "label " + std::to_string(label));
  LayerRunner run(layer, cfg.overflow);
  TraceState traces(layer.in.size(), cfg.alpha1, cfg.alpha2);
  PresentResult res;
  res.output_counts.assign(n_out, 0);
  for (std::size_t k = 0; k < features.n_steps(); ++k) {
    run.step(features, k);
    update_traces(traces, run.in, cfg.impulse, cfg.precision, rng);
    for (std::size_t i = 0; i < n_out; ++i) {
      res.output_counts[i] += run.spikes[i];
      const double y = (i == label ? cfg.target_active : cfg.target_inactive) / static_cast<double>(cfg.T);
      const double err = y - run.spikes[i];
      if (err == 0.0) continue;
      auto row = row_of(layer, i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double dw = cfg.baseline_eta * err * traces.p(j);
        if (dw == 0.0) continue;
        row[j] = static_cast<std::int16_t>(stochastic_round(row[j] + dw, kWeightGrid, rng));
        ++res.updates;
      }
    }
  }
  return res;
}

std::string window_log_csv(std::span<const WindowLogEntry> log) {
  std::ostringstream os;
  os << "step,neuron,err,theta,triggered,E,updates_applied\n";
  for (const auto& e : log) {
    os << e.step << ',' << e.neuron << ',' << e.err << ',' << e.theta << ',' << (e.triggered ? 1 : 0) << ',' << e.E
       << ',' << e.updates_applied << '\n';
  }
  return os.str();
}

}  // namespace soel::plasticity
