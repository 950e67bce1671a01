#include "soel/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "soel/checkpoint.hpp"
#include "soel/error.hpp"

namespace soel::app {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& what) { throw Error(Errc::InvalidConfig, what); }

void only_keys(const json& j, const std::string& section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(section + " must be an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!allowed.contains(k)) bad("unknown key " + section + "." + k);
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    bad("bad value for " + section + "." + key);
  }
}

}  // namespace

std::string to_string(Precision p) { return p == Precision::Hardware ? "hw" : "full"; }

Precision precision_from_string(const std::string& s) {
  if (s == "hw") return Precision::Hardware;
  if (s == "full") return Precision::Full;
  bad("precision must be hw or full, got " + s);
}

void RunConfig::resolve() {
  pretrain.seed = seed;
  pretrain.precision = precision;
  soel.precision = precision;
  pretrain.validate();
  soel.validate();
  network.neuron.validate();
  if (network.input_size < 1) bad("network.input_size must be positive");
  if (network.layers.empty()) bad("network.layers is empty");
  if (data.classes < 2 || data.classes > events::gesture_catalog().size()) bad("data.classes must be in [2, 11]");
  if (data.samples_per_class < 1) bad("data.samples_per_class must be positive");
  if (fewshot.folds < 2) bad("fewshot.folds must be >= 2");
  if (fewshot.window_ms == 0) bad("fewshot.window_ms must be positive");
  for (int k : fewshot.shots) {
    if (k < 0) bad("fewshot.shots must be >= 0");
  }
  if (fewshot.n_novel < 1) bad("fewshot.n_novel must be >= 1");
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  only_keys(j, "config", {"seed", "precision", "data", "network", "pretrain", "soel", "fewshot"});
  read(j, "seed", c.seed, "config");
  if (j.contains("precision")) {
    std::string p;
    read(j, "precision", p, "config");
    c.precision = precision_from_string(p);
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    const std::string s = "data";
    only_keys(d, s,
              {"classes", "samples_per_class", "width", "height", "duration_ms", "max_event_rate", "noise_rate",
               "dir"});
    read(d, "classes", c.data.classes, s);
    read(d, "samples_per_class", c.data.samples_per_class, s);
    read(d, "width", c.data.synth.width, s);
    read(d, "height", c.data.synth.height, s);
    read(d, "duration_ms", c.data.synth.duration_ms, s);
    read(d, "max_event_rate", c.data.synth.max_event_rate, s);
    read(d, "noise_rate", c.data.synth.noise_rate, s);
    read(d, "dir", c.data.dir, s);
  }
  if (j.contains("network")) {
    const json& n = j.at("network");
    only_keys(n, "network", {"input_size", "layers", "neuron"});
    read(n, "input_size", c.network.input_size, "network");
    read(n, "layers", c.network.layers, "network");
    if (n.contains("neuron")) {
      try {
        c.network.neuron = snn::neuron_params_from_json(n.at("neuron"), c.network.neuron);
      } catch (const Error&) {
        throw;
      } catch (const std::exception& e) {
        bad(std::string("network.neuron: ") + e.what());
      }
    }
  }
  if (j.contains("pretrain")) {
    const json& p = j.at("pretrain");
    const std::string s = "pretrain";
    only_keys(p, s,
              {"epochs", "batch_size", "optimizer", "learning_rate", "beta1", "beta2", "epsilon", "truncation",
               "target_true_per_100", "target_false_per_100", "surrogate_half_width", "surrogate_scale", "augment",
               "xy_jitter_max", "rotation_max_deg", "window_ms", "init_gain"});
    auto& t = c.pretrain;
    read(p, "epochs", t.epochs, s);
    read(p, "batch_size", t.batch_size, s);
    if (p.contains("optimizer")) {
      std::string name;
      read(p, "optimizer", name, s);
      try {
        t.optimizer.kind = pretrain::optimizer_from_string(name);
      } catch (const std::exception&) {
        bad("pretrain.optimizer must be adam or nadam");
      }
    }
    read(p, "learning_rate", t.optimizer.learning_rate, s);
    read(p, "beta1", t.optimizer.beta1, s);
    read(p, "beta2", t.optimizer.beta2, s);
    read(p, "epsilon", t.optimizer.epsilon, s);
    read(p, "truncation", t.truncation, s);
    read(p, "target_true_per_100", t.target_true_per_100, s);
    read(p, "target_false_per_100", t.target_false_per_100, s);
    read(p, "surrogate_half_width", t.surrogate.half_width, s);
    read(p, "surrogate_scale", t.surrogate.scale, s);
    read(p, "augment", t.augment, s);
    read(p, "xy_jitter_max", t.augment_limits.xy_jitter_max, s);
    read(p, "rotation_max_deg", t.augment_limits.rotation_max_deg, s);
    if (p.contains("window_ms")) {
      std::uint64_t ms = 0;
      read(p, "window_ms", ms, s);
      t.augment_limits.window = ms * 1000;
    }
    read(p, "init_gain", t.init_gain, s);
  }
  if (j.contains("soel")) {
    const json& p = j.at("soel");
    const std::string s = "soel";
    only_keys(p, s,
              {"eta", "C", "T", "theta_init", "theta_inc", "theta_dec", "theta_min", "target_active",
               "target_inactive", "alpha1", "alpha2", "impulse", "sigma", "gate_half_width", "baseline_eta"});
    auto& o = c.soel;
    read(p, "eta", o.eta, s);
    read(p, "C", o.C, s);
    read(p, "T", o.T, s);
    read(p, "theta_init", o.theta_init, s);
    read(p, "theta_inc", o.theta_inc, s);
    read(p, "theta_dec", o.theta_dec, s);
    read(p, "theta_min", o.theta_min, s);
    read(p, "target_active", o.target_active, s);
    read(p, "target_inactive", o.target_inactive, s);
    read(p, "alpha1", o.alpha1, s);
    read(p, "alpha2", o.alpha2, s);
    read(p, "impulse", o.impulse, s);
    if (p.contains("sigma")) {
      std::string m;
      read(p, "sigma", m, s);
      if (m == "straight_through") {
        o.sigma = plasticity::SigmaMode::StraightThrough;
      } else if (m == "gated") {
        o.sigma = plasticity::SigmaMode::Gated;
      } else {
        bad("soel.sigma must be straight_through or gated");
      }
    }
    read(p, "gate_half_width", o.gate_half_width, s);
    read(p, "baseline_eta", o.baseline_eta, s);
  }
  if (j.contains("fewshot")) {
    const json& f = j.at("fewshot");
    const std::string s = "fewshot";
    only_keys(f, s, {"n_pretrain", "n_novel", "shots", "folds", "window_ms", "checkpoint"});
    read(f, "n_pretrain", c.fewshot.n_pretrain, s);
    read(f, "n_novel", c.fewshot.n_novel, s);
    read(f, "shots", c.fewshot.shots, s);
    read(f, "folds", c.fewshot.folds, s);
    read(f, "window_ms", c.fewshot.window_ms, s);
    read(f, "checkpoint", c.fewshot.checkpoint, s);
  }
  return c;
}

json to_json(const RunConfig& c) {
  const auto& t = c.pretrain;
  const auto& o = c.soel;
  return json{
      {"seed", c.seed},
      {"precision", to_string(c.precision)},
      {"data",
       {{"classes", c.data.classes},
        {"samples_per_class", c.data.samples_per_class},
        {"width", c.data.synth.width},
        {"height", c.data.synth.height},
        {"duration_ms", c.data.synth.duration_ms},
        {"max_event_rate", c.data.synth.max_event_rate},
        {"noise_rate", c.data.synth.noise_rate},
        {"dir", c.data.dir}}},
      {"network",
       {{"input_size", c.network.input_size},
        {"layers", c.network.layers},
        {"neuron", snn::to_json(c.network.neuron)}}},
      {"pretrain",
       {{"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"optimizer", pretrain::to_string(t.optimizer.kind)},
        {"learning_rate", t.optimizer.learning_rate},
        {"beta1", t.optimizer.beta1},
        {"beta2", t.optimizer.beta2},
        {"epsilon", t.optimizer.epsilon},
        {"truncation", t.truncation},
        {"target_true_per_100", t.target_true_per_100},
        {"target_false_per_100", t.target_false_per_100},
        {"surrogate_half_width", t.surrogate.half_width},
        {"surrogate_scale", t.surrogate.scale},
        {"augment", t.augment},
        {"xy_jitter_max", t.augment_limits.xy_jitter_max},
        {"rotation_max_deg", t.augment_limits.rotation_max_deg},
        {"window_ms", t.augment_limits.window / 1000},
        {"init_gain", t.init_gain}}},
      {"soel",
       {{"eta", o.eta},
        {"C", o.C},
        {"T", o.T},
        {"theta_init", o.theta_init},
        {"theta_inc", o.theta_inc},
        {"theta_dec", o.theta_dec},
        {"theta_min", o.theta_min},
        {"target_active", o.target_active},
        {"target_inactive", o.target_inactive},
        {"alpha1", o.alpha1},
        {"alpha2", o.alpha2},
        {"impulse", o.impulse},
        {"sigma", o.sigma == plasticity::SigmaMode::Gated ? "gated" : "straight_through"},
        {"gate_half_width", o.gate_half_width},
        {"baseline_eta", o.baseline_eta}}},
      {"fewshot",
       {{"n_pretrain", c.fewshot.n_pretrain},
        {"n_novel", c.fewshot.n_novel},
        {"shots", c.fewshot.shots},
        {"folds", c.fewshot.folds},
        {"window_ms", c.fewshot.window_ms},
        {"checkpoint", c.fewshot.checkpoint}}},
  };
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::InvalidConfig, "cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    bad(path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace soel::app
