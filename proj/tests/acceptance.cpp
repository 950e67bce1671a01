// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only
// when all pass.
//   acceptance [--soelsim PATH] [--config PATH] [--tiny PATH] [--seeds N] [--only DIGITS]

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "soel/config.hpp"
#include "soel/error.hpp"
#include "soel/fewshot.hpp"
#include "soel/plasticity.hpp"
#include "soel/pretrain.hpp"

namespace fs = std::filesystem;
using namespace soel;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 ---------------------------------------------------------------------

Outcome gradient_oracle() {
  const auto t0 = Clock::now();
  const std::vector<std::string> toks{"4", "N"};
  const auto net = snn::build_network({2, 1, 1}, toks, {}, 2);
  Rng rng(2024);
  const auto shadow = pretrain::init_shadow(net, 1.0, rng);
  events::SpikeFrameSequence f;
  f.width = f.height = 1;
  f.n_steps = 20;
  for (std::size_t i = 0; i < 2 * f.n_steps; ++i) f.data.push_back(rng.bernoulli(0.6) ? 1 : 0);

  pretrain::TrainerConfig c;
  c.precision = Precision::Full;
  c.spike_function = pretrain::SpikeFunction::Ramp;
  c.surrogate = {20000.0, 1.0 / 40000.0};
  c.truncation = 1000;
  const std::vector<pretrain::LabeledFrames> batch{{&f, 0}};
  const auto g = pretrain::bptt_gradients(net, shadow, batch, c);

  // Central differences at several step sizes; the smallest error per
  // weight is reported, which keeps roundoff and curvature out of the way.
  double max_rel = 0.0;
  std::size_t nonzero = 0, total = 0;
  for (std::size_t l = 0; l < shadow.size(); ++l) {
    for (std::size_t k = 0; k < shadow[l].size(); ++k) {
      double best = 1e300;
      for (const double h : {1e-2, 3e-3, 1e-3, 3e-4}) {
        auto plus = shadow, minus = shadow;
        plus[l][k] += h;
        minus[l][k] -= h;
        const double fd =
            (pretrain::evaluate_loss(net, plus, batch, c) - pretrain::evaluate_loss(net, minus, batch, c)) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(g.grad[l][k]), 1e-8});
        best = std::min(best, std::abs(fd - g.grad[l][k]) / scale);
      }
      max_rel = std::max(max_rel, best);
      nonzero += g.grad[l][k] != 0.0;
      ++total;
    }
  }
  const double secs = seconds_since(t0);
  return {max_rel < 1e-4 && secs < 10.0 && nonzero == total,
          fmt("max rel err %.2e over %zu weights (%zu non-zero), %.2fs", max_rel, total, nonzero, secs)};
}

// 2 ---------------------------------------------------------------------

Outcome trace_equivalence() {
  const auto t0 = Clock::now();
  const double a1 = 0.75, a2 = 0.96875;
  // P[t+1] = a2 P[t] + (1 - a2) Q[t], Q[t+1] = a1 Q[t] + (1 - a1) S[t].
  // update_traces folds S[t] into X[t], so X[t] lines up with P[t+1].
  std::vector<double> xs, ps;
  Rng rng(77);
  for (int train = 0; train < 100; ++train) {
    const double rate = rng.uniform(0.02, 0.5);
    plasticity::TraceState tr(1, a1, a2);
    double p = 0.0, q = 0.0;
    for (int t = 0; t < 200; ++t) {
      const std::int32_t s = rng.bernoulli(rate) ? 1 : 0;
      const double p_next = a2 * p + (1 - a2) * q;
      const double q_next = a1 * q + (1 - a1) * s;
      p = p_next;
      q = q_next;
      const std::vector<std::int32_t> act{s};
      plasticity::update_traces(tr, act, 1.0, Precision::Full, rng);
      xs.push_back(tr.p(0));
      ps.push_back(p);
    }
  }
  double sxx = 0.0, sxp = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += xs[i] * xs[i];
    sxp += xs[i] * ps[i];
  }
  const double c = sxp / sxx;
  double dev = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) dev = std::max(dev, std::abs(ps[i] - c * xs[i]));
  const double expected = (1 - a1) * (1 - a2) / (a2 - a1);
  const double secs = seconds_since(t0);
  return {dev < 1e-9 && secs < 5.0,
          fmt("fitted c %.12f (closed form %.12f), max dev %.2e, %.3fs", c, expected, dev, secs)};
}

// 3 ---------------------------------------------------------------------

Outcome soel_semantics() {
  const auto t0 = Clock::now();
  const int C = 64;
  std::size_t bad = 0, cases = 0;
  Rng rng(3);
  for (int err = -20; err <= 20; ++err) {
    for (int theta = 0; theta <= 10; ++theta) {
      ++cases;
      const auto ev = plasticity::error_event(err, theta, C);
      const bool trig = std::abs(err) > theta;
      if (ev.triggered != trig) ++bad;
      if (trig && ev.E - C != err) ++bad;
      if (!trig && ev.E != C) ++bad;

      // Positive traces: X2 > X1 >= 0.
      plasticity::TraceState tr(3, 0.75, 0.96875);
      tr.x1 = {0.0, 3.0, 10.0};
      tr.x2 = {64.0, 67.0, 74.0};
      std::vector<std::int16_t> row(3, 0);
      plasticity::apply_update(row, ev.E, C, 1.0 / 32.0, tr, rng);
      const auto rule = plasticity::soel_rule(1.0 / 32.0, C);
      for (std::size_t j = 0; j < 3; ++j) {
        const int sign = (err > 0) - (err < 0);
        const int want = trig ? sign : 0;
        const int got = (row[j] > 0) - (row[j] < 0);
        const double d = rule.evaluate(tr.x1[j], tr.x2[j], ev.E);
        const int rule_sign = (d > 0) - (d < 0);
        if (got != want || rule_sign != want) ++bad;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 1.0, fmt("%zu cases, %zu violations, %.4fs", cases, bad, secs)};
}

// 4, 5, 6a, 8 ------------------------------------------------------------

struct SeedRun {
  std::uint64_t seed = 0;
  std::map<int, fewshot::CrossValReport> by_shots;
  std::vector<fewshot::ForgettingReport> forgetting;
  bool weights_on_grid = true;
  double pretrain_final_loss = 0.0;
};

struct FewshotSuite {
  std::vector<SeedRun> runs;
  double seconds = 0.0;
  std::string error;
};

FewshotSuite run_fewshot_suite(const app::RunConfig& base, int n_seeds) {
  FewshotSuite suite;
  const auto t0 = Clock::now();
  try {
    for (int i = 0; i < n_seeds; ++i) {
      app::RunConfig cfg = base;
      cfg.seed = static_cast<std::uint64_t>(i + 1);
      cfg.resolve();
      SeedRun run;
      run.seed = cfg.seed;
      const auto ds =
          fewshot::synth_dataset(cfg.data.classes, cfg.data.samples_per_class, cfg.seed, cfg.data.synth);

      std::vector<pretrain::LabeledStream> data;
      std::vector<std::size_t> novel_idx;
      for (std::size_t s = 0; s < ds.samples.size(); ++s) {
        const std::size_t c = ds.samples[s].class_id;
        if (c % 2 == 0 && c / 2 < cfg.fewshot.n_pretrain) data.push_back({ds.samples[s].stream, c / 2});
        if (c % 2 == 1 && c / 2 < cfg.fewshot.n_novel) novel_idx.push_back(s);
      }
      const int s = cfg.network.input_size;
      const auto net = snn::build_network({2, s, s}, cfg.network.layers, cfg.network.neuron,
                                          static_cast<int>(cfg.fewshot.n_pretrain));
      const auto trained = pretrain::train(net, data, cfg.pretrain);
      if (!trained.curve.empty()) run.pretrain_final_loss = trained.curve.back().loss;
      for (const auto& l : trained.network.layers) run.weights_on_grid = run.weights_on_grid && l.weights.valid();

      const auto features = fewshot::compute_features(trained.network, ds, novel_idx, cfg.fewshot.window_ms * 1000);
      for (const int k : cfg.fewshot.shots) {
        const auto eps =
            fewshot::build_episodes(ds, cfg.fewshot.n_pretrain, cfg.fewshot.n_novel, k, cfg.fewshot.folds, cfg.seed);
        auto cv = fewshot::cross_validate(trained.network, ds, eps, features, cfg.soel, cfg.seed);
        for (const auto& f : cv.folds) run.weights_on_grid = run.weights_on_grid && f.trained_layer.weights.valid();
        run.by_shots[k] = std::move(cv);
      }
      const int k_max = *std::max_element(cfg.fewshot.shots.begin(), cfg.fewshot.shots.end());
      const auto eps = fewshot::build_episodes(ds, cfg.fewshot.n_pretrain, cfg.fewshot.n_novel, k_max,
                                               cfg.fewshot.folds, cfg.seed);
      for (const auto& ep : eps) {
        run.forgetting.push_back(fewshot::forgetting_probe(trained.network, ds, ep, features, cfg.soel, cfg.seed));
      }

      std::printf("  seed %2llu: pretrain loss %.0f", static_cast<unsigned long long>(run.seed),
                  run.pretrain_final_loss);
      for (const auto& [k, cv] : run.by_shots) {
        std::size_t ties = 0, tested = 0;
        for (const auto& f : cv.folds) {
          ties += f.ties;
          for (const auto& row : f.confusion)
            for (const auto v : row) tested += v;
        }
        std::printf(" | K=%d test %.3f train %.3f ties %zu/%zu", k, cv.mean_test, cv.mean_train, ties, tested);
      }
      std::printf(" (%.0fs)\n", seconds_since(t0));
      std::fflush(stdout);
      suite.runs.push_back(std::move(run));
    }
  } catch (const std::exception& e) {
    suite.error = e.what();
  }
  suite.seconds = seconds_since(t0);
  return suite;
}

Outcome fewshot_efficacy(const FewshotSuite& suite, int n_seeds) {
  if (!suite.error.empty()) return {false, "error: " + suite.error};
  std::map<int, double> mean;
  for (const auto& r : suite.runs) {
    for (const auto& [k, cv] : r.by_shots) mean[k] += cv.mean_test / static_cast<double>(suite.runs.size());
  }
  if (!mean.contains(1) || !mean.contains(5)) return {false, "config must evaluate 1 and 5 shots"};
  const bool ok = static_cast<int>(suite.runs.size()) >= 10 && n_seeds >= 10 && mean[1] >= 0.67 &&
                  mean[5] >= mean[1] - 0.05 && suite.seconds < 600.0;
  return {ok, fmt("%zu seeds, mean test 1-shot %.3f, 5-shot %.3f (chance 0.333), %.0fs", suite.runs.size(), mean[1],
                  mean[5], suite.seconds)};
}

Outcome update_reduction(const FewshotSuite& suite) {
  if (!suite.error.empty() || suite.runs.empty()) return {false, "no criterion 4 runs"};
  std::uint64_t soel = 0, base = 0;
  for (const auto& r : suite.runs) {
    for (const auto& [k, cv] : r.by_shots) {
      soel += cv.soel_update_count;
      base += cv.baseline_update_count;
    }
  }
  const double ratio = base == 0 ? 1.0 : static_cast<double>(soel) / static_cast<double>(base);
  return {base > 0 && ratio <= 0.2,
          fmt("SOEL %llu vs per-step %llu updates, ratio %.4f (%.1fx fewer)", static_cast<unsigned long long>(soel),
              static_cast<unsigned long long>(base), ratio, ratio > 0 ? 1.0 / ratio : 0.0)};
}

Outcome quantization(const FewshotSuite& suite) {
  const auto t0 = Clock::now();
  bool weights = suite.error.empty() && !suite.runs.empty();
  for (const auto& r : suite.runs) weights = weights && r.weights_on_grid;

  // Hardware traces under spike and pooled (window-sum) drive.
  Rng rng(6);
  plasticity::TraceState tr(64, 0.75, 0.96875);
  bool traces = true;
  std::vector<std::int32_t> act(64);
  for (int t = 0; t < 5000; ++t) {
    for (auto& a : act) a = rng.bernoulli(0.3) ? static_cast<std::int32_t>(rng.uniform_int(1, 16)) : 0;
    plasticity::update_traces(tr, act, 16.0, Precision::Hardware, rng);
    for (std::size_t j = 0; j < act.size(); ++j) {
      for (const double x : {tr.x1[j], tr.x2[j]}) traces = traces && x >= 0.0 && x <= 127.0 && x == std::floor(x);
    }
  }

  // Stochastic rounding: sample mean within 3 sigma of the input.
  const int n = 100'000;
  double worst_z = 0.0;
  for (const double v : {13.3, -101.7, 0.5, 253.1}) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += plasticity::stochastic_round(v, plasticity::kWeightGrid, rng);
    const double lo = 2.0 * std::floor(v / 2.0);
    const double p = (v - lo) / 2.0;
    const double sigma = 2.0 * std::sqrt(p * (1 - p) / n);
    worst_z = std::max(worst_z, std::abs(sum / n - v) / sigma);
  }
  for (const double v : {3.25, 126.9}) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += plasticity::stochastic_round(v, plasticity::kTraceGrid, rng);
    const double p = v - std::floor(v);
    const double sigma = std::sqrt(p * (1 - p) / n);
    worst_z = std::max(worst_z, std::abs(sum / n - v) / sigma);
  }
  return {weights && traces && worst_z < 3.0,
          fmt("deployed weights on grid: %s, traces in [0,127]: %s, rounding worst |z| %.2f, %.2fs",
              weights ? "yes" : "no", traces ? "yes" : "no", worst_z, seconds_since(t0))};
}

Outcome forgetting(const FewshotSuite& suite) {
  if (!suite.error.empty() || suite.runs.empty()) return {false, "no criterion 4 runs"};
  double before = 0.0, after = 0.0, b_after = 0.0;
  std::size_t n = 0;
  for (const auto& r : suite.runs) {
    for (const auto& f : r.forgetting) {
      before += f.a_before;
      after += f.a_after;
      b_after += f.b_after;
      ++n;
    }
  }
  before /= static_cast<double>(n);
  after /= static_cast<double>(n);
  b_after /= static_cast<double>(n);
  return {before > 0.0 && after >= 0.5 * before,
          fmt("class A accuracy %.3f before B, %.3f after (ratio %.2f); class B %.3f; %zu probes", before, after,
              before > 0 ? after / before : 0.0, b_after, n)};
}

// 7 ---------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
  }
  return out;
}

Outcome cli_determinism(const std::string& soelsim, const std::string& config) {
  if (soelsim.empty()) return {false, "--soelsim not given"};
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / ("soelsim_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> failures;
  auto sh = [&](const std::string& args, const fs::path& stdout_file) {
    const std::string cmd = "\"" + soelsim + "\" " + args + " > \"" + stdout_file.string() + "\" 2>/dev/null";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  for (const std::string rep : {"a", "b"}) {
    const fs::path d = root / rep;
    fs::create_directories(d / "stdout");
    const std::string c = "--config \"" + config + "\" ";
    const std::string data = (d / "data").string(), pre = (d / "pre").string(), few = (d / "few").string();
    const int codes[] = {
        sh(c + "--out \"" + data + "\" gen-data", d / "stdout/gen-data"),
        sh(c + "--data \"" + data + "\" --out \"" + pre + "\" pretrain", d / "stdout/pretrain"),
        sh(c + "--data \"" + data + "\" --checkpoint \"" + pre + "/checkpoint.json\" --out \"" + few + "\" fewshot",
           d / "stdout/fewshot"),
        sh("--checkpoint \"" + pre + "/checkpoint.json\" infer \"" + data + "/samples/c01_000.bin\"",
           d / "stdout/infer"),
        sh("--out \"" + (d / "report").string() + "\" report \"" + few + "\"", d / "stdout/report"),
    };
    for (const int code : codes) {
      if (code != 0) failures.push_back("run " + rep + " exit " + std::to_string(code));
    }
  }
  // Outputs may embed their own directory names only through the echoed
  // config, which is identical here because both runs use relative layout.
  std::size_t files = 0;
  for (const std::string sub : {"data", "pre", "few", "report", "stdout"}) {
    auto a = tree(root / "a" / sub), b = tree(root / "b" / sub);
    files += a.size();
    for (auto* t : {&a, &b}) {
      for (auto& [name, text] : *t) {
        const std::string from = (root / (t == &a ? "a" : "b")).string();
        for (std::size_t pos; (pos = text.find(from)) != std::string::npos;) text.replace(pos, from.size(), "<run>");
      }
    }
    if (a != b) failures.push_back(sub + " differs");
  }
  fs::remove_all(root);
  std::string detail = fmt("%zu files compared across two runs of 5 commands, %.1fs", files, seconds_since(t0));
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty() && files > 0, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::string soelsim, config, only;
  const fs::path configs = SOEL_CONFIG_DIR;
  config = (configs / "acceptance.json").string();
  std::string tiny = (configs / "tiny.json").string();
  int n_seeds = 10;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string k = argv[i], v = argv[i + 1];
    if (k == "--soelsim") soelsim = v;
    else if (k == "--config") config = v;
    else if (k == "--tiny") tiny = v;
    else if (k == "--only") only = v;
    else if (k == "--seeds") n_seeds = std::stoi(v);
    else {
      std::fprintf(stderr, "unknown option %s\n", k.c_str());
      return 2;
    }
  }
  auto wanted = [&](int n) { return only.empty() || only.find(std::to_string(n)) != std::string::npos; };

  std::vector<std::pair<int, Outcome>> results;
  auto report = [&](int n, const char* name, Outcome o) {
    std::printf("[%s] criterion %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
    results.emplace_back(n, std::move(o));
  };
  auto guarded = [](const std::function<Outcome()>& f) -> Outcome {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("error: ") + e.what()};
    }
  };

  if (wanted(1)) report(1, "gradient oracle", guarded(gradient_oracle));
  if (wanted(2)) report(2, "trace equivalence", guarded(trace_equivalence));
  if (wanted(3)) report(3, "SOEL unit semantics", guarded(soel_semantics));

  FewshotSuite suite;
  if (wanted(4) || wanted(5) || wanted(6) || wanted(8)) {
    app::RunConfig cfg;
    try {
      cfg = app::load_config(config);
    } catch (const std::exception& e) {
      suite.error = e.what();
    }
    if (suite.error.empty()) {
      std::printf("few-shot runs (%s, %d seeds):\n", config.c_str(), n_seeds);
      suite = run_fewshot_suite(cfg, n_seeds);
    }
  }
  if (wanted(4)) report(4, "few-shot efficacy", fewshot_efficacy(suite, n_seeds));
  if (wanted(5)) report(5, "update-count reduction", update_reduction(suite));
  if (wanted(6)) report(6, "quantization invariants", guarded([&] { return quantization(suite); }));
  if (wanted(7)) report(7, "CLI determinism", guarded([&] { return cli_determinism(soelsim, tiny); }));
  if (wanted(8)) report(8, "forgetting probe", forgetting(suite));

  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return !r.second.pass; });
  std::printf("%zu/%zu criteria passed\n", results.size() - static_cast<std::size_t>(failed), results.size());
  return failed == 0 ? 0 : 1;
}
