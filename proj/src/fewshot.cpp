#include "soel/fewshot.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "soel/error.hpp"
#include "soel/synth.hpp"

namespace soel::fewshot {

namespace {

std::size_t position_of(std::span<const std::size_t> v, std::size_t x) {
  return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
}

const snn::Raster& features_of(std::span<const snn::Raster> features, std::size_t idx) {
  if (idx >= features.size() || features[idx].n_steps() == 0) {
    throw Error(Errc::InvalidConfig, "no features computed for sample " + std::to_string(idx));
  }
  return features[idx];
}

// Accuracy of `layer` (plasticity off) on the given samples.
double score(const snn::LayerSpec& layer, const Dataset& dataset, std::span<const std::size_t> idx,
             std::span<const std::size_t> classes, std::span<const snn::Raster> features, snn::OverflowMode overflow,
             std::vector<std::vector<std::size_t>>* confusion, std::size_t* ties, bool strict = false) {
  if (idx.empty()) return 0.0;
  std::size_t correct = 0;
  for (const std::size_t s : idx) {
    const auto counts = plasticity::infer_counts(layer, features_of(features, s), overflow);
    const Decision d = classify(counts);
    const std::size_t truth = position_of(classes, dataset.samples[s].class_id);
    if (d.label == truth && !(strict && d.tie)) ++correct;
    if (confusion) ++(*confusion)[truth][d.label];
    if (ties && d.tie) ++*ties;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

// Training order: shot 0 of every class, then shot 1, ...
std::vector<std::size_t> round_robin(const Episode& ep) {
  const std::size_t n = ep.novel_classes.size();
  const auto k = static_cast<std::size_t>(ep.shots);
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < k; ++s) {
    for (std::size_t c = 0; c < n; ++c) order.push_back(ep.train[c * k + s]);
  }
  return order;
}

std::string percent(double mean, double sd) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1) << 100.0 * mean << " +- " << 100.0 * sd << " %";
  return os.str();
}

}  // namespace

std::vector<std::size_t> Dataset::indices_of(std::size_t c) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].class_id == c) out.push_back(i);
  }
  return out;
}

Dataset synth_dataset(std::size_t n_classes, std::size_t per_class, std::uint64_t seed,
                      const events::SynthOptions& options) {
  if (n_classes > events::gesture_catalog().size()) throw Error(Errc::UnknownClass, "too many classes");
  Rng rng = Rng::stream(seed, "data");
  Dataset ds;
  ds.n_classes = n_classes;
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) ds.samples.push_back({c, rng.next(), {}});
  }
  const auto n = static_cast<std::int64_t>(ds.samples.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      Sample& s = ds.samples[static_cast<std::size_t>(i)];
      s.stream = events::synth_gesture(static_cast<int>(s.class_id), s.seed, options);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return ds;
}

std::vector<Episode> build_episodes(const Dataset& dataset, std::size_t n_pretrain, std::size_t n_novel, int shots,
                                    int folds, std::uint64_t seed) {
  if (folds < 1 || shots < 0) throw Error(Errc::InvalidConfig, "folds must be >= 1 and shots >= 0");
  std::vector<std::size_t> even, odd;
  for (std::size_t c = 0; c < dataset.n_classes; ++c) (c % 2 == 0 ? even : odd).push_back(c);
  if (even.size() < n_pretrain || odd.size() < n_novel || n_novel == 0) {
    throw Error(Errc::InsufficientSamples, "dataset has " + std::to_string(dataset.n_classes) + " classes, need " +
                                               std::to_string(n_pretrain) + " even and " + std::to_string(n_novel) +
                                               " odd");
  }
  even.resize(n_pretrain);
  odd.resize(n_novel);
  Rng rng = Rng::stream(seed, "folds");
  const auto f = static_cast<std::size_t>(folds);
  const auto k = static_cast<std::size_t>(shots);
  std::vector<std::vector<std::size_t>> shuffled;
  for (const std::size_t c : odd) {
    auto idx = dataset.indices_of(c);
    for (std::size_t i = idx.size(); i-- > 1;) {
      std::swap(idx[i], idx[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
    }
    // Every chunk needs a test sample and the rest must cover K shots.
    if (idx.size() < f || idx.size() - (idx.size() + f - 1) / f < k) {
      throw Error(Errc::InsufficientSamples, "class " + std::to_string(c) + " has " + std::to_string(idx.size()) +
                                                 " samples; " + std::to_string(f) + " folds with " +
                                                 std::to_string(k) + " shots need more");
    }
    shuffled.push_back(std::move(idx));
  }
  std::vector<Episode> out;
  for (std::size_t fold = 0; fold < f; ++fold) {
    Episode ep;
    ep.pretrain_classes = even;
    ep.novel_classes = odd;
    ep.shots = shots;
    ep.fold = static_cast<int>(fold);
    for (const auto& idx : shuffled) {
      const std::size_t lo = fold * idx.size() / f;
      const std::size_t hi = (fold + 1) * idx.size() / f;
      std::size_t taken = 0;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        if (i >= lo && i < hi) {
          ep.test.push_back(idx[i]);
        } else if (taken < k) {
          ep.train.push_back(idx[i]);
          ++taken;
        }
      }
    }
    out.push_back(std::move(ep));
  }
  return out;
}

snn::NetworkSpec reset_output_layer(const snn::NetworkSpec& net, std::size_t n_classes) {
  if (net.layers.empty() || net.layers.back().kind != snn::LayerKind::Dense) {
    throw Error(Errc::NoFinalDense, "final layer is not dense");
  }
  if (n_classes == 0) throw Error(Errc::InvalidConfig, "need at least one output");
  snn::NetworkSpec out = net;
  for (auto& l : out.layers) l.plastic = false;
  snn::LayerSpec& last = out.layers.back();
  last.out = {static_cast<int>(n_classes), 1, 1};
  last.params.bias = 0;
  last.weights.values.assign(last.weight_count(), 0);
  last.plastic = true;
  return out;
}

Decision classify(std::span<const std::int64_t> counts) {
  if (counts.empty()) throw Error(Errc::InvalidConfig, "no outputs to classify");
  const auto it = std::max_element(counts.begin(), counts.end());
  Decision d{static_cast<std::size_t>(it - counts.begin()), std::count(counts.begin(), counts.end(), *it) > 1};
  return d;
}

std::vector<snn::Raster> compute_features(const snn::NetworkSpec& net, const Dataset& dataset,
                                          std::span<const std::size_t> which, std::uint64_t window) {
  if (net.input.width != net.input.height) throw Error(Errc::ShapeMismatch, "input must be square");
  const auto side = static_cast<std::uint16_t>(net.input.width);
  std::vector<snn::Raster> out(dataset.samples.size());
  const auto n = static_cast<std::int64_t>(which.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const std::size_t idx = which[static_cast<std::size_t>(i)];
      const events::EventStream& raw = dataset.samples.at(idx).stream;
      const events::EventStream s =
          raw.width == side && raw.height == side ? raw : events::downscale(raw, side);
      if (s.duration < window) throw Error(Errc::StreamShorterThanWindow, "sample shorter than window");
      const events::AugmentTransform tf{0, 0, 0.0, (s.duration - window) / 2, window};
      const auto frames = events::bin_events(events::apply_augment(s, tf), 1000, side, side);
      out[idx] = snn::extract_features(net, frames, {snn::OverflowMode::Saturate, snn::kernels::Backend::OpenMP});
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

EvalReport run_fewshot(const snn::NetworkSpec& net, const Dataset& dataset, const Episode& episode,
                       std::span<const snn::Raster> features, const plasticity::SoelConfig& cfg, std::uint64_t seed) {
  const std::size_t n = episode.novel_classes.size();
  if (episode.train.size() != n * static_cast<std::size_t>(episode.shots)) {
    throw Error(Errc::InvalidConfig, "episode train set does not hold K shots per class");
  }
  snn::NetworkSpec plastic = reset_output_layer(net, n);
  snn::LayerSpec baseline_layer = plastic.layers.back();
  EvalReport rep;
  rep.fold = episode.fold;
  rep.shots = episode.shots;
  rep.seed = seed;
  rep.confusion.assign(n, std::vector<std::size_t>(n, 0));

  const std::string fold_name = "fold" + std::to_string(episode.fold);
  plasticity::SoelEngine engine(plastic.layers.back(), cfg, Rng::stream(seed, "soel/" + fold_name));
  Rng baseline_rng = Rng::stream(seed, "baseline/" + fold_name);
  for (const std::size_t s : round_robin(episode)) {
    const std::size_t label = position_of(episode.novel_classes, dataset.samples[s].class_id);
    const snn::Raster& f = features_of(features, s);
    auto res = engine.present(f, label);
    rep.soel_update_count += res.updates;
    rep.windows_triggered += res.windows_triggered;
    rep.window_log.insert(rep.window_log.end(), res.log.begin(), res.log.end());
    rep.baseline_update_count += plasticity::baseline_present(baseline_layer, f, label, cfg, baseline_rng).updates;
  }
  rep.trained_layer = plastic.layers.back();
  rep.train_accuracy =
      score(rep.trained_layer, dataset, episode.train, episode.novel_classes, features, cfg.overflow, nullptr, nullptr);
  rep.test_accuracy = score(rep.trained_layer, dataset, episode.test, episode.novel_classes, features, cfg.overflow,
                            &rep.confusion, &rep.ties);
  return rep;
}

std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() < 2 || std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); })) {
    return {values.front(), 0.0};
  }
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

CrossValReport cross_validate(const snn::NetworkSpec& net, const Dataset& dataset, std::span<const Episode> episodes,
                              std::span<const snn::Raster> features, const plasticity::SoelConfig& cfg,
                              std::uint64_t seed) {
  if (episodes.size() < 2) throw Error(Errc::InsufficientSamples, "cross-validation needs at least two folds");
  CrossValReport out;
  out.folds.resize(episodes.size());
  const auto n = static_cast<std::int64_t>(episodes.size());
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      const auto u = static_cast<std::size_t>(i);
      out.folds[u] = run_fewshot(net, dataset, episodes[u], features, cfg, seed);
    } catch (...) {
#pragma omp critical
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  std::vector<double> train, test;
  for (const auto& f : out.folds) {
    train.push_back(f.train_accuracy);
    test.push_back(f.test_accuracy);
    out.soel_update_count += f.soel_update_count;
    out.baseline_update_count += f.baseline_update_count;
  }
  std::tie(out.mean_train, out.std_train) = mean_std(train);
  std::tie(out.mean_test, out.std_test) = mean_std(test);
  return out;
}

ForgettingReport forgetting_probe(const snn::NetworkSpec& net, const Dataset& dataset, const Episode& episode,
                                  std::span<const snn::Raster> features, const plasticity::SoelConfig& cfg,
                                  std::uint64_t seed) {
  if (episode.novel_classes.size() < 2 || episode.shots < 1) {
    throw Error(Errc::InsufficientSamples, "forgetting probe needs two novel classes and at least one shot");
  }
  const std::size_t n = episode.novel_classes.size();
  const auto k = static_cast<std::size_t>(episode.shots);
  snn::NetworkSpec plastic = reset_output_layer(net, n);
  plasticity::SoelEngine engine(plastic.layers.back(), cfg, Rng::stream(seed, "forgetting"));
  ForgettingReport rep;
  rep.class_a = episode.novel_classes[0];
  rep.class_b = episode.novel_classes[1];
  auto test_of = [&](std::size_t cls) {
    std::vector<std::size_t> idx;
    for (const std::size_t s : episode.test) {
      if (dataset.samples[s].class_id == cls) idx.push_back(s);
    }
    return idx;
  };
  auto learn = [&](std::size_t slot) {
    for (std::size_t s = 0; s < k; ++s) engine.present(features_of(features, episode.train[slot * k + s]), slot);
  };
  const auto test_a = test_of(rep.class_a);
  const auto test_b = test_of(rep.class_b);
  learn(0);
  rep.a_before =
      score(plastic.layers.back(), dataset, test_a, episode.novel_classes, features, cfg.overflow, nullptr, nullptr, true);
  learn(1);
  rep.a_after = score(plastic.layers.back(), dataset, test_a, episode.novel_classes, features, cfg.overflow, nullptr,
                      nullptr, true);
  rep.b_after = score(plastic.layers.back(), dataset, test_b, episode.novel_classes, features, cfg.overflow, nullptr,
                      nullptr, true);
  return rep;
}

std::string folds_csv(std::span<const CrossValReport> reports) {
  std::ostringstream os;
  os << "fold,shots,train_accuracy,test_accuracy,soel_updates,baseline_updates,windows_triggered,ties\n";
  os << std::setprecision(6);
  for (const auto& r : reports) {
    for (const auto& f : r.folds) {
      os << f.fold << ',' << f.shots << ',' << f.train_accuracy << ',' << f.test_accuracy << ','
         << f.soel_update_count << ',' << f.baseline_update_count << ',' << f.windows_triggered << ',' << f.ties
         << '\n';
    }
  }
  return os.str();
}

std::string summary_table(std::span<const CrossValReport> reports, const std::string& method) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "Method" << std::setw(7) << "Shots" << std::setw(18) << "Train"
     << "Test\n";
  for (const auto& r : reports) {
    const int shots = r.folds.empty() ? 0 : r.folds.front().shots;
    os << std::setw(10) << method << std::setw(7) << shots << std::setw(18) << percent(r.mean_train, r.std_train)
       << percent(r.mean_test, r.std_test) << '\n';
  }
  return os.str();
}

}  // namespace soel::fewshot
