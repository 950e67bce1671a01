#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "soel/events.hpp"
#include "soel/network.hpp"
#include "soel/plasticity.hpp"
#include "soel/simulator.hpp"
#include "soel/synth.hpp"

namespace soel::fewshot {

struct Sample {
  std::size_t class_id = 0;
  std::uint64_t seed = 0;
  events::EventStream stream;
};

struct Dataset {
  std::vector<Sample> samples;
  std::size_t n_classes = 0;

  /// Sample indices of class c in dataset order.
  std::vector<std::size_t> indices_of(std::size_t c) const;
};

/// `per_class` generated samples for each of the first n_classes catalog
/// classes, seeds drawn from sub-stream "data" of `seed`.
Dataset synth_dataset(std::size_t n_classes, std::size_t per_class, std::uint64_t seed,
                      const events::SynthOptions& options);

struct Episode {
  std::vector<std::size_t> pretrain_classes;
  std::vector<std::size_t> novel_classes;
  int shots = 0;
  int fold = 0;
  std::vector<std::size_t> train;  // dataset indices, K per novel class, grouped by class
  std::vector<std::size_t> test;   // dataset indices
};

/// Even classes pretrain, odd classes are novel. The samples of every novel
/// class are shuffled once (seeded) and cut into `folds` chunks; fold f
/// tests on chunk f and trains on the first K of the remaining samples.
/// Throws Errc::InsufficientSamples.
std::vector<Episode> build_episodes(const Dataset& dataset, std::size_t n_pretrain, std::size_t n_novel, int shots,
                                    int folds, std::uint64_t seed);

/// Replaces the final dense layer by a zero-weight plastic layer with
/// n_classes outputs; every other layer is marked frozen. Throws Errc::NoFinalDense.
snn::NetworkSpec reset_output_layer(const snn::NetworkSpec& net, std::size_t n_classes);

struct Decision {
  std::size_t label = 0;
  bool tie = false;
};

/// Highest count wins; ties go to the lowest index and are flagged.
Decision classify(std::span<const std::int64_t> counts);

/// Presynaptic activity of the final layer for each sample (empty rasters
/// for samples not listed in `which`). Streams larger than the input are
/// downscaled; the centered `window` microseconds are presented.
std::vector<snn::Raster> compute_features(const snn::NetworkSpec& net, const Dataset& dataset,
                                          std::span<const std::size_t> which, std::uint64_t window);

struct EvalReport {
  int fold = 0;
  int shots = 0;
  std::uint64_t seed = 0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], test set
  std::size_t ties = 0;
  std::uint64_t soel_update_count = 0;
  std::uint64_t baseline_update_count = 0;
  std::size_t windows_triggered = 0;
  std::vector<plasticity::WindowLogEntry> window_log;
  snn::LayerSpec trained_layer;
};

/// Resets the output layer, presents every shot once (round-robin over
/// classes), freezes, then scores the shots and the held-out samples. The
/// per-step rule runs on the same presentations for update counting.
EvalReport run_fewshot(const snn::NetworkSpec& net, const Dataset& dataset, const Episode& episode,
                       std::span<const snn::Raster> features, const plasticity::SoelConfig& cfg, std::uint64_t seed);

struct CrossValReport {
  std::vector<EvalReport> folds;
  double mean_train = 0.0;
  double std_train = 0.0;
  double mean_test = 0.0;
  double std_test = 0.0;
  std::uint64_t soel_update_count = 0;
  std::uint64_t baseline_update_count = 0;
};

/// Mean and sample standard deviation (0 for a single value).
std::pair<double, double> mean_std(std::span<const double> values);

/// Runs every episode (folds in parallel) and aggregates. Throws
/// Errc::InsufficientSamples for fewer than two episodes.
CrossValReport cross_validate(const snn::NetworkSpec& net, const Dataset& dataset, std::span<const Episode> episodes,
                              std::span<const snn::Raster> features, const plasticity::SoelConfig& cfg,
                              std::uint64_t seed);

struct ForgettingReport {
  std::size_t class_a = 0;
  std::size_t class_b = 0;
  double a_before = 0.0;  // accuracy on A's test samples after learning A
  double a_after = 0.0;   // ... after then learning B
  double b_after = 0.0;
};

/// Learns novel class 0 of the episode, then novel class 1, on one plastic
/// layer. A test sample counts as recognized only when its class wins
/// outright; ties count as misses.
ForgettingReport forgetting_probe(const snn::NetworkSpec& net, const Dataset& dataset, const Episode& episode,
                                  std::span<const snn::Raster> features, const plasticity::SoelConfig& cfg,
                                  std::uint64_t seed);

/// fold,shots,train_accuracy,test_accuracy,soel_updates,baseline_updates,windows_triggered,ties
std::string folds_csv(std::span<const CrossValReport> reports);

/// Method / Shots / Train / Test table with "mean +- std %" cells.
std::string summary_table(std::span<const CrossValReport> reports, const std::string& method);

}  // namespace soel::fewshot
