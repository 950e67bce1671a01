#include "soel/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "soel/checkpoint.hpp"
#include "soel/config.hpp"
#include "soel/kernels.hpp"
#include "soel/simulator.hpp"

namespace soel::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  int jobs = 0;
  std::string precision;
  std::string data;
  std::string checkpoint;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Io, "cannot write " + path.string());
  f << text;
  if (!f) throw Error(Errc::Io, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(Errc::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

app::RunConfig resolve_config(const Globals& g) {
  app::RunConfig cfg = g.config.empty() ? app::RunConfig{} : app::load_config(g.config);
  if (g.seed_given) cfg.seed = g.seed;
  if (!g.precision.empty()) cfg.precision = app::precision_from_string(g.precision);
  if (!g.data.empty()) cfg.data.dir = g.data;
  if (!g.checkpoint.empty()) cfg.fewshot.checkpoint = g.checkpoint;
  cfg.resolve();
  return cfg;
}

fs::path prepare_out(const Globals& g, const app::RunConfig& cfg) {
  if (g.out.empty()) throw Error(Errc::InvalidConfig, "--out is required");
  const fs::path out(g.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + out.string() + ": " + ec.message());
  write_text(out / "config.resolved.json", app::to_json(cfg).dump(2) + "\n");
  return out;
}

snn::NetworkSpec network_for(const app::RunConfig& cfg, int n_outputs) {
  const int s = cfg.network.input_size;
  return snn::build_network({events::SpikeFrameSequence::kChannels, s, s}, cfg.network.layers, cfg.network.neuron,
                            n_outputs);
}

std::vector<std::size_t> pretrain_classes(const app::RunConfig& cfg, std::size_t n_classes) {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < n_classes && out.size() < cfg.fewshot.n_pretrain; c += 2) out.push_back(c);
  if (out.size() < cfg.fewshot.n_pretrain) throw Error(Errc::InsufficientSamples, "not enough pretrain classes");
  return out;
}

int cmd_gen_data(const Globals& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  const fs::path dir = prepare_out(g, cfg);
  const auto ds = fewshot::synth_dataset(cfg.data.classes, cfg.data.samples_per_class, cfg.seed, cfg.data.synth);
  fs::create_directories(dir / "samples");
  std::ostringstream manifest;
  manifest << "class,seed,path,duration_us\n";
  std::vector<std::size_t> per_class(cfg.data.classes, 0);
  for (const auto& s : ds.samples) {
    std::ostringstream name;
    name << "samples/c" << std::setw(2) << std::setfill('0') << s.class_id << "_" << std::setw(3) << per_class[s.class_id]++
         << ".bin";
    events::write_event_file((dir / name.str()).string(), s.stream);
    manifest << s.class_id << ',' << s.seed << ',' << name.str() << ',' << s.stream.duration << '\n';
  }
  write_text(dir / "manifest.csv", manifest.str());
  out << "wrote " << ds.samples.size() << " samples to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_pretrain(const Globals& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  if (cfg.data.dir.empty()) throw Error(Errc::InvalidConfig, "data.dir (or --data) is required");
  const fs::path dir = prepare_out(g, cfg);
  const auto ds = load_dataset(cfg.data.dir);
  const auto classes = pretrain_classes(cfg, ds.n_classes);
  std::vector<pretrain::LabeledStream> data;
  for (const auto& s : ds.samples) {
    const auto it = std::find(classes.begin(), classes.end(), s.class_id);
    if (it != classes.end()) data.push_back({s.stream, static_cast<std::size_t>(it - classes.begin())});
  }
  const auto net = network_for(cfg, static_cast<int>(classes.size()));
  const auto res = pretrain::train(net, data, cfg.pretrain);

  std::ostringstream curve;
  curve << "epoch,loss,acc\n" << std::setprecision(10);
  for (const auto& e : res.curve) curve << e.epoch << ',' << e.loss << ',' << e.accuracy << '\n';
  write_text(dir / "loss.csv", curve.str());

  snn::Checkpoint ck;
  ck.network = res.network;
  ck.shadow = res.shadow;
  ck.metadata = {{"seed", cfg.seed},
                 {"precision", app::to_string(cfg.precision)},
                 {"pretrain_classes", classes},
                 {"epochs", cfg.pretrain.epochs}};
  snn::save_checkpoint((dir / "checkpoint.json").string(), ck);
  out << "trained " << res.curve.size() << " epochs on " << data.size() << " samples";
  if (!res.curve.empty()) out << ", final loss " << res.curve.back().loss << " acc " << res.curve.back().accuracy;
  out << "\n";
  return kExitOk;
}

int cmd_fewshot(const Globals& g, std::ostream& out) {
  const auto cfg = resolve_config(g);
  if (cfg.data.dir.empty()) throw Error(Errc::InvalidConfig, "data.dir (or --data) is required");
  if (cfg.fewshot.checkpoint.empty()) throw Error(Errc::InvalidConfig, "fewshot.checkpoint (or --checkpoint) is required");
  const auto ck = snn::load_checkpoint(cfg.fewshot.checkpoint);
  const fs::path dir = prepare_out(g, cfg);
  const auto ds = load_dataset(cfg.data.dir);

  std::vector<std::size_t> needed;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const std::size_t c = ds.samples[i].class_id;
    if (c % 2 == 1 && c / 2 < cfg.fewshot.n_novel) needed.push_back(i);
  }
  const auto features = fewshot::compute_features(ck.network, ds, needed, cfg.fewshot.window_ms * 1000);

  std::vector<fewshot::CrossValReport> reports;
  fs::create_directories(dir / "windows");
  for (const int k : cfg.fewshot.shots) {
    const auto eps =
        fewshot::build_episodes(ds, cfg.fewshot.n_pretrain, cfg.fewshot.n_novel, k, cfg.fewshot.folds, cfg.seed);
    reports.push_back(fewshot::cross_validate(ck.network, ds, eps, features, cfg.soel, cfg.seed));
    for (const auto& f : reports.back().folds) {
      write_text(dir / "windows" / ("k" + std::to_string(k) + "_fold" + std::to_string(f.fold) + ".csv"),
                 plasticity::window_log_csv(f.window_log));
    }
  }
  std::ostringstream summary;
  summary << "shots,mean_train,std_train,mean_test,std_test,soel_updates,baseline_updates,update_ratio\n"
          << std::setprecision(6);
  for (const auto& r : reports) {
    const double ratio = r.baseline_update_count == 0
                             ? 0.0
                             : static_cast<double>(r.soel_update_count) / static_cast<double>(r.baseline_update_count);
    summary << r.folds.front().shots << ',' << r.mean_train << ',' << r.std_train << ',' << r.mean_test << ','
            << r.std_test << ',' << r.soel_update_count << ',' << r.baseline_update_count << ',' << ratio << '\n';
  }
  write_text(dir / "folds.csv", fewshot::folds_csv(reports));
  write_text(dir / "summary.csv", summary.str());
  const std::string table = fewshot::summary_table(reports, "SOEL");
  write_text(dir / "summary.txt", table);
  out << table;
  return kExitOk;
}

int cmd_infer(const Globals& g, const std::string& event_file, std::ostream& out) {
  const auto cfg = resolve_config(g);
  if (cfg.fewshot.checkpoint.empty()) throw Error(Errc::InvalidConfig, "--checkpoint is required");
  const auto ck = snn::load_checkpoint(cfg.fewshot.checkpoint);
  const auto& net = ck.network;
  events::EventStream s = events::read_event_file(event_file);
  const int side = net.input.width;
  if (s.width != side || s.height != side) {
    if (std::min(s.width, s.height) < side) {
      throw Error(Errc::ShapeMismatch, "event file is " + std::to_string(s.width) + "x" + std::to_string(s.height) +
                                           ", network input is " + net.input.str());
    }
    s = events::downscale(s, static_cast<std::uint16_t>(side));
  }
  const auto frames = events::bin_events(s, 1000, static_cast<std::uint16_t>(side), static_cast<std::uint16_t>(side));
  const auto rec = snn::run_network(net, frames, snn::RecordMode::OutputCounts, {snn::OverflowMode::Saturate});
  const auto d = fewshot::classify(rec.output_counts);
  out << "class " << d.label << "\n";
  out << "tie " << (d.tie ? 1 : 0) << "\n";
  out << "counts";
  for (const auto c : rec.output_counts) out << ' ' << c;
  out << "\n";
  return kExitOk;
}

int cmd_report(const Globals& g, const std::string& run_dir, std::ostream& out) {
  const std::string text = read_text(fs::path(run_dir) / "folds.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("fold,shots,train_accuracy,test_accuracy", 0) != 0) {
    throw Error(Errc::MalformedRecord, "folds.csv has an unexpected header");
  }
  std::map<int, fewshot::CrossValReport> by_shots;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw Error(Errc::MalformedRecord, "bad folds.csv row: " + line);
    fewshot::EvalReport f;
    try {
      f.fold = std::stoi(cells[0]);
      f.shots = std::stoi(cells[1]);
      f.train_accuracy = std::stod(cells[2]);
      f.test_accuracy = std::stod(cells[3]);
      f.soel_update_count = std::stoull(cells[4]);
      f.baseline_update_count = std::stoull(cells[5]);
    } catch (const std::exception&) {
      throw Error(Errc::MalformedRecord, "bad folds.csv row: " + line);
    }
    auto& r = by_shots[f.shots];
    r.folds.push_back(f);
    r.soel_update_count += f.soel_update_count;
    r.baseline_update_count += f.baseline_update_count;
  }
  std::vector<fewshot::CrossValReport> reports;
  for (auto& [k, r] : by_shots) {
    std::vector<double> tr, te;
    for (const auto& f : r.folds) {
      tr.push_back(f.train_accuracy);
      te.push_back(f.test_accuracy);
    }
    std::tie(r.mean_train, r.std_train) = fewshot::mean_std(tr);
    std::tie(r.mean_test, r.std_test) = fewshot::mean_std(te);
    reports.push_back(r);
  }
  std::ostringstream text_out;
  text_out << fewshot::summary_table(reports, "SOEL");
  for (const auto& r : reports) {
    text_out << "shots " << r.folds.front().shots << ": " << r.soel_update_count << " SOEL updates, "
             << r.baseline_update_count << " per-step updates";
    if (r.soel_update_count > 0) {
      text_out << " (" << std::fixed << std::setprecision(1)
               << static_cast<double>(r.baseline_update_count) / static_cast<double>(r.soel_update_count)
               << "x fewer)" << std::defaultfloat;
    }
    text_out << "\n";
  }
  if (!g.out.empty()) {
    fs::create_directories(g.out);
    write_text(fs::path(g.out) / "report.txt", text_out.str());
  }
  out << text_out.str();
  return kExitOk;
}

}  // namespace

int exit_code(Errc code) {
  switch (code) {
    case Errc::InvalidConfig:
    case Errc::InvalidNetwork:
    case Errc::DecayOutOfRange:
      return kExitConfig;
    case Errc::DivergedLoss:
    case Errc::Overflow:
    case Errc::OffsetUnderflow:
      return kExitDiverged;
    default:
      return kExitData;
  }
}

fewshot::Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  const std::string text = read_text(root / "manifest.csv");
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line != "class,seed,path,duration_us") throw Error(Errc::MalformedRecord, "manifest.csv has an unexpected header");
  fewshot::Dataset ds;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string c, seed, path, dur;
    if (!std::getline(row, c, ',') || !std::getline(row, seed, ',') || !std::getline(row, path, ',') ||
        !std::getline(row, dur)) {
      throw Error(Errc::MalformedRecord, "bad manifest row: " + line);
    }
    fewshot::Sample s;
    try {
      s.class_id = std::stoul(c);
      s.seed = std::stoull(seed);
    } catch (const std::exception&) {
      throw Error(Errc::MalformedRecord, "bad manifest row: " + line);
    }
    s.stream = events::read_event_file((root / path).string());
    ds.n_classes = std::max(ds.n_classes, s.class_id + 1);
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw Error(Errc::EmptyDataset, "manifest lists no samples");
  return ds;
}

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fixed-point SNN simulator with error-triggered online learning", "soelsim"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "JSON run configuration");
  app.add_option("--seed", g.seed, "global seed (overrides the config)")->each([&](const std::string&) {
    g.seed_given = true;
  });
  app.add_option("--out", g.out, "output directory");
  app.add_option("--jobs", g.jobs, "maximum worker threads")->check(CLI::NonNegativeNumber);
  app.add_option("--precision", g.precision, "hw or full")->check(CLI::IsMember({"hw", "full"}));
  app.add_option("--data", g.data, "dataset directory (overrides data.dir)");
  app.add_option("--checkpoint", g.checkpoint, "checkpoint file (overrides fewshot.checkpoint)");

  std::string event_file, run_dir;
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic gesture dataset");
  auto* pre = app.add_subcommand("pretrain", "surrogate-gradient pretraining on the pretrain classes");
  auto* few = app.add_subcommand("fewshot", "few-shot cross-validation with online learning");
  auto* inf = app.add_subcommand("infer", "classify one event file");
  inf->add_option("events", event_file, "event file (.csv or .bin)")->required();
  auto* rep = app.add_subcommand("report", "summarize a fewshot output directory");
  rep->add_option("run_dir", run_dir, "directory written by fewshot")->required();

  std::vector<std::string> argv(args.rbegin(), args.rend());
  try {
    app.parse(argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    snn::kernels::set_max_threads(g.jobs);
    if (*gen) return cmd_gen_data(g, out);
    if (*pre) return cmd_pretrain(g, out);
    if (*few) return cmd_fewshot(g, out);
    if (*inf) return cmd_infer(g, event_file, out);
    return cmd_report(g, run_dir, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace soel::cli
