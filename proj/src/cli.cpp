#include "tactwin/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "tactwin/config.hpp"
#include "tactwin/errors.hpp"
#include "tactwin/parallel.hpp"

namespace fs = std::filesystem;

namespace tactwin {

namespace {

struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  double noise = 0.0;
  int threads = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* noise_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON config file");
    seed_opt = cmd->add_option("--seed", seed, "Master seed");
    noise_opt = cmd->add_option("--noise", noise, "Sensor noise sigma, intensity units");
    threads_opt = cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");
  }

  /// Config file, then flags; validated.
  RunConfig load() const {
    RunConfig c = config.empty() ? RunConfig{} : load_config(config);
    if (seed_opt->count()) c.seed = seed;
    if (noise_opt->count()) c.noise_sigma = noise;
    if (threads_opt->count()) c.threads = threads;
    c.resolve();
    c.validate();
    return c;
  }
};

fs::path parent_or_cwd(const fs::path& p) {
  const fs::path parent = p.parent_path();
  return parent.empty() ? fs::path(".") : parent;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_dir(parent_or_cwd(path));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

/// Effective config plus a timestamped sidecar log; the log is the only
/// output that changes between identical runs.
void record_run(const RunConfig& cfg, const fs::path& dir, int argc, const char* const* argv) {
  write_effective_config(cfg, dir);
  std::ofstream log(dir / "run.log", std::ios::app);
  if (!log) throw IoError("cannot write " + (dir / "run.log").string());
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  log << stamp;
  for (int i = 0; i < argc; ++i) log << ' ' << argv[i];
  log << '\n';
}

std::pair<double, double> parse_range(const std::string& text, const std::string& flag) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError(flag + " expects MIN:MAX, got '" + text + "'");
  try {
    std::size_t a = 0, b = 0;
    const std::string lo_text = text.substr(0, colon), hi_text = text.substr(colon + 1);
    const double lo = std::stod(lo_text, &a);
    const double hi = std::stod(hi_text, &b);
    if (a != lo_text.size() || b != hi_text.size()) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ConfigError(flag + " expects MIN:MAX, got '" + text + "'");
  }
}

std::vector<Split> parse_splits(const std::string& text) {
  if (text == "all") return {Split::Train, Split::Val, Split::Test};
  try {
    return {parse_split(text)};
  } catch (const IoError&) {
    throw ConfigError("--split must be train, val, test or all, got '" + text + "'");
  }
}

/// The dataset must have been simulated with the configured parameters.
void check_dataset_sim(const LoadedDataset& data, const RunConfig& cfg, std::ostream& err) {
  if (canonical_dump(to_json(data.sim)) != canonical_dump(to_json(cfg.sim))) {
    throw ConfigError("dataset " + data.root.string() +
                      " was generated with different sim parameters than the config");
  }
  const Json& spec = data.manifest.at("spec");
  const double noise = spec.at("scenarios").at("noise_sigma").get<double>();
  if (noise != cfg.noise_sigma) {
    err << "warning: dataset noise_sigma " << noise << " differs from configured " << cfg.noise_sigma
        << "\n";
  }
}

std::vector<ProbeSpec> dataset_probes(const LoadedDataset& data) {
  ScenarioDistribution dist;
  merge_json(data.manifest.at("spec").at("scenarios"), "scenarios", dist);
  return dist.probes;
}

struct GenerateCmd {
  CommonFlags common;
  std::string out;
  std::size_t count = 0;
  std::string probe;
  std::vector<double> diameters;
  std::string force_range;
  double position_range = 0.0;
  CLI::Option* count_opt = nullptr;
  CLI::Option* probe_opt = nullptr;
  CLI::Option* diam_opt = nullptr;
  CLI::Option* range_opt = nullptr;
  CLI::Option* pos_opt = nullptr;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("generate", "Simulate a labelled dataset");
    common.add(cmd);
    cmd->add_option("--out", out, "Output directory")->required();
    count_opt = cmd->add_option("--count", count, "Number of samples");
    probe_opt = cmd->add_option("--probe", probe, "sphere, strip, sphere-strip, footprints or screw");
    diam_opt = cmd->add_option("--diameters", diameters, "Sphere diameters in mm")->delimiter(',');
    range_opt = cmd->add_option("--force-range", force_range, "MIN:MAX force in N");
    pos_opt = cmd->add_option("--position-range", position_range, "Max |x|, |y| of the contact in mm");
  }

  int run(std::ostream& out_s, std::ostream& err, int argc, const char* const* argv) {
    (void)err;
    RunConfig cfg = common.load();
    if (count_opt->count()) cfg.dataset.count = count;
    if (pos_opt->count()) cfg.dataset.scenarios.position_range = position_range;
    if (range_opt->count()) {
      const auto [lo, hi] = parse_range(force_range, "--force-range");
      cfg.dataset.scenarios.force_min = lo;
      cfg.dataset.scenarios.force_max = hi;
    }
    const std::string kind = probe_opt->count() ? probe : (diam_opt->count() ? "sphere" : "");
    if (diam_opt->count() && kind != "sphere") {
      throw ConfigError("--diameters only applies to --probe sphere");
    }
    if (kind == "sphere") {
      std::vector<double> d = diameters;
      if (d.empty()) d = {10.0, 15.0, 20.0, 25.0, 30.0};
      cfg.dataset.scenarios.probes.clear();
      for (double v : d) cfg.dataset.scenarios.probes.push_back(SphereProbe{v});
    } else if (kind == "strip") {
      cfg.dataset.scenarios.probes = {StripProbe{}};
    } else if (!kind.empty()) {
      cfg.dataset.scenarios.probes = suite_probes(parse_suite(kind));
    }
    cfg.validate();
    const DatasetSummary s = generate_dataset(cfg.dataset, cfg.sim, out, cfg.threads);
    record_run(cfg, out, argc, argv);
    out_s << "wrote " << s.manifest.string() << "\n"
          << "train " << s.train << " val " << s.val << " test " << s.test << "\n";
    return kExitOk;
  }
};

struct CalibrateCmd {
  CommonFlags common;
  std::string out;
  std::string suite;
  std::string dataset;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("calibrate", "Sweep the forward model into a calibration table");
    common.add(cmd);
    cmd->add_option("--out", out, "Calibration JSON")->required();
    auto* s = cmd->add_option("--suite", suite, "sphere-strip, footprints or screw");
    auto* d = cmd->add_option("--dataset", dataset, "Calibrate the probes of this dataset");
    s->excludes(d);
  }

  int run(std::ostream& out_s, std::ostream& err, int argc, const char* const* argv) {
    RunConfig cfg = common.load();
    std::vector<ProbeSpec> probes;
    if (!dataset.empty()) {
      const LoadedDataset data = load_dataset(dataset);
      check_dataset_sim(data, cfg, err);
      probes = dataset_probes(data);
    } else {
      probes = suite_probes(suite.empty() ? cfg.roundtrip.suite : parse_suite(suite));
    }
    const CalibrationTable table =
        build_calibration(probes, cfg.sim, cfg.decoder,
                          force_grid(cfg.calibration_step, cfg.sim.material.max_force), cfg.threads);
    ensure_dir(parent_or_cwd(out));
    save_calibration(table, out);
    record_run(cfg, parent_or_cwd(out), argc, argv);
    out_s << "calibration " << table.param_hash << " with " << table.curves.size() << " curves -> "
          << out << "\n";
    return kExitOk;
  }
};

struct DecodeCmd {
  CommonFlags common;
  std::string calibration;
  std::string out;
  std::string dataset;
  std::string images;
  std::string reference;
  std::string split = "all";

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("decode", "Detect contacts and estimate their force");
    common.add(cmd);
    cmd->add_option("--calibration", calibration, "Calibration JSON")->required();
    cmd->add_option("--out", out, "Detections JSONL")->required();
    auto* d = cmd->add_option("--dataset", dataset, "Dataset directory");
    auto* i = cmd->add_option("--images", images, "Directory of PGM images");
    auto* r = cmd->add_option("--reference", reference, "Reference PGM for --images");
    cmd->add_option("--split", split, "train, val, test or all");
    d->excludes(i);
    i->needs(r);
  }

  int run(std::ostream& out_s, std::ostream& err, int argc, const char* const* argv) {
    RunConfig cfg = common.load();
    if (dataset.empty() == images.empty()) throw ConfigError("decode needs exactly one of --dataset, --images");
    const Decoder decoder(load_calibration(calibration), cfg.sim, cfg.decoder);

    struct Item {
      std::size_t index;
      std::string name;
      fs::path path;
    };
    std::vector<Item> items;
    TactileImage ref;
    if (!dataset.empty()) {
      const LoadedDataset data = load_dataset(dataset);
      check_dataset_sim(data, cfg, err);
      const std::vector<Split> splits = parse_splits(split);
      for (const auto& r : data.records) {
        if (std::find(splits.begin(), splits.end(), r.split) == splits.end()) continue;
        items.push_back({r.index, r.image_path().generic_string(), data.root / r.image_path()});
      }
      ref = data.reference();
    } else {
      std::error_code ec;
      std::vector<fs::path> paths;
      for (const auto& e : fs::directory_iterator(images, ec)) {
        if (e.path().extension() == ".pgm") paths.push_back(e.path());
      }
      if (ec) throw IoError("cannot list " + images + ": " + ec.message());
      std::sort(paths.begin(), paths.end());
      for (std::size_t k = 0; k < paths.size(); ++k) {
        items.push_back({k, paths[k].filename().string(), paths[k]});
      }
      ref = read_pgm16(reference, cfg.sim.sensor.scale, true);
    }

    std::vector<std::vector<Detection>> found(items.size());
    parallel_for(items.size(), cfg.threads, [&](std::size_t k) {
      found[k] = decoder.decode(read_pgm16(items[k].path, cfg.sim.sensor.scale), ref);
    });
    std::string lines;
    std::size_t total = 0;
    for (std::size_t k = 0; k < items.size(); ++k) {
      for (const Detection& d : found[k]) {
        Json j{{"index", items[k].index}, {"image", items[k].name}};
        j.update(to_json(d));
        lines += j.dump() + "\n";
        ++total;
      }
    }
    write_text(out, lines);
    record_run(cfg, parent_or_cwd(out), argc, argv);
    out_s << total << " detections in " << items.size() << " images -> " << out << "\n";
    return kExitOk;
  }
};

std::map<std::size_t, std::vector<Detection>> read_detections(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::map<std::size_t, std::vector<Detection>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      out[j.at("index").get<std::size_t>()].push_back(detection_from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

struct EvalCmd {
  CommonFlags common;
  std::string dataset;
  std::string detections;
  std::string calibration;
  std::string out;
  std::string split = "all";
  double iou = 0.0;
  CLI::Option* iou_opt = nullptr;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("eval", "Score detections against annotations");
    common.add(cmd);
    cmd->add_option("--dataset", dataset, "Dataset directory")->required();
    cmd->add_option("--detections", detections, "Detections JSONL")->required();
    cmd->add_option("--calibration", calibration, "Calibration JSON (class list and orientation)")
        ->required();
    cmd->add_option("--out", out, "Report JSON; a .txt table is written next to it")->required();
    cmd->add_option("--split", split, "train, val, test or all");
    iou_opt = cmd->add_option("--iou", iou, "IoU threshold");
  }

  int run(std::ostream& out_s, std::ostream& err, int argc, const char* const* argv) {
    RunConfig cfg = common.load();
    if (iou_opt->count()) cfg.roundtrip.iou_threshold = iou;
    cfg.validate();
    const LoadedDataset data = load_dataset(dataset);
    check_dataset_sim(data, cfg, err);
    const CalibrationTable table = load_calibration(calibration);
    auto dets = read_detections(detections);
    const std::vector<Split> splits = parse_splits(split);

    std::set<std::size_t> known;
    std::vector<EvalSample> samples;
    for (const auto& r : data.records) {
      known.insert(r.index);
      if (std::find(splits.begin(), splits.end(), r.split) == splits.end()) continue;
      EvalSample s;
      s.truths.push_back(r.truth());
      if (auto it = dets.find(r.index); it != dets.end()) s.detections = std::move(it->second);
      samples.push_back(std::move(s));
    }
    for (const auto& [index, list] : dets) {
      if (!known.count(index)) throw IoError("detection index " + std::to_string(index) + " not in dataset");
    }
    std::set<std::string> classes(data.classes.begin(), data.classes.end());
    for (const auto& c : table.class_names()) classes.insert(c);
    const MetricsReport report =
        evaluate(samples, {classes.begin(), classes.end()}, oriented_classes(table, cfg.decoder),
                 cfg.roundtrip.iou_threshold);
    ensure_dir(parent_or_cwd(out));
    write_report(report, out);
    record_run(cfg, parent_or_cwd(out), argc, argv);
    out_s << report_table(report);
    return kExitOk;
  }
};

std::string curve_csv(const std::vector<LossBreakdown>& curve, std::size_t first_epoch) {
  std::string s = "epoch,total,obj,cls,csl,force,box\n";
  char buf[256];
  for (std::size_t e = 0; e < curve.size(); ++e) {
    const LossBreakdown& b = curve[e];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", first_epoch + e, b.total,
                  b.obj, b.cls, b.csl, b.force, b.box);
    s += buf;
  }
  return s;
}

struct TrainToyCmd {
  CommonFlags common;
  std::string dataset;
  std::string out;
  std::string curve;
  std::string resume;
  double lr = 0.0;
  int epochs = 0;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* epochs_opt = nullptr;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("train-toy", "Fit the linear toy head on a dataset");
    common.add(cmd);
    cmd->add_option("--dataset", dataset, "Dataset directory")->required();
    cmd->add_option("--out", out, "Head JSON")->required();
    cmd->add_option("--curve", curve, "Per-epoch loss CSV (default: curve.csv next to --out)");
    cmd->add_option("--resume", resume, "Continue from this head JSON");
    lr_opt = cmd->add_option("--lr", lr, "Learning rate");
    epochs_opt = cmd->add_option("--epochs", epochs, "Epochs");
  }

  int run(std::ostream& out_s, std::ostream& err, int argc, const char* const* argv) {
    RunConfig cfg = common.load();
    if (lr_opt->count()) cfg.toy.learning_rate = lr;
    if (epochs_opt->count()) cfg.toy.epochs = epochs;
    cfg.validate();
    const LoadedDataset data = load_dataset(dataset);
    check_dataset_sim(data, cfg, err);
    const ToyDataset train = build_toy_dataset(data, {Split::Train}, cfg.features, cfg.threads);
    if (train.samples.empty()) throw ConfigError("dataset " + dataset + " has no train samples");

    ToyHead head;
    if (resume.empty()) {
      head = init_toy_head(train, cfg.loss);
    } else {
      head = load_toy_head(resume);
      if (head.dim != train.dim || head.classes != train.classes) {
        throw ConfigError("head " + resume + " has dim " + std::to_string(head.dim) + " and " +
                          std::to_string(head.classes) + " classes; the dataset needs " +
                          std::to_string(train.dim) + " and " + std::to_string(train.classes));
      }
    }
    const std::size_t first_epoch = head.epochs_trained;
    const TrainResult result = fit_toy_head(head, train, cfg.toy);

    ensure_dir(parent_or_cwd(out));
    save_toy_head(head, out);
    const fs::path curve_path = curve.empty() ? parent_or_cwd(out) / "curve.csv" : fs::path(curve);
    write_text(curve_path, curve_csv(result.curve, first_epoch));
    record_run(cfg, parent_or_cwd(out), argc, argv);

    if (!result.curve.empty()) {
      out_s << "epochs " << first_epoch << ".." << head.epochs_trained << " loss "
            << result.curve.front().total << " -> " << result.curve.back().total << "\n";
    }
    const ToyDataset test = build_toy_dataset(data, {Split::Test}, cfg.features, cfg.threads);
    if (!test.samples.empty()) {
      double sum = 0.0;
      for (const ToySample& s : test.samples) {
        sum += std::abs(toy_infer(head, s.features, test.grid, test.scale).force - s.targets.front().force);
      }
      out_s << "held-out force MAE " << sum / static_cast<double>(test.samples.size()) << " N over "
            << test.samples.size() << " samples\n";
    }
    if (result.diverged) {
      err << "training diverged after " << result.curve.size() << " epochs\n";
      return kExitDiverged;
    }
    return kExitOk;
  }
};

struct ResolutionCmd {
  CommonFlags common;
  std::string out;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("resolution", "Grating sweep in both stripe orientations");
    common.add(cmd);
    cmd->add_option("--out", out, "Sweep CSV")->required();
  }

  int run(std::ostream& out_s, std::ostream& err, int argc, const char* const* argv) {
    (void)err;
    const RunConfig cfg = common.load();
    const std::vector<double> freqs = usaf_frequencies(cfg.resolution_k_min, cfg.resolution_k_max);
    std::vector<ResolutionSweep> sweeps;
    for (StripeOrientation o : {StripeOrientation::Horizontal, StripeOrientation::Vertical}) {
      sweeps.push_back(resolution_sweep(freqs, o, cfg.sim, cfg.resolution, cfg.threads));
    }
    write_text(out, sweep_csv(sweeps));
    record_run(cfg, parent_or_cwd(out), argc, argv);
    for (const auto& s : sweeps) {
      out_s << orientation_name(s.orientation) << " limit ";
      if (s.limit) {
        out_s << *s.limit << " lp/mm\n";
      } else {
        out_s << "none\n";
      }
    }
    return kExitOk;
  }
};

struct RoundTripCmd {
  CommonFlags common;
  std::string suite;
  std::size_t count = 0;
  std::string calibration;
  std::string out;
  CLI::Option* count_opt = nullptr;

  void add(CLI::App& app) {
    CLI::App* cmd = app.add_subcommand("roundtrip", "Simulate, decode and score a probe suite");
    common.add(cmd);
    cmd->add_option("--suite", suite, "sphere-strip, footprints or screw");
    count_opt = cmd->add_option("--count", count, "Number of scenarios");
    cmd->add_option("--calibration", calibration, "Reuse this calibration instead of building one");
    cmd->add_option("--out", out, "Directory for report.json and report.txt");
  }

  int run(std::ostream& out_s, std::ostream& err, int argc, const char* const* argv) {
    (void)err;
    RunConfig cfg = common.load();
    if (!suite.empty()) cfg.roundtrip.suite = parse_suite(suite);
    if (count_opt->count()) cfg.roundtrip.count = count;
    cfg.validate();
    CalibrationTable table =
        calibration.empty()
            ? build_calibration(suite_probes(cfg.roundtrip.suite), cfg.sim, cfg.decoder,
                                force_grid(cfg.calibration_step, cfg.sim.material.max_force), cfg.threads)
            : load_calibration(calibration);
    const Decoder decoder(std::move(table), cfg.sim, cfg.decoder);
    const RoundTripResult r = run_roundtrip(decoder, cfg.roundtrip, cfg.sim, cfg.threads);
    if (!out.empty()) {
      ensure_dir(out);
      write_report(r.report, fs::path(out) / "report.json");
      record_run(cfg, out, argc, argv);
    }
    out_s << report_table(r.report);
    const auto low = r.force_mae(0.0, 3.0);
    out_s << "unmatched " << r.unmatched() << " misclassified " << r.misclassified();
    if (low) out_s << " force MAE (0-3 N) " << *low << " N";
    out_s << "\n";
    return kExitOk;
  }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Digital twin of a reflection-layer vision-based tactile sensor", "tactwin"};
  app.require_subcommand(1);
  GenerateCmd generate;
  CalibrateCmd calibrate;
  DecodeCmd decode;
  EvalCmd eval;
  TrainToyCmd train;
  ResolutionCmd resolution;
  RoundTripCmd roundtrip;
  generate.add(app);
  calibrate.add(app);
  decode.add(app);
  eval.add(app);
  train.add(app);
  resolution.add(app);
  roundtrip.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "generate") return generate.run(out, err, argc, argv);
    if (name == "calibrate") return calibrate.run(out, err, argc, argv);
    if (name == "decode") return decode.run(out, err, argc, argv);
    if (name == "eval") return eval.run(out, err, argc, argv);
    if (name == "train-toy") return train.run(out, err, argc, argv);
    if (name == "resolution") return resolution.run(out, err, argc, argv);
    return roundtrip.run(out, err, argc, argv);
  } catch (const StaleCalibrationError& e) {
    err << "error: " << e.what() << "\n"
        << "  config hash:      " << e.expected_hash() << "\n"
        << "  calibration hash: " << e.calibration_hash() << "\n";
    return kExitStaleCalibration;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ScenarioError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitContract;
  } catch (const nlohmann::json::exception& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  }
}

}  // namespace tactwin
