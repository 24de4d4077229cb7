#include "commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "snapture/data.hpp"
#include "snapture/errors.hpp"
#include "snapture/image_io.hpp"
#include "snapture/motion_profile.hpp"
#include "snapture/pipeline.hpp"
#include "snapture/rng.hpp"
#include "snapture/snapshot.hpp"
#include "snapture/synth.hpp"
#include "snapture/train_eval.hpp"

namespace snapture::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string dump(const json &j) { return j.dump(2) + "\n"; }

void write_json(const fs::path &p, const json &j) { write_file_atomic(p, dump(j)); }

std::string csv_escape(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// Options shared by the stages that turn raw sequences into model inputs.
struct PipelineOpts {
  int ssim_window = 7;
  int diff_threshold = 25;
  std::string face = "annotation";
  bool background_removal = false;
  bool morphology = false;
  int min_blob_area = 16;

  void add(CLI::App *app) {
    app->add_option("--ssim-window", ssim_window, "SSIM window side")->capture_default_str();
    app->add_option("--diff-threshold", diff_threshold, "Differential image threshold")
        ->capture_default_str();
    app->add_option("--face", face, "Face removal: annotation or heuristic")
        ->check(CLI::IsMember({"annotation", "heuristic"}))
        ->capture_default_str();
    app->add_flag("--background-removal", background_removal, "Intersect skin with foreground");
    app->add_flag("--morphology", morphology, "Open/close the skin mask");
    app->add_option("--min-blob-area", min_blob_area, "Smallest hand blob in pixels")
        ->capture_default_str();
  }

  PipelineConfig config() const {
    PipelineConfig c;
    c.ssim.window = ssim_window;
    c.diff_threshold = diff_threshold;
    c.extraction.face_source = face == "heuristic" ? FaceSource::heuristic : FaceSource::annotation;
    c.extraction.background_removal = background_removal;
    c.extraction.morphology = morphology;
    c.extraction.min_blob_area = min_blob_area;
    c.extraction.validate();
    return c;
  }

  json to_json() const {
    return {{"ssim_window", ssim_window}, {"diff_threshold", diff_threshold},
            {"face", face},               {"background_removal", background_removal},
            {"morphology", morphology},   {"min_blob_area", min_blob_area}};
  }

  void from_json(const json &j) {
    ssim_window = j.at("ssim_window").get<int>();
    diff_threshold = j.at("diff_threshold").get<int>();
    face = j.at("face").get<std::string>();
    background_removal = j.at("background_removal").get<bool>();
    morphology = j.at("morphology").get<bool>();
    min_blob_area = j.at("min_blob_area").get<int>();
  }
};

struct GateOpts {
  std::optional<double> threshold;
  std::optional<double> calibrate_frac;

  void add(CLI::App *app) {
    auto *t = app->add_option("--threshold", threshold, "Gate threshold on the middle-third mean");
    app->add_option("--calibrate-frac", calibrate_frac,
                    "Calibrate the gate so this fraction of samples is enabled")
        ->check(CLI::Range(0.0, 1.0))
        ->excludes(t);
  }
};

struct ModelOpts {
  std::string variant = "snapture";
  int width = 64, height = 48;
  int hidden = 64, lstm_layers = 2, cnn_ff = 256, fusion = 128;
  double dropout = 0.2;

  void add(CLI::App *app) {
    app->add_option("--variant", variant, "cnnlstm, snapture or snapture-thold")
        ->check(CLI::IsMember({"cnnlstm", "snapture", "snapture-thold", "snapture_thold"}))
        ->capture_default_str();
    add_shape(app);
  }
  void add_shape(CLI::App *app) {
    app->add_option("--input-width", width, "Model input width")->capture_default_str();
    app->add_option("--input-height", height, "Model input height")->capture_default_str();
    app->add_option("--hidden", hidden, "LSTM hidden units")->capture_default_str();
    app->add_option("--lstm-layers", lstm_layers, "Stacked LSTM layers")->capture_default_str();
    app->add_option("--cnn-ff", cnn_ff, "CNN feed-forward width")->capture_default_str();
    app->add_option("--fusion", fusion, "Fusion layer width")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout before the fusion layer")->capture_default_str();
  }

  ModelConfig config(Variant v, int classes) const {
    ModelConfig c;
    c.variant = v;
    c.input_width = width;
    c.input_height = height;
    c.hidden = hidden;
    c.lstm_layers = lstm_layers;
    c.cnn_ff_width = cnn_ff;
    c.fusion_width = fusion;
    c.dropout = dropout;
    c.classes = classes;
    return c;
  }
};

struct TrainOpts {
  std::uint64_t seed = 0;
  double lr = 1e-3;
  int epochs = 40;
  int batch = 64;
  std::string optimizer = "adam";
  double test_frac = 0.3;
  int folds = 0;

  void add(CLI::App *app) {
    app->add_option("--seed", seed, "Base seed")->required();
    app->add_option("--lr", lr, "Learning rate")->capture_default_str();
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--batch", batch, "Mini-batch size")->capture_default_str();
    app->add_option("--optimizer", optimizer, "adam or sgd")
        ->check(CLI::IsMember({"adam", "sgd"}))
        ->capture_default_str();
    app->add_option("--test-frac", test_frac, "Stratified test fraction")->capture_default_str();
    app->add_option("--folds", folds, "Use k-fold splits instead of a stratified split (k >= 2)");
  }

  Hyperparams hyperparams() const {
    Hyperparams h;
    h.learning_rate = lr;
    h.epochs = epochs;
    h.batch_size = batch;
    h.optimizer = optimizer == "sgd" ? nn::OptimizerKind::sgd : nn::OptimizerKind::adam;
    h.seed = seed;
    h.validate();
    return h;
  }

  Protocol protocol(int trials) const {
    Protocol p;
    p.mode = folds >= 2 ? SplitMode::kfold : SplitMode::stratified;
    p.test_frac = test_frac;
    p.folds = folds >= 2 ? folds : 3;
    p.trials = trials;
    return p;
  }
};

struct Corpus {
  Manifest manifest;
  std::vector<Sample> samples;
  std::vector<int> labels;
};

Corpus load_corpus(const fs::path &manifest_path, const PipelineConfig &pc, int w, int h) {
  Corpus c;
  c.manifest = load_manifest(manifest_path);
  if (c.manifest.entries.empty()) throw EmptyCorpus("manifest " + manifest_path.string() + " has no entries");
  for (const auto &e : c.manifest.entries) {
    try {
      c.samples.push_back(prepare_sample(load_sequence(e), pc, w, h));
    } catch (const Error &err) {
      throw Error("sequence " + e.id + ": " + err.what());
    }
    c.labels.push_back(c.samples.back().label);
  }
  return c;
}

void require_gate(Variant v, const GateOpts &g) {
  if (v == Variant::snapture_thold && !g.threshold && !g.calibrate_frac)
    throw ConfigError("snapture-thold needs --threshold or --calibrate-frac");
}

// ---------------------------------------------------------------- profile

struct ProfileCmd {
  fs::path manifest, out;
  GateOpts gate;
  PipelineOpts pipe;

  int run() const {
    const auto m = load_manifest(manifest);
    const auto pc = pipe.config();
    fs::create_directories(out);
    std::vector<MotionProfile> profiles;
    std::vector<std::string> errors(m.entries.size());
    std::vector<std::optional<MotionProfile>> by_entry(m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      try {
        by_entry[i] = compute_profile(load_sequence(m.entries[i]), pc.ssim);
        profiles.push_back(*by_entry[i]);
      } catch (const Error &e) {
        errors[i] = e.what();
      }
    }
    double threshold = 0.0;
    if (gate.threshold) {
      threshold = *gate.threshold;
    } else if (profiles.size() >= 2) {
      threshold = calibrate_threshold(profiles, gate.calibrate_frac.value_or(0.44));
    }

    std::ostringstream prof, summ;
    prof << "sequence_id,frame_index,issim,part_id\n";
    summ << "sequence_id,part1_mean,part2_mean,part3_mean,enabled,dynamics_class,error\n";
    int failures = 0;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      const auto id = csv_escape(m.entries[i].id);
      if (!by_entry[i]) {
        ++failures;
        summ << id << ",,,,,," << csv_escape(errors[i]) << '\n';
        continue;
      }
      const auto &p = *by_entry[i];
      for (std::size_t t = 0; t < p.values.size(); ++t)
        prof << id << ',' << t << ',' << fmt(p.values[t]) << ',' << p.part_of(static_cast<int>(t)) + 1 << '\n';
      const auto d = static_gate(p, threshold);
      summ << id << ',' << fmt(p.part_means[0]) << ',' << fmt(p.part_means[1]) << ','
           << fmt(p.part_means[2]) << ',' << (d.snapshot_enabled ? 1 : 0) << ',' << to_string(d.dynamics)
           << ",\n";
    }
    write_file_atomic(out / "profile.csv", prof.str());
    write_file_atomic(out / "summary.csv", summ.str());
    write_json(out / "gate.json", {{"threshold", threshold},
                                   {"calibrate_frac", gate.threshold ? json() : json(gate.calibrate_frac.value_or(0.44))},
                                   {"sequences", m.entries.size()},
                                   {"failures", failures}});
    if (failures) std::cerr << failures << " sequence(s) failed; see summary.csv\n";
    return failures ? 1 : 0;
  }
};

// --------------------------------------------------------------- snapshot

struct SnapshotCmd {
  fs::path manifest, out;
  GateOpts gate;
  PipelineOpts pipe;
  bool strict = false;

  int run() const {
    const auto m = load_manifest(manifest);
    const auto pc = pipe.config();
    fs::create_directories(out / "snapshots");
    std::vector<std::optional<GestureSequence>> seqs(m.entries.size());
    std::vector<std::optional<MotionProfile>> profiles(m.entries.size());
    std::vector<std::string> errors(m.entries.size());
    std::vector<MotionProfile> valid;
    const bool gated = gate.threshold || gate.calibrate_frac;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      try {
        seqs[i] = load_sequence(m.entries[i]);
        if (gated) {
          profiles[i] = compute_profile(*seqs[i], pc.ssim);
          valid.push_back(*profiles[i]);
        }
      } catch (const Error &e) {
        errors[i] = e.what();
        seqs[i].reset();
      }
    }
    double threshold = 0.0;
    if (gate.threshold) threshold = *gate.threshold;
    else if (gate.calibrate_frac) {
      if (valid.size() < 2) throw ConfigError("calibration needs at least two readable sequences");
      threshold = calibrate_threshold(valid, *gate.calibrate_frac);
    }

    // gated = 1 means the gate closed and no snapshot was taken.
    std::ostringstream csv;
    csv << "sequence_id,peak_index,gated,hand_found,blob_min_row,blob_min_col,blob_max_row,blob_max_col,"
           "blob_area,file,error\n";
    int io_failures = 0, no_hand = 0;
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
      const auto &id = m.entries[i].id;
      if (!seqs[i]) {
        ++io_failures;
        csv << csv_escape(id) << ",,,,,,,,,," << csv_escape(errors[i]) << '\n';
        continue;
      }
      GateDecision d;
      d.snapshot_enabled = true;
      if (gated) d = static_gate(*profiles[i], threshold);
      const int peak = detect_peak(*seqs[i]);
      if (!d.snapshot_enabled) {
        csv << csv_escape(id) << ',' << peak << ",1,,,,,,,,\n";
        continue;
      }
      try {
        const auto s = extract_snapshot(*seqs[i], pc.extraction, d);
        const std::string file = "snapshots/" + id + ".pgm";
        write_pnm(out / file, s->image);
        const auto &b = s->blob.bbox;
        csv << csv_escape(id) << ',' << s->source_index << ",0,1," << b.min_row << ',' << b.min_col << ','
            << b.max_row << ',' << b.max_col << ',' << s->blob.area << ',' << csv_escape(file) << ",\n";
      } catch (const NoHandDetected &e) {
        ++no_hand;
        csv << csv_escape(id) << ',' << peak << ",0,0,,,,,,," << csv_escape(e.what()) << '\n';
      }
    }
    write_file_atomic(out / "snapshots.csv", csv.str());
    if (io_failures || no_hand)
      std::cerr << io_failures << " unreadable sequence(s), " << no_hand << " without a hand blob\n";
    return (io_failures || (strict && no_hand)) ? 1 : 0;
  }
};

// ------------------------------------------------------------------ synth

struct SynthCmd {
  fs::path out;
  std::string preset = "benchmark";
  fs::path spec;
  std::uint64_t seed = 0;
  std::optional<int> per_class, frames, width, height;
  std::optional<double> noise;

  static SynthConfig from_spec(const fs::path &p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open class spec " + p.string());
    SynthConfig c;
    try {
      const json j = json::parse(in);
      const json &classes = j.is_array() ? j : j.at("classes");
      for (const auto &e : classes)
        c.classes.push_back({e.at("name").get<std::string>(), parse_motion(e.at("motion").get<std::string>()),
                             e.at("path").get<std::string>(), parse_pose(e.at("pose").get<std::string>()),
                             e.value("blur_peak", false)});
      if (j.is_object()) c.per_class = j.value("per_class", c.per_class);
    } catch (const json::exception &e) {
      throw ConfigError("class spec " + p.string() + ": " + e.what());
    }
    return c;
  }

  int run() const {
    SynthConfig c = spec.empty() ? synth_preset(preset) : from_spec(spec);
    c.seed = seed;
    if (per_class) c.per_class = *per_class;
    if (frames) c.frames = *frames;
    if (width) c.width = *width;
    if (height) c.height = *height;
    if (noise) c.noise_sigma = *noise;
    c.validate();
    const auto corpus = generate(c);
    write_corpus(out, c, corpus);
    std::cerr << "wrote " << corpus.size() << " sequences to " << out.string() << '\n';
    return 0;
  }
};

// ------------------------------------------------------------------ train

struct TrainCmd {
  fs::path manifest, out;
  ModelOpts model;
  GateOpts gate;
  TrainOpts train;
  PipelineOpts pipe;
  int fold = 0;

  int run() const {
    const Variant v = parse_variant(model.variant);
    require_gate(v, gate);
    const auto hp = train.hyperparams();
    const auto pc = pipe.config();
    const auto corpus = load_corpus(manifest, pc, model.width, model.height);
    ModelConfig mc = model.config(v, static_cast<int>(corpus.manifest.classes.size()));
    if (v == Variant::snapture_thold && gate.threshold) mc.gate_threshold = gate.threshold;
    // A calibrated gate gets its threshold per split.
    if (!(v == Variant::snapture_thold && gate.calibrate_frac)) mc.validate();

    SplitPlan split;
    if (train.folds >= 2) {
      if (fold < 0 || fold >= train.folds) throw ConfigError("--fold must lie in [0, folds)");
      split = kfold(corpus.labels, train.folds, hp.seed)[static_cast<std::size_t>(fold)];
    } else {
      split = stratified_split(corpus.labels, train.test_frac, hp.seed);
    }

    std::optional<SnaptureModel<float>> net;
    const auto r = run_trial(mc, hp, corpus.samples, split, 0, gate.calibrate_frac, &net);

    fs::create_directories(out);
    auto ckpt = net->to_checkpoint();
    ckpt.config["pipeline"] = pipe.to_json();
    ckpt.config["classes"] = corpus.manifest.classes;
    nn::save_checkpoint(out / "checkpoint.bin", ckpt);
    write_file_atomic(out / "loss.csv", loss_csv(r.log));
    json metrics = to_json(r.metrics);
    metrics["variant"] = to_string(v);
    metrics["classes"] = corpus.manifest.classes;
    metrics["seed"] = r.seed;
    metrics["threshold"] = r.threshold ? json(*r.threshold) : json();
    metrics["train_size"] = split.train.size();
    metrics["test_size"] = split.test.size();
    write_json(out / "metrics.json", metrics);
    write_file_atomic(out / "confusion.csv", confusion_csv(r.metrics.confusion, corpus.manifest.classes));
    write_json(out / "split.json", to_json(split));
    write_json(out / "timing.json", {{"train_seconds", r.log.seconds}, {"epochs", hp.epochs}});
    std::cerr << to_string(v) << ": accuracy " << r.metrics.accuracy << ", macro F1 " << r.metrics.macro_f1
              << " (" << split.test.size() << " test sequences)\n";
    return 0;
  }
};

// ------------------------------------------------------------------- eval

struct EvalCmd {
  fs::path manifest, out, checkpoint, split_file;

  int run() const {
    const auto ckpt = nn::load_checkpoint(checkpoint);
    auto net = SnaptureModel<float>::from_checkpoint(ckpt);
    PipelineOpts pipe;
    if (ckpt.config.contains("pipeline")) pipe.from_json(ckpt.config.at("pipeline"));
    const auto &mc = net.config();
    const auto corpus = load_corpus(manifest, pipe.config(), mc.input_width, mc.input_height);
    if (static_cast<int>(corpus.manifest.classes.size()) != mc.classes)
      throw ConfigError("checkpoint expects " + std::to_string(mc.classes) + " classes, manifest declares " +
                        std::to_string(corpus.manifest.classes.size()));

    std::vector<int> test;
    if (!split_file.empty()) {
      std::ifstream in(split_file);
      if (!in) throw ConfigError("cannot open split " + split_file.string());
      test = split_from_json(json::parse(in)).test;
    } else {
      test = iota_indices(static_cast<int>(corpus.samples.size()));
    }
    for (int i : test)
      if (i < 0 || static_cast<std::size_t>(i) >= corpus.samples.size())
        throw IndexError("split index " + std::to_string(i) + " outside the manifest");

    const auto predicted = predict_labels(net, corpus.samples, test);
    std::vector<int> truth;
    for (int i : test) truth.push_back(corpus.samples[static_cast<std::size_t>(i)].label);
    const auto metrics = metrics_from_predictions(truth, predicted, mc.classes);

    fs::create_directories(out);
    json j = to_json(metrics);
    j["variant"] = to_string(mc.variant);
    j["classes"] = corpus.manifest.classes;
    j["test_size"] = test.size();
    write_json(out / "metrics.json", j);
    write_file_atomic(out / "confusion.csv", confusion_csv(metrics.confusion, corpus.manifest.classes));
    std::ostringstream pred;
    pred << "sequence_id,label,predicted,gate\n";
    for (std::size_t k = 0; k < test.size(); ++k) {
      const auto &s = corpus.samples[static_cast<std::size_t>(test[k])];
      pred << csv_escape(s.id) << ',' << corpus.manifest.classes[static_cast<std::size_t>(s.label)] << ','
           << corpus.manifest.classes[static_cast<std::size_t>(predicted[k])] << ','
           << (gate_for(mc, s.middle_mean) ? 1 : 0) << '\n';
    }
    write_file_atomic(out / "predictions.csv", pred.str());
    std::cerr << "accuracy " << metrics.accuracy << ", macro F1 " << metrics.macro_f1 << '\n';
    return 0;
  }
};

// ----------------------------------------------------------------- report

struct ReportCmd {
  fs::path manifest, out;
  std::vector<std::string> variants{"cnnlstm", "snapture", "snapture-thold"};
  int trials = 5;
  ModelOpts model;
  GateOpts gate;
  TrainOpts train;
  PipelineOpts pipe;

  int run() const {
    std::vector<Variant> vs;
    for (const auto &name : variants) {
      vs.push_back(parse_variant(name));
      require_gate(vs.back(), gate);
    }
    if (trials < 1) throw ConfigError("--trials must be >= 1");
    const auto hp = train.hyperparams();
    auto protocol = train.protocol(trials);
    protocol.calibrate_frac = gate.calibrate_frac;
    const auto corpus = load_corpus(manifest, pipe.config(), model.width, model.height);
    const auto &classes = corpus.manifest.classes;

    fs::create_directories(out / "trials");
    json reports = json::array(), timing = json::array();
    std::ostringstream cmp;
    cmp << "variant,trials,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std\n";
    for (Variant v : vs) {
      ModelConfig mc = model.config(v, static_cast<int>(classes.size()));
      if (v == Variant::snapture_thold && gate.threshold) mc.gate_threshold = gate.threshold;
      if (!(v == Variant::snapture_thold && gate.calibrate_frac)) mc.validate();
      std::cerr << "running " << trials << " trial(s) of " << to_string(v) << '\n';
      const auto rep = run_trials(mc, hp, corpus.samples, classes, protocol);
      const std::string name = to_string(v);
      for (const auto &t : rep.trials) {
        json j = to_json(t.metrics);
        j["variant"] = name;
        j["trial"] = t.trial;
        j["seed"] = t.seed;
        j["threshold"] = t.threshold ? json(*t.threshold) : json();
        j["split"] = to_json(t.split);
        write_json(out / "trials" / (name + "_trial" + std::to_string(t.trial) + ".json"), j);
        write_file_atomic(out / "trials" / (name + "_trial" + std::to_string(t.trial) + "_loss.csv"),
                          loss_csv(t.log));
      }
      write_file_atomic(out / ("confusion_" + name + ".csv"), confusion_csv(rep.mean_confusion, classes));
      cmp << name << ',' << trials << ',' << fmt(rep.accuracy.mean) << ',' << fmt(rep.accuracy.std) << ','
          << fmt(rep.macro_f1.mean) << ',' << fmt(rep.macro_f1.std) << '\n';
      reports.push_back(to_json(rep));
      timing.push_back(timing_json(rep));
      std::cerr << "  accuracy " << rep.accuracy.mean << " +- " << rep.accuracy.std << '\n';
    }
    json protocol_json = {{"mode", protocol.mode == SplitMode::kfold ? "kfold" : "stratified"},
                          {"test_frac", protocol.test_frac},
                          {"folds", protocol.folds},
                          {"trials", trials},
                          {"seed", hp.seed},
                          {"epochs", hp.epochs},
                          {"batch", hp.batch_size},
                          {"lr", hp.learning_rate},
                          {"optimizer", train.optimizer}};
    write_json(out / "report.json", {{"classes", classes}, {"protocol", protocol_json}, {"variants", reports}});
    write_file_atomic(out / "comparison.csv", cmp.str());
    write_json(out / "timing.json", timing);
    return 0;
  }
};

} // namespace

int run(const std::vector<std::string> &args) {
  CLI::App app{"Gesture recognition from differential images and peak snapshots"};
  app.set_config("--config", "", "INI/TOML file with option values; command-line flags take precedence");
  app.require_subcommand(1);

  ProfileCmd profile;
  auto *p = app.add_subcommand("profile", "Motion profiles, thirds summary and gate decisions");
  p->add_option("--manifest", profile.manifest, "Manifest (JSON lines)")->required();
  p->add_option("--out", profile.out, "Output directory")->required();
  profile.gate.add(p);
  profile.pipe.add(p);

  SnapshotCmd snapshot;
  auto *s = app.add_subcommand("snapshot", "Peak hand snapshots as PGM plus an extraction CSV");
  s->add_option("--manifest", snapshot.manifest, "Manifest (JSON lines)")->required();
  s->add_option("--out", snapshot.out, "Output directory")->required();
  snapshot.gate.add(s);
  snapshot.pipe.add(s);
  s->add_flag("--strict", snapshot.strict, "Exit nonzero when a sequence has no hand blob");

  SynthCmd synth;
  auto *y = app.add_subcommand("synth", "Render a synthetic gesture corpus");
  y->add_option("--out", synth.out, "Output directory")->required();
  y->add_option("--preset", synth.preset, "benchmark, benchmark-blur or gate")->capture_default_str();
  y->add_option("--spec", synth.spec, "JSON class spec (overrides --preset)");
  y->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  y->add_option("--per-class", synth.per_class, "Sequences per class");
  y->add_option("--frames", synth.frames, "Frames per sequence");
  y->add_option("--width", synth.width, "Frame width");
  y->add_option("--height", synth.height, "Frame height");
  y->add_option("--noise", synth.noise, "Gaussian noise sigma");

  TrainCmd train;
  auto *t = app.add_subcommand("train", "Train one model and test it on a held-out split");
  t->add_option("--manifest", train.manifest, "Manifest (JSON lines)")->required();
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--fold", train.fold, "Test fold when --folds is given")->capture_default_str();
  train.model.add(t);
  train.gate.add(t);
  train.train.add(t);
  train.pipe.add(t);

  EvalCmd eval;
  auto *e = app.add_subcommand("eval", "Evaluate a checkpoint");
  e->add_option("--manifest", eval.manifest, "Manifest (JSON lines)")->required();
  e->add_option("--out", eval.out, "Output directory")->required();
  e->add_option("--checkpoint", eval.checkpoint, "Checkpoint written by train")->required();
  e->add_option("--split", eval.split_file, "split.json; its test part is evaluated (default: all)");

  ReportCmd report;
  auto *r = app.add_subcommand("report", "Repeated trials of several variants side by side");
  r->add_option("--manifest", report.manifest, "Manifest (JSON lines)")->required();
  r->add_option("--out", report.out, "Output directory")->required();
  r->add_option("--variants", report.variants, "Variants to compare")->capture_default_str();
  r->add_option("--trials", report.trials, "Trials per variant")->capture_default_str();
  report.model.add_shape(r);
  report.gate.add(r);
  report.train.add(r);
  report.pipe.add(r);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError &err) {
    return app.exit(err);
  }

  try {
    if (*p) return profile.run();
    if (*s) return snapshot.run();
    if (*y) return synth.run();
    if (*t) return train.run();
    if (*e) return eval.run();
    if (*r) return report.run();
  } catch (const std::exception &err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}

} // namespace snapture::cli
