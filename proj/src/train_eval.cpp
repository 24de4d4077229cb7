#include "snapture/train_eval.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace snapture {

void Hyperparams::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning rate must be finite and >= 0");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
}

namespace {

// Consecutive runs of batch_size; a trailing singleton joins the run before
// it so batch norm always sees at least two samples.
std::vector<std::vector<int>> chunk(const std::vector<int> &order, int batch_size) {
  std::vector<std::vector<int>> batches;
  const auto b = static_cast<std::size_t>(batch_size);
  for (std::size_t i = 0; i < order.size(); i += b)
    batches.emplace_back(order.begin() + static_cast<long>(i),
                         order.begin() + static_cast<long>(std::min(order.size(), i + b)));
  if (batches.size() > 1 && batches.back().size() == 1) {
    batches[batches.size() - 2].push_back(batches.back().front());
    batches.pop_back();
  }
  return batches;
}

} // namespace

std::vector<std::vector<int>> epoch_batches(std::span<const int> indices, int batch_size,
                                            std::uint64_t seed, int epoch) {
  std::vector<int> order(indices.begin(), indices.end());
  Rng rng = make_rng(seed, 0x5eed0000u + static_cast<std::uint64_t>(epoch));
  shuffle(order, rng);
  return chunk(order, batch_size);
}

TrainLog train(SnaptureModel<float> &model, std::span<const Sample> samples,
               std::span<const int> train_indices, const Hyperparams &hp) {
  hp.validate();
  if (train_indices.empty()) throw EmptyCorpus("training set is empty");
  if (static_cast<std::size_t>(hp.batch_size) > train_indices.size())
    throw ConfigError("batch size " + std::to_string(hp.batch_size) + " exceeds the " +
                      std::to_string(train_indices.size()) + " training samples");
  const auto t0 = std::chrono::steady_clock::now();
  nn::Optimizer<float> opt({hp.optimizer, hp.learning_rate});
  auto params = model.parameters();
  const auto &cfg = model.config();
  TrainLog log;
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    double sum = 0.0;
    for (const auto &idx : epoch_batches(train_indices, hp.batch_size, hp.seed, epoch)) {
      const auto batch = make_batch<float>(samples, idx, cfg);
      model.zero_grad();
      const double loss = model.forward_loss(batch, nn::Mode::train, hp.seed * 1000003u + step++);
      if (!std::isfinite(loss)) throw TrainingDiverged(epoch);
      model.backward();
      opt.step(params);
      sum += loss * static_cast<double>(idx.size());
    }
    log.epoch_loss.push_back(sum / static_cast<double>(train_indices.size()));
  }

  std::vector<int> ordered(train_indices.begin(), train_indices.end());
  std::sort(ordered.begin(), ordered.end());
  const auto chunks = chunk(ordered, hp.batch_size);
  model.recalibrate_batchnorm(chunks.size(), [&](std::size_t k) {
    return make_batch<float>(samples, chunks[k], cfg);
  });
  log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

long Metrics::total() const {
  long n = 0;
  for (const auto &row : confusion)
    for (long v : row) n += v;
  return n;
}

Metrics metrics_from_confusion(std::vector<std::vector<long>> confusion) {
  Metrics m;
  const std::size_t k = confusion.size();
  for (const auto &row : confusion)
    if (row.size() != k) throw ShapeError("confusion matrix must be square");
  m.confusion = std::move(confusion);
  const long total = m.total();
  long trace = 0;
  for (std::size_t c = 0; c < k; ++c) trace += m.confusion[c][c];
  m.accuracy = total > 0 ? static_cast<double>(trace) / static_cast<double>(total) : 0.0;
  m.per_class_f1.assign(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    long fp = 0, fn = 0;
    for (std::size_t o = 0; o < k; ++o) {
      if (o == c) continue;
      fp += m.confusion[o][c];
      fn += m.confusion[c][o];
    }
    const long tp = m.confusion[c][c];
    const long denom = 2 * tp + fp + fn;
    m.per_class_f1[c] = denom > 0 ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
  }
  double s = 0.0;
  for (double f : m.per_class_f1) s += f;
  m.macro_f1 = k > 0 ? s / static_cast<double>(k) : 0.0;
  return m;
}

Metrics metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                 int classes) {
  if (truth.size() != predicted.size()) throw ShapeError("truth and prediction counts differ");
  std::vector<std::vector<long>> cm(static_cast<std::size_t>(classes),
                                    std::vector<long>(static_cast<std::size_t>(classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes)
      throw LabelOutOfRange("label outside [0, " + std::to_string(classes) + ")");
    ++cm[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return metrics_from_confusion(std::move(cm));
}

std::vector<int> predict_labels(SnaptureModel<float> &model, std::span<const Sample> samples,
                                std::span<const int> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int i : indices) {
    const auto batch = make_batch<float>(samples, std::span<const int>(&i, 1), model.config());
    const auto logits = model.forward(batch, nn::Mode::eval);
    int best = 0;
    for (nn::Index c = 1; c < logits.dim(1); ++c)
      if (logits(0, c) > logits(0, best)) best = static_cast<int>(c);
    out.push_back(best);
  }
  return out;
}

Metrics evaluate(SnaptureModel<float> &model, std::span<const Sample> samples,
                 std::span<const int> test_indices) {
  if (test_indices.empty()) throw EmptyCorpus("test set is empty");
  std::vector<int> truth;
  for (int i : test_indices) truth.push_back(samples[static_cast<std::size_t>(i)].label);
  const auto pred = predict_labels(model, samples, test_indices);
  return metrics_from_predictions(truth, pred, model.config().classes);
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::vector<SplitPlan> trial_splits(std::span<const int> labels, const Protocol &protocol,
                                    std::uint64_t base_seed) {
  if (protocol.trials < 1) throw ConfigError("trial count must be >= 1");
  std::vector<SplitPlan> plans;
  if (protocol.mode == SplitMode::kfold) {
    const auto folds = kfold(labels, protocol.folds, base_seed);
    for (int t = 0; t < protocol.trials; ++t) plans.push_back(folds[static_cast<std::size_t>(t % protocol.folds)]);
  } else {
    for (int t = 0; t < protocol.trials; ++t)
      plans.push_back(stratified_split(labels, protocol.test_frac, base_seed + static_cast<std::uint64_t>(t)));
  }
  return plans;
}

TrialResult run_trial(const ModelConfig &model, const Hyperparams &hp,
                      std::span<const Sample> samples, const SplitPlan &split, int trial,
                      std::optional<double> calibrate_frac,
                      std::optional<SnaptureModel<float>> *trained) {
  TrialResult r;
  r.trial = trial;
  r.seed = hp.seed + static_cast<std::uint64_t>(trial);
  r.split = split;
  ModelConfig mc = model;
  if (mc.variant == Variant::snapture_thold && calibrate_frac) {
    std::vector<double> means;
    for (int i : r.split.train) means.push_back(samples[static_cast<std::size_t>(i)].middle_mean);
    mc.gate_threshold = interpolated_quantile(means, *calibrate_frac);
  }
  if (mc.variant == Variant::snapture_thold) r.threshold = mc.gate_threshold;
  Hyperparams h = hp;
  h.seed = r.seed;
  SnaptureModel<float> net(mc, r.seed);
  try {
    r.log = train(net, samples, r.split.train, h);
  } catch (const TrainingDiverged &e) {
    throw TrainingDiverged(e.epoch(), trial);
  }
  r.metrics = evaluate(net, samples, r.split.test);
  if (trained) trained->emplace(std::move(net));
  return r;
}

TrialReport run_trials(const ModelConfig &model, const Hyperparams &hp,
                       std::span<const Sample> samples, std::span<const std::string> classes,
                       const Protocol &protocol) {
  TrialReport report;
  report.variant = to_string(model.variant);
  report.classes.assign(classes.begin(), classes.end());
  std::vector<int> labels;
  for (const auto &s : samples) labels.push_back(s.label);
  const auto plans = trial_splits(labels, protocol, hp.seed);
  for (int t = 0; t < protocol.trials; ++t)
    report.trials.push_back(
        run_trial(model, hp, samples, plans[static_cast<std::size_t>(t)], t, protocol.calibrate_frac));
  aggregate(report);
  return report;
}

void aggregate(TrialReport &report) {
  std::vector<double> acc, f1;
  for (const auto &t : report.trials) {
    acc.push_back(t.metrics.accuracy);
    f1.push_back(t.metrics.macro_f1);
  }
  report.accuracy = summarize(acc);
  report.macro_f1 = summarize(f1);
  report.per_class_f1.clear();
  report.mean_confusion.clear();
  if (report.trials.empty()) return;
  const std::size_t k = report.trials.front().metrics.per_class_f1.size();
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<double> v;
    for (const auto &t : report.trials) v.push_back(t.metrics.per_class_f1.at(c));
    report.per_class_f1.push_back(summarize(v));
  }
  report.mean_confusion.assign(k, std::vector<double>(k, 0.0));
  for (const auto &t : report.trials)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        report.mean_confusion[i][j] += static_cast<double>(t.metrics.confusion.at(i).at(j));
  for (auto &row : report.mean_confusion)
    for (auto &v : row) v /= static_cast<double>(report.trials.size());
}

nlohmann::json to_json(const Metrics &m) {
  return {{"accuracy", m.accuracy},
          {"macro_f1", m.macro_f1},
          {"per_class_f1", m.per_class_f1},
          {"confusion", m.confusion},
          {"total", m.total()}};
}

static nlohmann::json to_json(const Summary &s) { return {{"mean", s.mean}, {"std", s.std}}; }

nlohmann::json to_json(const TrialReport &r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto &t : r.trials) {
    nlohmann::json j = to_json(t.metrics);
    j["trial"] = t.trial;
    j["seed"] = t.seed;
    j["fold"] = t.split.fold;
    j["train_size"] = t.split.train.size();
    j["test_size"] = t.split.test.size();
    j["threshold"] = t.threshold ? nlohmann::json(*t.threshold) : nlohmann::json();
    j["final_loss"] = t.log.epoch_loss.empty() ? nlohmann::json() : nlohmann::json(t.log.epoch_loss.back());
    trials.push_back(std::move(j));
  }
  nlohmann::json per_class = nlohmann::json::array();
  for (const auto &s : r.per_class_f1) per_class.push_back(to_json(s));
  return {{"variant", r.variant},     {"classes", r.classes},
          {"trials", trials},         {"accuracy", to_json(r.accuracy)},
          {"macro_f1", to_json(r.macro_f1)}, {"per_class_f1", per_class},
          {"mean_confusion", r.mean_confusion}};
}

nlohmann::json timing_json(const TrialReport &r) {
  nlohmann::json seconds = nlohmann::json::array();
  std::vector<double> v;
  for (const auto &t : r.trials) {
    seconds.push_back(t.log.seconds);
    v.push_back(t.log.seconds);
  }
  return {{"variant", r.variant}, {"train_seconds", seconds}, {"train_seconds_summary", to_json(summarize(v))}};
}

namespace {
template <typename T>
std::string matrix_csv(const std::vector<std::vector<T>> &m, std::span<const std::string> classes) {
  std::ostringstream os;
  os.precision(17);
  os << "true\\predicted";
  for (const auto &c : classes) os << ',' << c;
  os << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << (i < classes.size() ? classes[i] : std::to_string(i));
    for (const auto &v : m[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}
} // namespace

std::string confusion_csv(const std::vector<std::vector<long>> &c, std::span<const std::string> classes) {
  return matrix_csv(c, classes);
}
std::string confusion_csv(const std::vector<std::vector<double>> &c, std::span<const std::string> classes) {
  return matrix_csv(c, classes);
}

std::string loss_csv(const TrainLog &log) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,loss\n";
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) os << e << ',' << log.epoch_loss[e] << '\n';
  return os.str();
}

} // namespace snapture
