#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snapture/data.hpp"
#include "snapture/nn/optim.hpp"
#include "snapture/pipeline.hpp"

namespace snapture {

struct Hyperparams {
  double learning_rate = 1e-3;
  int epochs = 40;
  int batch_size = 64;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainLog {
  std::vector<double> epoch_loss; ///< sample-weighted mean per epoch
  double seconds = 0.0;
};

/// Mini-batch index lists for one epoch: a seeded shuffle cut into batches,
/// with a trailing singleton merged into the batch before it.
std::vector<std::vector<int>> epoch_batches(std::span<const int> indices, int batch_size,
                                            std::uint64_t seed, int epoch);

/// Trains in place. Batch-norm running statistics are re-estimated over the
/// training set in index order once training ends.
TrainLog train(SnaptureModel<float> &model, std::span<const Sample> samples,
               std::span<const int> train_indices, const Hyperparams &hp);

struct Metrics {
  std::vector<std::vector<long>> confusion; ///< rows true, columns predicted
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;

  long total() const;
};

Metrics metrics_from_confusion(std::vector<std::vector<long>> confusion);
Metrics metrics_from_predictions(std::span<const int> truth, std::span<const int> predicted,
                                 int classes);

/// Eval-mode labels in index order.
std::vector<int> predict_labels(SnaptureModel<float> &model, std::span<const Sample> samples,
                                std::span<const int> indices);

Metrics evaluate(SnaptureModel<float> &model, std::span<const Sample> samples,
                 std::span<const int> test_indices);

enum class SplitMode { stratified, kfold };

struct Protocol {
  SplitMode mode = SplitMode::stratified;
  double test_frac = 0.3;
  int folds = 3;
  int trials = 5;
  /// snapture_thold only: recalibrate the gate on each training part to this
  /// enabled fraction instead of using the configured threshold.
  std::optional<double> calibrate_frac;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  SplitPlan split;
  std::optional<double> threshold;
  TrainLog log;
  Metrics metrics;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0; ///< sample standard deviation; 0 for a single trial
};

Summary summarize(std::span<const double> values);

struct TrialReport {
  std::string variant;
  std::vector<std::string> classes;
  std::vector<TrialResult> trials;
  Summary accuracy;
  Summary macro_f1;
  std::vector<Summary> per_class_f1;
  std::vector<std::vector<double>> mean_confusion;
};

/// Plans for trials 0..n-1. Stratified: split seed base+i. K-fold: folds from
/// the base seed, trial i tests on fold i mod k.
std::vector<SplitPlan> trial_splits(std::span<const int> labels, const Protocol &protocol,
                                    std::uint64_t base_seed);

/// Trains a fresh model with seed hp.seed + trial on split.train and tests it
/// on split.test. With calibrate_frac, a snapture_thold gate is recalibrated
/// on the training part first.
TrialResult run_trial(const ModelConfig &model, const Hyperparams &hp,
                      std::span<const Sample> samples, const SplitPlan &split, int trial,
                      std::optional<double> calibrate_frac = std::nullopt,
                      std::optional<SnaptureModel<float>> *trained = nullptr);

/// Trial i trains a fresh model with seed base+i on its split and evaluates it.
TrialReport run_trials(const ModelConfig &model, const Hyperparams &hp,
                       std::span<const Sample> samples, std::span<const std::string> classes,
                       const Protocol &protocol);

/// Recomputes means, standard deviations and the mean confusion matrix.
void aggregate(TrialReport &report);

nlohmann::json to_json(const Metrics &m);
nlohmann::json to_json(const TrialReport &r);
/// Wall-clock numbers kept apart so metric files stay reproducible.
nlohmann::json timing_json(const TrialReport &r);

std::string confusion_csv(const std::vector<std::vector<long>> &confusion,
                          std::span<const std::string> classes);
std::string confusion_csv(const std::vector<std::vector<double>> &confusion,
                          std::span<const std::string> classes);
std::string loss_csv(const TrainLog &log);

} // namespace snapture
