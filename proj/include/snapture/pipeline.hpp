#pragma once

#include <span>
#include <string>
#include <vector>

#include "snapture/model.hpp"
#include "snapture/snapshot.hpp"

namespace snapture {

struct PipelineConfig {
  SsimParams ssim;
  int diff_threshold = 25;
  ExtractionConfig extraction;
};

/// Everything the model needs from one gesture, computed once. The snapshot
/// is always extracted; whether a variant uses it is decided per variant.
struct Sample {
  std::string id;
  int label = -1;
  int steps = 0;              ///< differential frames, n - 2
  int width = 0, height = 0;  ///< model input size
  std::vector<float> diffs;   ///< steps * height * width, in [0, 1]
  std::vector<float> snapshot;///< height * width, in [0, 1]; zeros when no hand was found
  bool hand_found = false;
  double middle_mean = 0.0;
};

/// Binary motion masks for frames 1..n-2, resampled to the model input size.
std::vector<Frame> differential_sequence(const GestureSequence &sequence, int diff_threshold);

Sample prepare_sample(const GestureSequence &sequence, const PipelineConfig &cfg, int width,
                      int height);

/// Static-channel gate a variant applies to a sample.
bool gate_for(const ModelConfig &model, double middle_mean);

template <typename Scalar>
Batch<Scalar> make_batch(std::span<const Sample> samples, std::span<const int> indices,
                         const ModelConfig &model);

/// End-to-end single-gesture inference: differential images feed the dynamic
/// channel; the motion profile decides the gate (snapture_thold), and only an
/// open gate triggers snapshot extraction.
Prediction predict(SnaptureModel<float> &model, const GestureSequence &sequence,
                   const PipelineConfig &cfg);

} // namespace snapture
