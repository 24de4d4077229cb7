#include "snapture/pipeline.hpp"

#include <algorithm>

namespace snapture {

namespace {

void append_scaled(std::vector<float> &dst, const Frame &f) {
  for (auto v : f.data()) dst.push_back(static_cast<float>(v) / 255.0f);
}

Frame fit(const Frame &f, int width, int height) {
  return f.width() == width && f.height() == height ? f : resize(f, width, height);
}

} // namespace

std::vector<Frame> differential_sequence(const GestureSequence &sequence, int diff_threshold) {
  if (sequence.size() < 3) throw SequenceTooShort("differential images need at least 3 frames");
  const auto gray = grayscale_frames(sequence);
  std::vector<Frame> out;
  out.reserve(gray.size() - 2);
  for (std::size_t i = 1; i + 1 < gray.size(); ++i)
    out.push_back(differential_image(gray[i - 1], gray[i], gray[i + 1], diff_threshold).to_frame());
  return out;
}

Sample prepare_sample(const GestureSequence &sequence, const PipelineConfig &cfg, int width,
                      int height) {
  Sample s;
  s.id = sequence.id;
  s.label = sequence.label;
  s.width = width;
  s.height = height;
  const auto diffs = differential_sequence(sequence, cfg.diff_threshold);
  s.steps = static_cast<int>(diffs.size());
  s.diffs.reserve(diffs.size() * static_cast<std::size_t>(width * height));
  for (const auto &d : diffs) append_scaled(s.diffs, fit(d, width, height));

  s.middle_mean = compute_profile(sequence, cfg.ssim).middle_mean();

  GateDecision open;
  open.snapshot_enabled = true;
  open.dynamics = DynamicsClass::paused;
  try {
    auto snap = extract_snapshot(sequence, cfg.extraction, open);
    append_scaled(s.snapshot, fit(snap->image, width, height));
    s.hand_found = true;
  } catch (const NoHandDetected &) {
    s.snapshot.assign(static_cast<std::size_t>(width * height), 0.0f);
  }
  return s;
}

bool gate_for(const ModelConfig &model, double middle_mean) {
  switch (model.variant) {
  case Variant::cnnlstm: return false;
  case Variant::snapture: return true;
  case Variant::snapture_thold: return middle_mean < model.gate_threshold.value();
  }
  return false;
}

template <typename Scalar>
Batch<Scalar> make_batch(std::span<const Sample> samples, std::span<const int> indices,
                         const ModelConfig &model) {
  const nn::Index h = model.input_height, w = model.input_width;
  const nn::Index plane = h * w;
  nn::Index total = 0;
  for (int i : indices) {
    const auto &s = samples[static_cast<std::size_t>(i)];
    if (s.width != w || s.height != h)
      throw ShapeError("sample " + s.id + " was prepared for " + std::to_string(s.width) + "x" +
                       std::to_string(s.height) + ", model expects " + std::to_string(w) + "x" +
                       std::to_string(h));
    total += s.steps;
  }
  Batch<Scalar> b;
  const nn::Index n = static_cast<nn::Index>(indices.size());
  b.frames = nn::Tensor<Scalar>({total, 1, h, w});
  if (model.has_static_channel()) b.snapshots = nn::Tensor<Scalar>({n, 1, h, w});
  nn::Index row = 0;
  for (nn::Index k = 0; k < n; ++k) {
    const auto &s = samples[static_cast<std::size_t>(indices[k])];
    std::transform(s.diffs.begin(), s.diffs.end(), b.frames.data() + row * plane,
                   [](float v) { return static_cast<Scalar>(v); });
    row += s.steps;
    b.lengths.push_back(s.steps);
    b.labels.push_back(s.label);
    const bool gate = gate_for(model, s.middle_mean);
    b.gates.push_back(gate ? 1 : 0);
    if (model.has_static_channel() && gate)
      std::transform(s.snapshot.begin(), s.snapshot.end(), b.snapshots.data() + k * plane,
                     [](float v) { return static_cast<Scalar>(v); });
  }
  return b;
}

template Batch<float> make_batch(std::span<const Sample>, std::span<const int>, const ModelConfig &);
template Batch<double> make_batch(std::span<const Sample>, std::span<const int>, const ModelConfig &);

Prediction predict(SnaptureModel<float> &model, const GestureSequence &sequence,
                   const PipelineConfig &cfg) {
  const auto &mc = model.config();
  Sample s;
  s.id = sequence.id;
  s.label = 0;
  s.width = mc.input_width;
  s.height = mc.input_height;
  for (const auto &d : differential_sequence(sequence, cfg.diff_threshold))
    append_scaled(s.diffs, fit(d, s.width, s.height));
  s.steps = static_cast<int>(s.diffs.size() / static_cast<std::size_t>(s.width * s.height));

  Prediction p;
  p.gate = mc.variant == Variant::snapture;
  if (mc.variant == Variant::snapture_thold) {
    const auto gate = static_gate(compute_profile(sequence, cfg.ssim), *mc.gate_threshold);
    p.gate = gate.snapshot_enabled;
    s.middle_mean = gate.middle_mean;
  }
  s.snapshot.assign(static_cast<std::size_t>(s.width * s.height), 0.0f);
  if (p.gate) {
    GateDecision open;
    open.snapshot_enabled = true;
    open.dynamics = DynamicsClass::paused;
    try {
      auto snap = extract_snapshot(sequence, cfg.extraction, open);
      s.snapshot.clear();
      append_scaled(s.snapshot, fit(snap->image, s.width, s.height));
    } catch (const NoHandDetected &) {
      p.hand_found = false;
    }
  }
  const int idx = 0;
  auto batch = make_batch<float>(std::span<const Sample>(&s, 1), std::span<const int>(&idx, 1), mc);
  const auto probs = nn::softmax(model.forward(batch, nn::Mode::eval));
  p.probabilities.assign(probs.data(), probs.data() + probs.size());
  p.label = static_cast<int>(std::max_element(p.probabilities.begin(), p.probabilities.end()) -
                             p.probabilities.begin());
  return p;
}

} // namespace snapture
