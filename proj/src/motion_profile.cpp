#include "snapture/motion_profile.hpp"

#include <algorithm>
#include <cmath>

namespace snapture {

const char *to_string(DynamicsClass d) noexcept {
  return d == DynamicsClass::paused ? "paused" : "repeating_pattern";
}

int MotionProfile::part_of(int index) const noexcept {
  if (index < boundaries[0]) return 0;
  if (index < boundaries[1]) return 1;
  return 2;
}

MotionProfile make_profile(std::string sequence_id, std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  if (n < 3)
    throw SequenceTooShort("motion profile needs at least 3 frames, got " + std::to_string(n));
  MotionProfile p;
  p.sequence_id = std::move(sequence_id);
  p.values = std::move(values);
  p.boundaries = {n / 3, (2 * n) / 3};
  const std::array<int, 4> edges{0, p.boundaries[0], p.boundaries[1], n};
  for (int part = 0; part < 3; ++part) {
    double sum = 0.0;
    for (int i = edges[part]; i < edges[part + 1]; ++i) sum += p.values[i];
    p.part_means[part] = sum / (edges[part + 1] - edges[part]);
  }
  return p;
}

std::vector<Frame> grayscale_frames(const GestureSequence &sequence) {
  std::vector<Frame> gray;
  gray.reserve(sequence.size());
  for (const auto &f : sequence.frames) gray.push_back(f.channels() == 3 ? to_grayscale(f) : f);
  return gray;
}

MotionProfile compute_profile(const GestureSequence &sequence, const SsimParams &p) {
  if (sequence.size() < 3)
    throw SequenceTooShort("motion profile needs at least 3 frames, got " +
                           std::to_string(sequence.size()));
  const auto gray = grayscale_frames(sequence);
  std::vector<double> values(gray.size(), 0.0);
  for (std::size_t i = 1; i < gray.size(); ++i) values[i] = issim(gray[i], gray[0], p);
  return make_profile(sequence.id, std::move(values));
}

GateDecision static_gate(const MotionProfile &profile, double threshold) {
  if (!(threshold > 0.0)) throw ConfigError("gate threshold must be positive");
  GateDecision g;
  g.middle_mean = profile.middle_mean();
  g.threshold = threshold;
  g.snapshot_enabled = g.middle_mean < threshold;
  g.dynamics = g.snapshot_enabled ? DynamicsClass::paused : DynamicsClass::repeating_pattern;
  return g;
}

double interpolated_quantile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyCorpus("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double calibrate_threshold(std::span<const MotionProfile> profiles, double target_enabled_frac) {
  if (profiles.empty()) throw EmptyCorpus("calibrate_threshold: no profiles");
  if (!(target_enabled_frac > 0.0 && target_enabled_frac < 1.0))
    throw ConfigError("target enabled fraction must lie in (0, 1)");
  std::vector<double> middles;
  middles.reserve(profiles.size());
  for (const auto &p : profiles) middles.push_back(p.middle_mean());
  return interpolated_quantile(std::move(middles), target_enabled_frac);
}

} // namespace snapture
