#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "snapture/data.hpp"
#include "snapture/imaging.hpp"

namespace snapture {

enum class DynamicsClass { paused, repeating_pattern };

const char *to_string(DynamicsClass d) noexcept;

/// ISSIM of every frame against frame 0, split into thirds.
struct MotionProfile {
  std::string sequence_id;
  std::vector<double> values;
  std::array<int, 2> boundaries{}; ///< floor(n/3), floor(2n/3)
  std::array<double, 3> part_means{};

  /// Part of frame index i (0, 1 or 2).
  int part_of(int index) const noexcept;
  double middle_mean() const noexcept { return part_means[1]; }
};

struct GateDecision {
  double middle_mean = 0.0;
  double threshold = 0.0;
  bool snapshot_enabled = false;
  DynamicsClass dynamics = DynamicsClass::repeating_pattern;
};

/// Builds a profile from precomputed ISSIM values (values[0] must be 0).
MotionProfile make_profile(std::string sequence_id, std::vector<double> values);

/// Frames are converted to grayscale when they carry 3 channels.
MotionProfile compute_profile(const GestureSequence &sequence, const SsimParams &p = {});

/// Enabled iff the middle-third mean lies strictly below the threshold.
GateDecision static_gate(const MotionProfile &profile, double threshold);

/// Linear-interpolated target_enabled_frac quantile of the middle-third means.
double calibrate_threshold(std::span<const MotionProfile> profiles, double target_enabled_frac);

/// Shared with tests: same quantile rule on raw values.
double interpolated_quantile(std::vector<double> values, double q);

/// Grayscale view of a sequence (copies 1-channel frames as is).
std::vector<Frame> grayscale_frames(const GestureSequence &sequence);

} // namespace snapture
