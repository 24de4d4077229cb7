#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "snapture/data.hpp"

namespace snapture {

// Synthetic gesture corpus: a seated figure (face, torso, resting hand) over
// a low-texture backdrop, with one skin-colored hand polygon moving along a
// class path. Paused classes travel to the peak with a neutral fist, unfold
// the class pose while holding still, and return; repeating classes keep
// cycling with motion blur through the middle of the sequence.

enum class Motion { paused, repeating };

/// Hand poses; the fist doubles as the neutral transport pose.
enum class Pose { fist, open_palm, point, flat, v_sign, curl };

struct ClassSpec {
  std::string name;
  Motion motion = Motion::paused;
  std::string path; ///< raise, left, right, forward, beckon, circle, wave, turn, shake
  Pose pose = Pose::fist;
  /// Repeating classes: a longer exposure around the peak frame.
  bool blur_peak = false;
};

struct SynthConfig {
  std::vector<ClassSpec> classes;
  int per_class = 40;
  int frames = 15;
  int width = 128;
  int height = 96;
  double noise_sigma = 2.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
};

/// benchmark, benchmark-blur, gate.
SynthConfig synth_preset(const std::string &name);

Pose parse_pose(const std::string &name);
const char *to_string(Pose p) noexcept;
Motion parse_motion(const std::string &name);
const char *to_string(Motion m) noexcept;

struct SynthSequence {
  GestureSequence sequence;
  std::string class_name;
  Motion motion = Motion::paused;
  /// Hand center per frame (x, y) before blur; the centroid track.
  std::vector<std::array<double, 2>> trajectory;
  /// Nominal path (no per-sequence jitter), shared by classes with the same path.
  std::vector<std::array<double, 2>> nominal;
};

/// Per-class nominal hand-center track for a path name.
std::vector<std::array<double, 2>> nominal_path(const std::string &path, int frames, int width,
                                                int height);

std::vector<SynthSequence> generate(const SynthConfig &cfg);

/// Writes <out>/seq_XXXX/frame_XXX.ppm, <out>/manifest.jsonl (with a class
/// header line and face boxes) and <out>/trajectories.csv.
void write_corpus(const std::filesystem::path &out, const SynthConfig &cfg,
                  const std::vector<SynthSequence> &corpus);

} // namespace snapture
