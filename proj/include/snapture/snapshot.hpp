#pragma once

#include <optional>

#include "snapture/data.hpp"
#include "snapture/imaging.hpp"
#include "snapture/motion_profile.hpp"

namespace snapture {

inline constexpr int kSnapshotWidth = 64;
inline constexpr int kSnapshotHeight = 48;

enum class FaceSource { annotation, heuristic };

struct ExtractionConfig {
  Range cb = kSkinCb;
  Range cr = kSkinCr;
  /// annotation: use the sequence's face box when present, else the band.
  FaceSource face_source = FaceSource::annotation;
  double face_band_rows = 0.30;
  double face_band_cols = 0.50;
  bool background_removal = false;
  int bg_frames = 3;
  int fg_threshold = 25;
  double min_fg_overlap = 0.5;
  bool morphology = false;
  int morph_radius = 1;
  int min_blob_area = 16;
  double crop_margin = 0.2;

  void validate() const;
};

struct Snapshot {
  Frame image; ///< 64x48 grayscale
  int source_index = 0;
  Blob blob;
  bool gate = true;
};

/// floor(n / 2).
int detect_peak(const GestureSequence &sequence);

/// Topmost surviving blob; ties by larger area, then smaller min column.
/// With a foreground mask, blobs with less than min_overlap of their area in
/// the foreground are discarded first.
Blob select_hand_blob(std::span<const Blob> blobs, const BinaryMask *foreground = nullptr,
                      double min_overlap = 0.5);

/// Top-center band zeroed when no face annotation is used.
BBox face_band(int width, int height, const ExtractionConfig &cfg);

/// Skin mask of the peak frame after face removal (exposed for inspection).
BinaryMask peak_skin_mask(const GestureSequence &sequence, const ExtractionConfig &cfg);

/// std::nullopt when the gate disables the static channel.
std::optional<Snapshot> extract_snapshot(const GestureSequence &sequence,
                                         const ExtractionConfig &cfg, const GateDecision &gate);

} // namespace snapture
