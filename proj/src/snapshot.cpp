#include "snapture/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace snapture {

void ExtractionConfig::validate() const {
  auto valid = [](Range r) { return r.lo >= 0 && r.hi <= 255 && r.lo <= r.hi; };
  if (!valid(cb) || !valid(cr)) throw ConfigError("skin ranges must lie within [0, 255]");
  if (crop_margin < 0.0) throw ConfigError("crop margin must be >= 0");
  if (face_band_rows < 0.0 || face_band_rows > 1.0 || face_band_cols < 0.0 || face_band_cols > 1.0)
    throw ConfigError("face band fractions must lie in [0, 1]");
  if (background_removal && (bg_frames < 1 || fg_threshold < 0))
    throw ConfigError("background removal needs bg_frames >= 1 and fg_threshold >= 0");
  if (morphology && morph_radius < 1) throw ConfigError("morphology radius must be >= 1");
  if (min_fg_overlap < 0.0 || min_fg_overlap > 1.0)
    throw ConfigError("foreground overlap fraction must lie in [0, 1]");
}

int detect_peak(const GestureSequence &sequence) {
  if (sequence.size() == 0) throw SequenceTooShort("detect_peak on an empty sequence");
  return static_cast<int>(sequence.size() / 2);
}

Blob select_hand_blob(std::span<const Blob> blobs, const BinaryMask *foreground,
                      double min_overlap) {
  const Blob *best = nullptr;
  for (const auto &b : blobs) {
    if (foreground) {
      const auto bits = foreground->bits();
      const auto inside = std::count_if(b.pixels.begin(), b.pixels.end(),
                                        [&](int idx) { return bits[idx] != 0; });
      if (static_cast<double>(inside) < min_overlap * b.area) continue;
    }
    if (!best) {
      best = &b;
      continue;
    }
    const auto key = [](const Blob &x) {
      return std::tuple(x.topmost_row, -x.area, x.bbox.min_col);
    };
    if (key(b) < key(*best)) best = &b;
  }
  if (!best) throw NoHandDetected("no skin blob survived filtering");
  return *best;
}

BBox face_band(int width, int height, const ExtractionConfig &cfg) {
  const int rows = static_cast<int>(std::floor(cfg.face_band_rows * height));
  const int cols = static_cast<int>(std::floor(cfg.face_band_cols * width));
  const int c0 = (width - cols) / 2;
  return BBox{0, c0, rows - 1, c0 + cols - 1};
}

namespace {

BinaryMask skin_after_face_removal(const GestureSequence &sequence, int peak,
                                   const ExtractionConfig &cfg) {
  Frame rgb = sequence.frames[peak];
  if (rgb.channels() != 3)
    throw InvalidChannelCount("snapshot extraction needs RGB frames for skin detection");
  const BBox face = (cfg.face_source == FaceSource::annotation && sequence.face_bbox)
                        ? *sequence.face_bbox
                        : face_band(rgb.width(), rgb.height(), cfg);
  if (face.max_row >= face.min_row && face.max_col >= face.min_col) zero_region(rgb, face);
  BinaryMask mask = skin_mask(rgb_to_ycbcr(rgb), cfg.cb, cfg.cr);
  if (cfg.morphology)
    mask = morph(morph(mask, MorphOp::erode, cfg.morph_radius), MorphOp::dilate, cfg.morph_radius);
  return mask;
}

} // namespace

BinaryMask peak_skin_mask(const GestureSequence &sequence, const ExtractionConfig &cfg) {
  cfg.validate();
  return skin_after_face_removal(sequence, detect_peak(sequence), cfg);
}

std::optional<Snapshot> extract_snapshot(const GestureSequence &sequence,
                                         const ExtractionConfig &cfg, const GateDecision &gate) {
  cfg.validate();
  if (sequence.size() < 3)
    throw SequenceTooShort("snapshot extraction needs at least 3 frames");
  if (!gate.snapshot_enabled) return std::nullopt;

  const int peak = detect_peak(sequence);
  const BinaryMask skin = skin_after_face_removal(sequence, peak, cfg);

  std::vector<Blob> blobs = connected_components(skin);
  std::erase_if(blobs, [&](const Blob &b) { return b.area < cfg.min_blob_area; });

  std::optional<BinaryMask> foreground;
  if (cfg.background_removal) {
    const auto gray = grayscale_frames(sequence);
    foreground = background_foreground(gray, cfg.bg_frames, cfg.fg_threshold)[peak];
  }
  const Blob hand =
      select_hand_blob(blobs, foreground ? &*foreground : nullptr, cfg.min_fg_overlap);

  const Frame &peak_frame = sequence.frames[peak];
  const Frame gray = peak_frame.channels() == 3 ? to_grayscale(peak_frame) : peak_frame;

  Snapshot s;
  s.image = crop_resize(gray, hand.bbox, cfg.crop_margin, kSnapshotWidth, kSnapshotHeight);
  s.source_index = peak;
  s.blob = hand;
  s.gate = true;
  return s;
}

} // namespace snapture
