#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "snapture/errors.hpp"

namespace snapture {

using GrayPlane = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 8-bit raster, row-major, channel-interleaved. 1 channel (gray) or 3
/// channels (RGB, or Y/Cb/Cr after rgb_to_ycbcr).
class Frame {
public:
  Frame() = default;
  Frame(int width, int height, int channels, std::uint8_t fill = 0);
  Frame(int width, int height, int channels, std::vector<std::uint8_t> data);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t size() const noexcept { return data_.size(); }

  std::uint8_t &at(int row, int col, int ch = 0) {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }
  std::uint8_t at(int row, int col, int ch = 0) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }

  std::span<std::uint8_t> data() noexcept { return data_; }
  std::span<const std::uint8_t> data() const noexcept { return data_; }

  /// View of a single-channel frame as a height x width matrix.
  Eigen::Map<const GrayPlane> plane() const;

  bool operator==(const Frame &) const = default;

private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<std::uint8_t> data_;
};

/// One bit per pixel, stored as bytes holding 0 or 1.
class BinaryMask {
public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool get(int row, int col) const { return bits_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  void set(int row, int col, bool v = true) {
    bits_[static_cast<std::size_t>(row) * width_ + col] = v ? 1 : 0;
  }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }

  std::size_t count() const;
  bool is_subset_of(const BinaryMask &other) const;
  BinaryMask operator&(const BinaryMask &other) const;
  BinaryMask operator|(const BinaryMask &other) const;

  /// 0 -> 0, 1 -> 255 single-channel frame.
  Frame to_frame() const;

  bool operator==(const BinaryMask &) const = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Inclusive pixel rectangle.
struct BBox {
  int min_row = 0;
  int min_col = 0;
  int max_row = 0;
  int max_col = 0;

  int rows() const noexcept { return max_row - min_row + 1; }
  int cols() const noexcept { return max_col - min_col + 1; }
  bool contains(int row, int col) const noexcept {
    return row >= min_row && row <= max_row && col >= min_col && col <= max_col;
  }
  bool operator==(const BBox &) const = default;
};

struct Blob {
  int area = 0;
  BBox bbox;
  int topmost_row = 0;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  /// Linear indices (row * width + col) of member pixels in scan order.
  std::vector<int> pixels;
};

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
  int window = 7;
  int stride = 1;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  /// Throws ConfigError when the constants or window geometry are invalid.
  void validate() const;
};

enum class MorphOp { erode, dilate };

struct Range {
  int lo;
  int hi;
  bool contains(int v) const noexcept { return v >= lo && v <= hi; }
};

inline constexpr Range kSkinCb{80, 120};
inline constexpr Range kSkinCr{133, 173};

// Color conversions (round-half-up, BT.601 / JPEG full range).
Frame to_grayscale(const Frame &rgb);
Frame rgb_to_ycbcr(const Frame &rgb);

double ssim(const Frame &x, const Frame &y, const SsimParams &p = {});
/// 1 - ssim(frame, reference).
double issim(const Frame &frame, const Frame &reference, const SsimParams &p = {});

/// Pixel set iff |cur - prev| > t and |next - cur| > t.
BinaryMask differential_image(const Frame &prev, const Frame &cur, const Frame &next,
                              int diff_threshold = 25);

/// Chrominance-only skin test with inclusive ranges.
BinaryMask skin_mask(const Frame &ycbcr, Range cb = kSkinCb, Range cr = kSkinCr);

/// 8-connected labeling. Blobs are returned in order of their first pixel in
/// row-major scan.
std::vector<Blob> connected_components(const BinaryMask &mask);

/// Square structuring element of side 2r+1. Neighbors outside the frame are
/// ignored.
BinaryMask morph(const BinaryMask &mask, MorphOp op, int radius);

/// Background is the per-pixel lower median of the first bg_frames frames.
std::vector<BinaryMask> background_foreground(std::span<const Frame> sequence, int bg_frames,
                                              int fg_threshold);

/// Expands bbox by margin_frac of its size on each side, clamps to the frame,
/// and bilinearly resamples the region (pixel-center aligned).
Frame crop_resize(const Frame &gray, const BBox &bbox, double margin_frac = 0.2, int out_w = 64,
                  int out_h = 48);

/// Same resampling over the whole frame.
Frame resize(const Frame &gray, int out_w, int out_h);

/// Zeroes every channel inside the (clamped) rectangle.
void zero_region(Frame &frame, const BBox &region);

} // namespace snapture
