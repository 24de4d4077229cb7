#include "snapture/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace snapture {

namespace {

std::uint8_t round_clamp(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

void require_channels(const Frame &f, int channels, const char *op) {
  if (f.channels() != channels)
    throw InvalidChannelCount(std::string(op) + ": expected " + std::to_string(channels) +
                              " channel(s), got " + std::to_string(f.channels()));
}

void require_same_dims(const Frame &a, const Frame &b, const char *op) {
  if (a.width() != b.width() || a.height() != b.height())
    throw DimensionMismatch(std::string(op) + ": " + std::to_string(a.width()) + "x" +
                            std::to_string(a.height()) + " vs " + std::to_string(b.width()) +
                            "x" + std::to_string(b.height()));
}

// Summed-area table with a zero top row / left column.
using Integral = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename PixelFn> Integral integral_image(int h, int w, PixelFn &&value) {
  Integral s = Integral::Zero(h + 1, w + 1);
  for (int r = 0; r < h; ++r) {
    std::int64_t row = 0;
    for (int c = 0; c < w; ++c) {
      row += value(r, c);
      s(r + 1, c + 1) = s(r, c + 1) + row;
    }
  }
  return s;
}

std::int64_t box_sum(const Integral &s, int r, int c, int size) {
  return s(r + size, c + size) - s(r, c + size) - s(r + size, c) + s(r, c);
}

} // namespace

Frame::Frame(int width, int height, int channels, std::uint8_t fill)
    : width_(width), height_(height), channels_(channels),
      data_(static_cast<std::size_t>(width) * height * channels, fill) {
  if (width <= 0 || height <= 0) throw DimensionMismatch("frame dimensions must be positive");
  if (channels != 1 && channels != 3) throw InvalidChannelCount("frame must have 1 or 3 channels");
}

Frame::Frame(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data)) {
  if (width <= 0 || height <= 0) throw DimensionMismatch("frame dimensions must be positive");
  if (channels != 1 && channels != 3) throw InvalidChannelCount("frame must have 1 or 3 channels");
  if (data_.size() != static_cast<std::size_t>(width) * height * channels)
    throw DimensionMismatch("frame data length does not match width*height*channels");
}

Eigen::Map<const GrayPlane> Frame::plane() const {
  require_channels(*this, 1, "plane");
  return Eigen::Map<const GrayPlane>(data_.data(), height_, width_);
}

BinaryMask::BinaryMask(int width, int height, bool fill)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BinaryMask::is_subset_of(const BinaryMask &other) const {
  if (width_ != other.width_ || height_ != other.height_)
    throw DimensionMismatch("mask subset test on different dimensions");
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] && !other.bits_[i]) return false;
  return true;
}

BinaryMask BinaryMask::operator&(const BinaryMask &other) const {
  if (width_ != other.width_ || height_ != other.height_)
    throw DimensionMismatch("mask AND on different dimensions");
  BinaryMask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] & other.bits_[i];
  return out;
}

BinaryMask BinaryMask::operator|(const BinaryMask &other) const {
  if (width_ != other.width_ || height_ != other.height_)
    throw DimensionMismatch("mask OR on different dimensions");
  BinaryMask out(width_, height_);
  for (std::size_t i = 0; i < bits_.size(); ++i) out.bits_[i] = bits_[i] | other.bits_[i];
  return out;
}

Frame BinaryMask::to_frame() const {
  std::vector<std::uint8_t> px(bits_.size());
  std::transform(bits_.begin(), bits_.end(), px.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
  return Frame(width_, height_, 1, std::move(px));
}

void SsimParams::validate() const {
  if (!(k1 > 0.0 && k1 < 1.0) || !(k2 > 0.0 && k2 < 1.0))
    throw ConfigError("SSIM constants K1, K2 must lie in (0, 1)");
  if (!(dynamic_range > 0.0)) throw ConfigError("SSIM dynamic range must be positive");
  if (window < 3 || window % 2 == 0) throw ConfigError("SSIM window must be odd and >= 3");
  if (stride < 1) throw ConfigError("SSIM stride must be >= 1");
}

Frame to_grayscale(const Frame &rgb) {
  require_channels(rgb, 3, "to_grayscale");
  Frame out(rgb.width(), rgb.height(), 1);
  auto src = rgb.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    // Integer weights keep round-half-up exact.
    const int y = 299 * src[3 * i] + 587 * src[3 * i + 1] + 114 * src[3 * i + 2];
    dst[i] = static_cast<std::uint8_t>((y + 500) / 1000);
  }
  return out;
}

Frame rgb_to_ycbcr(const Frame &rgb) {
  require_channels(rgb, 3, "rgb_to_ycbcr");
  Frame out(rgb.width(), rgb.height(), 3);
  auto src = rgb.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); i += 3) {
    const double r = src[i], g = src[i + 1], b = src[i + 2];
    dst[i] = round_clamp(0.299 * r + 0.587 * g + 0.114 * b);
    dst[i + 1] = round_clamp(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b);
    dst[i + 2] = round_clamp(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b);
  }
  return out;
}

double ssim(const Frame &x, const Frame &y, const SsimParams &p) {
  p.validate();
  require_channels(x, 1, "ssim");
  require_channels(y, 1, "ssim");
  require_same_dims(x, y, "ssim");
  const int h = x.height(), w = x.width(), win = p.window;
  if (h < win || w < win)
    throw WindowTooLarge("ssim: frame " + std::to_string(w) + "x" + std::to_string(h) +
                         " smaller than window " + std::to_string(win));

  const auto px = x.plane();
  const auto py = y.plane();
  const Integral sx = integral_image(h, w, [&](int r, int c) { return std::int64_t{px(r, c)}; });
  const Integral sy = integral_image(h, w, [&](int r, int c) { return std::int64_t{py(r, c)}; });
  const Integral sxx = integral_image(h, w, [&](int r, int c) {
    return std::int64_t{px(r, c)} * px(r, c);
  });
  const Integral syy = integral_image(h, w, [&](int r, int c) {
    return std::int64_t{py(r, c)} * py(r, c);
  });
  const Integral sxy = integral_image(h, w, [&](int r, int c) {
    return std::int64_t{px(r, c)} * py(r, c);
  });

  const std::int64_t n = static_cast<std::int64_t>(win) * win;
  const double n_d = static_cast<double>(n);
  const double n2 = n_d * n_d;
  const double c1 = p.c1(), c2 = p.c2();

  double total = 0.0;
  std::int64_t windows = 0;
  for (int r = 0; r + win <= h; r += p.stride) {
    for (int c = 0; c + win <= w; c += p.stride) {
      const std::int64_t ax = box_sum(sx, r, c, win);
      const std::int64_t ay = box_sum(sy, r, c, win);
      const std::int64_t axx = box_sum(sxx, r, c, win);
      const std::int64_t ayy = box_sum(syy, r, c, win);
      const std::int64_t axy = box_sum(sxy, r, c, win);

      const double mu_x = static_cast<double>(ax) / n_d;
      const double mu_y = static_cast<double>(ay) / n_d;
      const double var_x = static_cast<double>(n * axx - ax * ax) / n2;
      const double var_y = static_cast<double>(n * ayy - ay * ay) / n2;
      const double cov = static_cast<double>(n * axy - ax * ay) / n2;

      const double num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
      const double den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
      total += num / den;
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

double issim(const Frame &frame, const Frame &reference, const SsimParams &p) {
  return 1.0 - ssim(frame, reference, p);
}

BinaryMask differential_image(const Frame &prev, const Frame &cur, const Frame &next,
                              int diff_threshold) {
  require_channels(prev, 1, "differential_image");
  require_channels(cur, 1, "differential_image");
  require_channels(next, 1, "differential_image");
  require_same_dims(prev, cur, "differential_image");
  require_same_dims(cur, next, "differential_image");

  BinaryMask mask(cur.width(), cur.height());
  auto a = prev.data(), b = cur.data(), c = next.data();
  auto bits = mask.bits();
  for (std::size_t i = 0; i < bits.size(); ++i) {
    const bool before = std::abs(int{b[i]} - int{a[i]}) > diff_threshold;
    const bool after = std::abs(int{c[i]} - int{b[i]}) > diff_threshold;
    bits[i] = (before && after) ? 1 : 0;
  }
  return mask;
}

BinaryMask skin_mask(const Frame &ycbcr, Range cb, Range cr) {
  require_channels(ycbcr, 3, "skin_mask");
  BinaryMask mask(ycbcr.width(), ycbcr.height());
  auto src = ycbcr.data();
  auto bits = mask.bits();
  for (std::size_t i = 0; i < bits.size(); ++i)
    bits[i] = (cb.contains(src[3 * i + 1]) && cr.contains(src[3 * i + 2])) ? 1 : 0;
  return mask;
}

std::vector<Blob> connected_components(const BinaryMask &mask) {
  const int h = mask.height(), w = mask.width();
  std::vector<int> label(static_cast<std::size_t>(h) * w, -1);
  std::vector<Blob> blobs;
  std::vector<int> stack;
  auto bits = mask.bits();

  for (int start = 0; start < h * w; ++start) {
    if (!bits[start] || label[start] >= 0) continue;
    const int id = static_cast<int>(blobs.size());
    Blob blob;
    blob.bbox = {start / w, start % w, start / w, start % w};
    double sum_r = 0.0, sum_c = 0.0;
    stack.assign(1, start);
    label[start] = id;
    while (!stack.empty()) {
      const int idx = stack.back();
      stack.pop_back();
      const int r = idx / w, c = idx % w;
      blob.pixels.push_back(idx);
      sum_r += r;
      sum_c += c;
      blob.bbox.min_row = std::min(blob.bbox.min_row, r);
      blob.bbox.max_row = std::max(blob.bbox.max_row, r);
      blob.bbox.min_col = std::min(blob.bbox.min_col, c);
      blob.bbox.max_col = std::max(blob.bbox.max_col, c);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const int n = rr * w + cc;
          if (bits[n] && label[n] < 0) {
            label[n] = id;
            stack.push_back(n);
          }
        }
      }
    }
    std::sort(blob.pixels.begin(), blob.pixels.end());
    blob.area = static_cast<int>(blob.pixels.size());
    blob.topmost_row = blob.bbox.min_row;
    blob.centroid_row = sum_r / blob.area;
    blob.centroid_col = sum_c / blob.area;
    blobs.push_back(std::move(blob));
  }
  return blobs;
}

BinaryMask morph(const BinaryMask &mask, MorphOp op, int radius) {
  if (radius < 1) throw ConfigError("morphology radius must be >= 1");
  const int h = mask.height(), w = mask.width();
  BinaryMask out(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      bool any = false, all = true;
      for (int rr = std::max(0, r - radius); rr <= std::min(h - 1, r + radius); ++rr) {
        for (int cc = std::max(0, c - radius); cc <= std::min(w - 1, c + radius); ++cc) {
          const bool v = mask.get(rr, cc);
          any = any || v;
          all = all && v;
        }
      }
      out.set(r, c, op == MorphOp::dilate ? any : all);
    }
  }
  return out;
}

std::vector<BinaryMask> background_foreground(std::span<const Frame> sequence, int bg_frames,
                                              int fg_threshold) {
  if (bg_frames < 1 || static_cast<int>(sequence.size()) <= bg_frames)
    throw SequenceTooShort("background_foreground needs more than bg_frames (" +
                           std::to_string(bg_frames) + ") frames, got " +
                           std::to_string(sequence.size()));
  for (const auto &f : sequence) {
    require_channels(f, 1, "background_foreground");
    require_same_dims(f, sequence.front(), "background_foreground");
  }
  const std::size_t npx = sequence.front().size();
  std::vector<std::uint8_t> background(npx);
  std::vector<std::uint8_t> samples(static_cast<std::size_t>(bg_frames));
  for (std::size_t i = 0; i < npx; ++i) {
    for (int k = 0; k < bg_frames; ++k) samples[k] = sequence[k].data()[i];
    auto mid = samples.begin() + (bg_frames - 1) / 2;
    std::nth_element(samples.begin(), mid, samples.end());
    background[i] = *mid;
  }

  std::vector<BinaryMask> masks;
  masks.reserve(sequence.size());
  for (const auto &f : sequence) {
    BinaryMask m(f.width(), f.height());
    auto px = f.data();
    auto bits = m.bits();
    for (std::size_t i = 0; i < npx; ++i)
      bits[i] = std::abs(int{px[i]} - int{background[i]}) > fg_threshold ? 1 : 0;
    masks.push_back(std::move(m));
  }
  return masks;
}

namespace {

Frame resample(const Frame &gray, double left, double top, double right, double bottom, int out_w,
               int out_h) {
  const int w = gray.width(), h = gray.height();
  const double sx = (right - left) / out_w;
  const double sy = (bottom - top) / out_h;
  Frame out(out_w, out_h, 1);
  for (int oy = 0; oy < out_h; ++oy) {
    const double fy_src = std::clamp(top + (oy + 0.5) * sy - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(std::floor(fy_src));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = fy_src - y0;
    for (int ox = 0; ox < out_w; ++ox) {
      const double fx_src = std::clamp(left + (ox + 0.5) * sx - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(std::floor(fx_src));
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = fx_src - x0;
      const double top_v = (1.0 - fx) * gray.at(y0, x0) + fx * gray.at(y0, x1);
      const double bot_v = (1.0 - fx) * gray.at(y1, x0) + fx * gray.at(y1, x1);
      out.at(oy, ox) = round_clamp((1.0 - fy) * top_v + fy * bot_v);
    }
  }
  return out;
}

} // namespace

Frame crop_resize(const Frame &gray, const BBox &bbox, double margin_frac, int out_w, int out_h) {
  require_channels(gray, 1, "crop_resize");
  if (bbox.max_row < bbox.min_row || bbox.max_col < bbox.min_col)
    throw InvalidRegion("crop_resize: degenerate bounding box");
  if (bbox.min_row < 0 || bbox.min_col < 0 || bbox.max_row >= gray.height() ||
      bbox.max_col >= gray.width())
    throw InvalidRegion("crop_resize: bounding box outside frame");
  if (margin_frac < 0.0) throw ConfigError("crop margin must be >= 0");
  if (out_w <= 0 || out_h <= 0) throw ConfigError("crop output size must be positive");

  const double mx = margin_frac * bbox.cols();
  const double my = margin_frac * bbox.rows();
  const double left = std::max(0.0, bbox.min_col - mx);
  const double right = std::min<double>(gray.width(), bbox.max_col + 1 + mx);
  const double top = std::max(0.0, bbox.min_row - my);
  const double bottom = std::min<double>(gray.height(), bbox.max_row + 1 + my);
  return resample(gray, left, top, right, bottom, out_w, out_h);
}

Frame resize(const Frame &gray, int out_w, int out_h) {
  require_channels(gray, 1, "resize");
  if (gray.width() == out_w && gray.height() == out_h) return gray;
  return resample(gray, 0.0, 0.0, gray.width(), gray.height(), out_w, out_h);
}

void zero_region(Frame &frame, const BBox &region) {
  const int r0 = std::max(0, region.min_row), r1 = std::min(frame.height() - 1, region.max_row);
  const int c0 = std::max(0, region.min_col), c1 = std::min(frame.width() - 1, region.max_col);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      for (int ch = 0; ch < frame.channels(); ++ch) frame.at(r, c, ch) = 0;
}

} // namespace snapture
