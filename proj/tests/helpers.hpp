#pragma once

#include <vector>

#include "snapture/imaging.hpp"
#include "snapture/rng.hpp"

namespace testing {

inline snapture::Frame random_frame(int w, int h, int channels, snapture::Rng &rng) {
  snapture::Frame f(w, h, channels);
  for (auto &v : f.data()) v = static_cast<std::uint8_t>(snapture::uniform_index(rng, 256));
  return f;
}

inline snapture::Frame filled(int w, int h, std::uint8_t v) { return snapture::Frame(w, h, 1, v); }

inline std::vector<std::uint8_t> bits(const snapture::BinaryMask &m) {
  return {m.bits().begin(), m.bits().end()};
}

inline snapture::BinaryMask mask_from(const std::vector<std::uint8_t> &b, int w, int h) {
  snapture::BinaryMask m(w, h);
  for (int i = 0; i < w * h; ++i) m.bits()[i] = b[i];
  return m;
}

} // namespace testing
