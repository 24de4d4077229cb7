#pragma once

#include <cmath>
#include <cstdint>

#include "snapture/nn/tensor.hpp"
#include "snapture/rng.hpp"

namespace snapture::nn {

inline double xavier_bound(Index fan_in, Index fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// Values i.i.d. uniform on +-sqrt(6 / (fan_in + fan_out)).
template <typename Scalar>
Tensor<Scalar> xavier_uniform_init(Shape shape, Index fan_in, Index fan_out, Rng &rng) {
  if (fan_in <= 0 || fan_out <= 0) throw ConfigError("xavier init needs positive fans");
  const double bound = xavier_bound(fan_in, fan_out);
  Tensor<Scalar> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(uniform(rng, -bound, bound));
  return t;
}

template <typename Scalar>
Tensor<Scalar> xavier_uniform_init(Shape shape, Index fan_in, Index fan_out, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x1417);
  return xavier_uniform_init<Scalar>(std::move(shape), fan_in, fan_out, rng);
}

} // namespace snapture::nn
