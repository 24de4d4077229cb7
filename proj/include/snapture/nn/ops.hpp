#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "snapture/nn/tensor.hpp"

namespace snapture::nn {

// Forward/backward pairs for every layer type the models use. Backward
// functions take whatever the forward pass cached and return gradients; they
// never mutate parameters.

enum class Padding {
  same,  ///< zero padding floor((k-1)/2) before, ceil((k-1)/2) after; keeps H x W
  valid, ///< no padding
};

/// Cross-correlation. input [N,C,H,W], weight [O,C,kh,kw], bias [O].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar> &input, const Tensor<Scalar> &weight,
                      const Tensor<Scalar> &bias, Padding padding = Padding::same);

template <typename Scalar> struct Conv2dGrads {
  Tensor<Scalar> input; ///< empty when not requested
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar> &input, const Tensor<Scalar> &weight,
                                    const Tensor<Scalar> &grad_out, Padding padding,
                                    bool need_input_grad = true);

template <typename Scalar> struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax; ///< flat input offset of each output's maximum
};

/// 2x2 window, stride 2; trailing odd rows/columns are dropped.
template <typename Scalar> PoolResult<Scalar> maxpool2d(const Tensor<Scalar> &input);

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const Shape &input_shape, std::span<const Index> argmax,
                                  const Tensor<Scalar> &grad_out);

template <typename Scalar> struct BatchNormCache {
  Tensor<Scalar> xhat;
  std::vector<double> inv_std;
  Mode mode = Mode::eval;
};

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.1;
};

/// Per-channel normalization over every axis except 1 (rank 2 [N,C] or rank 4
/// [N,C,H,W]). Train mode uses batch statistics and updates the running
/// statistics (unbiased variance); eval mode uses the running statistics.
template <typename Scalar>
Tensor<Scalar> batchnorm(const Tensor<Scalar> &input, const Tensor<Scalar> &gamma,
                         const Tensor<Scalar> &beta, Tensor<Scalar> &running_mean,
                         Tensor<Scalar> &running_var, Mode mode, BatchNormCache<Scalar> *cache,
                         BatchNormOptions opts = {});

template <typename Scalar> struct BatchNormGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
};

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm_backward(const BatchNormCache<Scalar> &cache,
                                          const Tensor<Scalar> &gamma,
                                          const Tensor<Scalar> &grad_out);

template <typename Scalar> Tensor<Scalar> tanh(const Tensor<Scalar> &x);
/// Gradient through tanh given its output y.
template <typename Scalar>
Tensor<Scalar> tanh_backward(const Tensor<Scalar> &y, const Tensor<Scalar> &grad_out);

/// y = x W^T + b. x [N,in], weight [out,in], bias [out].
template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar> &x, const Tensor<Scalar> &weight,
                      const Tensor<Scalar> &bias);

template <typename Scalar> struct LinearGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;
};

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const Tensor<Scalar> &x, const Tensor<Scalar> &weight,
                                    const Tensor<Scalar> &grad_out);

template <typename Scalar> struct DropoutResult {
  Tensor<Scalar> output;
  Tensor<Scalar> scale; ///< per-element multiplier: 0 or 1/(1-rate); empty in eval mode
};

/// Inverted dropout. Identity in eval mode or at rate 0.
template <typename Scalar>
DropoutResult<Scalar> dropout(const Tensor<Scalar> &x, double rate, Mode mode, std::uint64_t seed);

template <typename Scalar>
Tensor<Scalar> dropout_backward(const Tensor<Scalar> &scale, const Tensor<Scalar> &grad_out);

/// Row-wise softmax of [N,K] logits, computed in double.
template <typename Scalar> Tensor<Scalar> softmax(const Tensor<Scalar> &logits);

template <typename Scalar> struct SoftmaxXent {
  double loss = 0.0; ///< mean over rows of -log p[target]
  Tensor<Scalar> probabilities;
};

template <typename Scalar>
SoftmaxXent<Scalar> softmax_xent(const Tensor<Scalar> &logits, std::span<const int> targets);

/// d(mean loss)/d(logits) = (p - onehot) / N.
template <typename Scalar>
Tensor<Scalar> softmax_xent_backward(const Tensor<Scalar> &probabilities,
                                     std::span<const int> targets);

template <typename Scalar> double sum(const Tensor<Scalar> &x);
template <typename Scalar> Tensor<Scalar> sum_backward(const Tensor<Scalar> &x);

} // namespace snapture::nn
