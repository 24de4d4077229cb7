#pragma once

#include <span>
#include <vector>

#include "snapture/nn/tensor.hpp"

namespace snapture::nn {

/// One LSTM layer. Gate blocks are stacked in the order input, forget,
/// candidate, output along the first axis of the weights.
template <typename Scalar> struct LstmLayer {
  Parameter<Scalar> w_ih; ///< [4H, D]
  Parameter<Scalar> w_hh; ///< [4H, H]
  Parameter<Scalar> bias; ///< [4H]

  Index input_size() const { return w_ih.value.dim(1); }
  Index hidden_size() const { return w_hh.value.dim(1); }
};

template <typename Scalar> struct LstmLayerCache {
  Tensor<Scalar> input; ///< [T, N, D]
  Tensor<Scalar> gates; ///< [T, N, 4H] post-activation i, f, g, o
  Tensor<Scalar> cell;  ///< [T, N, H]
  Tensor<Scalar> cell_tanh;
  Tensor<Scalar> hidden;
};

template <typename Scalar> struct LstmCache {
  std::vector<LstmLayerCache<Scalar>> layers;
};

/// Stateless stacked LSTM: every sequence starts from zero hidden and cell
/// state. inputs [T, N, D]; returns top-layer hidden states [T, N, H].
template <typename Scalar>
Tensor<Scalar> lstm_forward(const Tensor<Scalar> &inputs, std::span<const LstmLayer<Scalar>> layers,
                            LstmCache<Scalar> *cache = nullptr);

/// Backpropagation through time. grad_hidden is d(loss)/d(top hidden) for
/// every step [T, N, H]. Parameter gradients are accumulated into the
/// layers; the return value is d(loss)/d(inputs).
template <typename Scalar>
Tensor<Scalar> lstm_backward(std::span<LstmLayer<Scalar>> layers, const LstmCache<Scalar> &cache,
                             const Tensor<Scalar> &grad_hidden);

} // namespace snapture::nn
