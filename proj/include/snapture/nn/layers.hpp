#pragma once

#include <optional>
#include <string>
#include <vector>

#include "snapture/nn/init.hpp"
#include "snapture/nn/ops.hpp"

namespace snapture::nn {

// Stateful wrappers around the free functions in ops.hpp: each owns its
// parameters and the activations its backward pass needs. backward() without
// a preceding forward() throws GraphStateError.

template <typename Scalar> class Conv2dLayer {
public:
  Conv2dLayer() = default;
  Conv2dLayer(const std::string &name, Index in_channels, Index out_channels, Index kernel, Rng &rng,
              Padding padding = Padding::same)
      : weight(name + ".weight",
               xavier_uniform_init<Scalar>(Shape{out_channels, in_channels, kernel, kernel},
                                           in_channels * kernel * kernel,
                                           out_channels * kernel * kernel, rng)),
        bias(name + ".bias", Tensor<Scalar>(Shape{out_channels})), padding_(padding) {}

  Tensor<Scalar> forward(const Tensor<Scalar> &x) {
    input_ = x;
    return conv2d(x, weight.value, bias.value, padding_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar> &grad_out, bool need_input_grad = true) {
    if (!input_) throw GraphStateError(weight.name + ": backward without forward");
    auto g = conv2d_backward(*input_, weight.value, grad_out, padding_, need_input_grad);
    weight.grad.values() += g.weight.values();
    bias.grad.values() += g.bias.values();
    input_.reset();
    return std::move(g.input);
  }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

private:
  Padding padding_ = Padding::same;
  std::optional<Tensor<Scalar>> input_;
};

template <typename Scalar> class BatchNormLayer {
public:
  BatchNormLayer() = default;
  BatchNormLayer(const std::string &name, Index channels, BatchNormOptions opts = {})
      : gamma(name + ".gamma", Tensor<Scalar>(Shape{channels}, Scalar(1))),
        beta(name + ".beta", Tensor<Scalar>(Shape{channels})),
        running_mean(Shape{channels}), running_var(Shape{channels}, Scalar(1)), name_(name),
        opts_(opts) {}

  Tensor<Scalar> forward(const Tensor<Scalar> &x, Mode mode) {
    cache_.emplace();
    return batchnorm(x, gamma.value, beta.value, running_mean, running_var, mode, &*cache_, opts_);
  }

  Tensor<Scalar> backward(const Tensor<Scalar> &grad_out) {
    if (!cache_) throw GraphStateError(name_ + ": backward without forward");
    auto g = batchnorm_backward(*cache_, gamma.value, grad_out);
    gamma.grad.values() += g.gamma.values();
    beta.grad.values() += g.beta.values();
    cache_.reset();
    return std::move(g.input);
  }

  const std::string &name() const noexcept { return name_; }
  void set_momentum(double m) noexcept { opts_.momentum = m; }
  double momentum() const noexcept { return opts_.momentum; }
  void reset_running_stats() {
    running_mean.set_zero();
    running_var.values().setOnes();
  }

  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Tensor<Scalar> running_mean;
  Tensor<Scalar> running_var;

private:
  std::string name_;
  BatchNormOptions opts_;
  std::optional<BatchNormCache<Scalar>> cache_;
};

template <typename Scalar> class MaxPoolLayer {
public:
  Tensor<Scalar> forward(const Tensor<Scalar> &x) {
    auto r = maxpool2d(x);
    input_shape_ = x.shape();
    argmax_ = std::move(r.argmax);
    return std::move(r.output);
  }
  Tensor<Scalar> backward(const Tensor<Scalar> &grad_out) {
    if (!input_shape_) throw GraphStateError("maxpool: backward without forward");
    auto g = maxpool2d_backward(*input_shape_, argmax_, grad_out);
    input_shape_.reset();
    return g;
  }

  /// Winning input offsets of the most recent forward().
  const std::vector<Index> &last_argmax() const noexcept { return argmax_; }

private:
  std::optional<Shape> input_shape_;
  std::vector<Index> argmax_;
};

template <typename Scalar> class TanhLayer {
public:
  Tensor<Scalar> forward(const Tensor<Scalar> &x) {
    output_ = tanh(x);
    return *output_;
  }
  Tensor<Scalar> backward(const Tensor<Scalar> &grad_out) {
    if (!output_) throw GraphStateError("tanh: backward without forward");
    auto g = tanh_backward(*output_, grad_out);
    output_.reset();
    return g;
  }

private:
  std::optional<Tensor<Scalar>> output_;
};

template <typename Scalar> class LinearLayer {
public:
  LinearLayer() = default;
  LinearLayer(const std::string &name, Index in, Index out, Rng &rng)
      : weight(name + ".weight", xavier_uniform_init<Scalar>(Shape{out, in}, in, out, rng)),
        bias(name + ".bias", Tensor<Scalar>(Shape{out})) {}

  Tensor<Scalar> forward(const Tensor<Scalar> &x) {
    input_ = x;
    return linear(x, weight.value, bias.value);
  }
  Tensor<Scalar> backward(const Tensor<Scalar> &grad_out) {
    if (!input_) throw GraphStateError(weight.name + ": backward without forward");
    auto g = linear_backward(*input_, weight.value, grad_out);
    weight.grad.values() += g.weight.values();
    bias.grad.values() += g.bias.values();
    input_.reset();
    return std::move(g.input);
  }

  Index in_features() const { return weight.value.dim(1); }
  Index out_features() const { return weight.value.dim(0); }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

private:
  std::optional<Tensor<Scalar>> input_;
};

template <typename Scalar> class DropoutLayer {
public:
  explicit DropoutLayer(double rate = 0.0) : rate_(rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  }
  Tensor<Scalar> forward(const Tensor<Scalar> &x, Mode mode, std::uint64_t seed) {
    auto r = dropout(x, rate_, mode, seed);
    scale_ = std::move(r.scale);
    active_ = true;
    return std::move(r.output);
  }
  Tensor<Scalar> backward(const Tensor<Scalar> &grad_out) {
    if (!active_) throw GraphStateError("dropout: backward without forward");
    active_ = false;
    return dropout_backward(scale_, grad_out);
  }
  double rate() const noexcept { return rate_; }

private:
  double rate_;
  bool active_ = false;
  Tensor<Scalar> scale_;
};

} // namespace snapture::nn
