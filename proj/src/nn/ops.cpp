#include "snapture/nn/ops.hpp"

#include <cmath>
#include <limits>

#include "snapture/rng.hpp"

namespace snapture::nn {

namespace {

struct ConvGeometry {
  Index n, c, h, w;     // input
  Index o, kh, kw;      // kernel
  Index pad_top, pad_left;
  Index ho, wo;         // output
  Index patch() const { return c * kh * kw; }
  Index pixels() const { return ho * wo; }
};

template <typename Scalar>
ConvGeometry conv_geometry(const Tensor<Scalar> &input, const Tensor<Scalar> &weight,
                           Padding padding) {
  require_rank(input, 4, "conv2d input");
  require_rank(weight, 4, "conv2d weight");
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 weight.dim(0), weight.dim(2), weight.dim(3), 0, 0, 0, 0};
  if (weight.dim(1) != g.c)
    throw ShapeError("conv2d: weight expects " + std::to_string(weight.dim(1)) +
                     " input channels, input has " + std::to_string(g.c));
  Index pad_h = 0, pad_w = 0;
  if (padding == Padding::same) {
    pad_h = g.kh - 1;
    pad_w = g.kw - 1;
    g.pad_top = pad_h / 2;
    g.pad_left = pad_w / 2;
  }
  g.ho = g.h + pad_h - g.kh + 1;
  g.wo = g.w + pad_w - g.kw + 1;
  if (g.ho <= 0 || g.wo <= 0) throw ShapeError("conv2d: kernel larger than padded input");
  return g;
}

// cols is [C*kh*kw, Ho*Wo].
template <typename Scalar> void im2col(const Scalar *img, const ConvGeometry &g, Scalar *cols) {
  for (Index c = 0; c < g.c; ++c) {
    for (Index ky = 0; ky < g.kh; ++ky) {
      for (Index kx = 0; kx < g.kw; ++kx) {
        Scalar *dst = cols + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        const Index x_lo = std::max<Index>(0, g.pad_left - kx);
        const Index x_hi = std::min<Index>(g.wo, g.w + g.pad_left - kx);
        for (Index oy = 0; oy < g.ho; ++oy) {
          Scalar *row = dst + oy * g.wo;
          const Index iy = oy + ky - g.pad_top;
          if (iy < 0 || iy >= g.h || x_lo >= x_hi) {
            std::fill(row, row + g.wo, Scalar(0));
            continue;
          }
          const Scalar *src = img + (c * g.h + iy) * g.w + (kx - g.pad_left);
          std::fill(row, row + x_lo, Scalar(0));
          std::copy(src + x_lo, src + x_hi, row + x_lo);
          std::fill(row + x_hi, row + g.wo, Scalar(0));
        }
      }
    }
  }
}

template <typename Scalar> void col2im(const Scalar *cols, const ConvGeometry &g, Scalar *img) {
  for (Index c = 0; c < g.c; ++c) {
    for (Index ky = 0; ky < g.kh; ++ky) {
      for (Index kx = 0; kx < g.kw; ++kx) {
        const Scalar *src = cols + ((c * g.kh + ky) * g.kw + kx) * g.pixels();
        const Index x_lo = std::max<Index>(0, g.pad_left - kx);
        const Index x_hi = std::min<Index>(g.wo, g.w + g.pad_left - kx);
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy + ky - g.pad_top;
          if (iy < 0 || iy >= g.h) continue;
          Scalar *dst = img + (c * g.h + iy) * g.w + (kx - g.pad_left);
          const Scalar *row = src + oy * g.wo;
          for (Index x = x_lo; x < x_hi; ++x) dst[x] += row[x];
        }
      }
    }
  }
}

Index channel_axis_count(const Shape &s) { return s.size() >= 2 ? s[1] : 0; }

} // namespace

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar> &input, const Tensor<Scalar> &weight,
                      const Tensor<Scalar> &bias, Padding padding) {
  const ConvGeometry g = conv_geometry(input, weight, padding);
  require_shape(bias, Shape{g.o}, "conv2d bias");
  Tensor<Scalar> out(Shape{g.n, g.o, g.ho, g.wo});
  RowMatrix<Scalar> cols(g.patch(), g.pixels());
  const auto w = weight.matrix(g.o, g.patch());
  const auto b = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(bias.data(), g.o);
  for (Index n = 0; n < g.n; ++n) {
    im2col(input.data() + n * g.c * g.h * g.w, g, cols.data());
    Eigen::Map<RowMatrix<Scalar>> y(out.data() + n * g.o * g.pixels(), g.o, g.pixels());
    y.noalias() = w * cols;
    y.colwise() += b;
  }
  return out;
}

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar> &input, const Tensor<Scalar> &weight,
                                    const Tensor<Scalar> &grad_out, Padding padding,
                                    bool need_input_grad) {
  const ConvGeometry g = conv_geometry(input, weight, padding);
  require_shape(grad_out, Shape{g.n, g.o, g.ho, g.wo}, "conv2d grad_out");
  Conv2dGrads<Scalar> grads;
  if (need_input_grad) grads.input = Tensor<Scalar>::zeros_like(input);

  RowMatrix<Scalar> cols(g.patch(), g.pixels());
  RowMatrix<Scalar> dcols;
  if (need_input_grad) dcols.resize(g.patch(), g.pixels());
  RowMatrix<double> dw = RowMatrix<double>::Zero(g.o, g.patch());
  Eigen::VectorXd db = Eigen::VectorXd::Zero(g.o);
  const auto w = weight.matrix(g.o, g.patch());

  for (Index n = 0; n < g.n; ++n) {
    Eigen::Map<const RowMatrix<Scalar>> dy(grad_out.data() + n * g.o * g.pixels(), g.o,
                                           g.pixels());
    im2col(input.data() + n * g.c * g.h * g.w, g, cols.data());
    dw += (dy * cols.transpose()).template cast<double>();
    db += dy.rowwise().sum().template cast<double>();
    if (need_input_grad) {
      dcols.noalias() = w.transpose() * dy;
      col2im(dcols.data(), g, grads.input.data() + n * g.c * g.h * g.w);
    }
  }
  grads.weight = Tensor<Scalar>(weight.shape());
  grads.weight.matrix(g.o, g.patch()) = dw.template cast<Scalar>();
  grads.bias = Tensor<Scalar>(Shape{g.o});
  grads.bias.values() = db.template cast<Scalar>();
  return grads;
}

template <typename Scalar> PoolResult<Scalar> maxpool2d(const Tensor<Scalar> &input) {
  require_rank(input, 4, "maxpool2d input");
  const Index n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h < 2 || w < 2) throw ShapeError("maxpool2d needs H, W >= 2, got " + shape_string(input.shape()));
  const Index ho = h / 2, wo = w / 2;
  PoolResult<Scalar> r{Tensor<Scalar>(Shape{n, c, ho, wo}), {}};
  r.argmax.resize(static_cast<std::size_t>(n * c * ho * wo));
  const Scalar *src = input.data();
  Scalar *dst = r.output.data();
  Index k = 0;
  for (Index plane = 0; plane < n * c; ++plane) {
    const Index base = plane * h * w;
    for (Index oy = 0; oy < ho; ++oy) {
      for (Index ox = 0; ox < wo; ++ox, ++k) {
        Index best = base + 2 * oy * w + 2 * ox;
        for (Index off : {Index{1}, w, w + 1}) {
          const Index cand = base + 2 * oy * w + 2 * ox + off;
          if (src[cand] > src[best]) best = cand;
        }
        dst[k] = src[best];
        r.argmax[static_cast<std::size_t>(k)] = best;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool2d_backward(const Shape &input_shape, std::span<const Index> argmax,
                                  const Tensor<Scalar> &grad_out) {
  if (static_cast<Index>(argmax.size()) != grad_out.size())
    throw ShapeError("maxpool2d_backward: gradient does not match cached pooling indices");
  Tensor<Scalar> grad(input_shape);
  for (std::size_t k = 0; k < argmax.size(); ++k) grad[argmax[k]] += grad_out[static_cast<Index>(k)];
  return grad;
}

template <typename Scalar>
Tensor<Scalar> batchnorm(const Tensor<Scalar> &input, const Tensor<Scalar> &gamma,
                         const Tensor<Scalar> &beta, Tensor<Scalar> &running_mean,
                         Tensor<Scalar> &running_var, Mode mode, BatchNormCache<Scalar> *cache,
                         BatchNormOptions opts) {
  if (input.rank() != 2 && input.rank() != 4)
    throw ShapeError("batchnorm expects [N,C] or [N,C,H,W], got " + shape_string(input.shape()));
  const Index n = input.dim(0), c = channel_axis_count(input.shape());
  const Index inner = input.size() / (n * c);
  for (const Tensor<Scalar> *t :
       std::initializer_list<const Tensor<Scalar> *>{&gamma, &beta, &running_mean, &running_var})
    require_shape(*t, Shape{c}, "batchnorm parameter");
  if (mode == Mode::train && n < 2)
    throw DegenerateBatch("batchnorm in train mode needs a batch of at least 2");

  Tensor<Scalar> out(input.shape());
  BatchNormCache<Scalar> local;
  BatchNormCache<Scalar> &cc = cache ? *cache : local;
  cc.mode = mode;
  cc.xhat = Tensor<Scalar>(input.shape());
  cc.inv_std.assign(static_cast<std::size_t>(c), 0.0);

  const double count = static_cast<double>(n * inner);
  for (Index ch = 0; ch < c; ++ch) {
    double mean, var;
    if (mode == Mode::train) {
      double s = 0.0;
      for (Index i = 0; i < n; ++i) {
        const Scalar *p = input.data() + (i * c + ch) * inner;
        for (Index j = 0; j < inner; ++j) s += p[j];
      }
      mean = s / count;
      double ss = 0.0;
      for (Index i = 0; i < n; ++i) {
        const Scalar *p = input.data() + (i * c + ch) * inner;
        for (Index j = 0; j < inner; ++j) {
          const double d = p[j] - mean;
          ss += d * d;
        }
      }
      var = ss / count;
      const double unbiased = count > 1 ? ss / (count - 1.0) : var;
      running_mean[ch] = static_cast<Scalar>((1.0 - opts.momentum) * running_mean[ch] + opts.momentum * mean);
      running_var[ch] = static_cast<Scalar>((1.0 - opts.momentum) * running_var[ch] + opts.momentum * unbiased);
    } else {
      mean = running_mean[ch];
      var = running_var[ch];
    }
    const double inv_std = 1.0 / std::sqrt(var + opts.eps);
    cc.inv_std[static_cast<std::size_t>(ch)] = inv_std;
    const double g = gamma[ch], b = beta[ch];
    for (Index i = 0; i < n; ++i) {
      const Index off = (i * c + ch) * inner;
      for (Index j = 0; j < inner; ++j) {
        const double xh = (input[off + j] - mean) * inv_std;
        cc.xhat[off + j] = static_cast<Scalar>(xh);
        out[off + j] = static_cast<Scalar>(g * xh + b);
      }
    }
  }
  return out;
}

template <typename Scalar>
BatchNormGrads<Scalar> batchnorm_backward(const BatchNormCache<Scalar> &cache,
                                          const Tensor<Scalar> &gamma,
                                          const Tensor<Scalar> &grad_out) {
  require_shape(grad_out, cache.xhat.shape(), "batchnorm grad_out");
  const Index n = grad_out.dim(0), c = channel_axis_count(grad_out.shape());
  const Index inner = grad_out.size() / (n * c);
  const double count = static_cast<double>(n * inner);
  BatchNormGrads<Scalar> g{Tensor<Scalar>(grad_out.shape()), Tensor<Scalar>(Shape{c}),
                           Tensor<Scalar>(Shape{c})};
  for (Index ch = 0; ch < c; ++ch) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (Index i = 0; i < n; ++i) {
      const Index off = (i * c + ch) * inner;
      for (Index j = 0; j < inner; ++j) {
        sum_dy += grad_out[off + j];
        sum_dy_xhat += static_cast<double>(grad_out[off + j]) * cache.xhat[off + j];
      }
    }
    g.gamma[ch] = static_cast<Scalar>(sum_dy_xhat);
    g.beta[ch] = static_cast<Scalar>(sum_dy);
    const double scale = gamma[ch] * cache.inv_std[static_cast<std::size_t>(ch)];
    for (Index i = 0; i < n; ++i) {
      const Index off = (i * c + ch) * inner;
      for (Index j = 0; j < inner; ++j) {
        double dx;
        if (cache.mode == Mode::train) {
          dx = scale / count *
               (count * grad_out[off + j] - sum_dy - cache.xhat[off + j] * sum_dy_xhat);
        } else {
          dx = scale * grad_out[off + j];
        }
        g.input[off + j] = static_cast<Scalar>(dx);
      }
    }
  }
  return g;
}

template <typename Scalar> Tensor<Scalar> tanh(const Tensor<Scalar> &x) {
  Tensor<Scalar> y(x.shape());
  y.values() = x.values().array().tanh();
  return y;
}

template <typename Scalar>
Tensor<Scalar> tanh_backward(const Tensor<Scalar> &y, const Tensor<Scalar> &grad_out) {
  require_shape(grad_out, y.shape(), "tanh grad_out");
  Tensor<Scalar> g(y.shape());
  g.values() = grad_out.values().array() * (Scalar(1) - y.values().array().square());
  return g;
}

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar> &x, const Tensor<Scalar> &weight,
                      const Tensor<Scalar> &bias) {
  require_rank(x, 2, "linear input");
  require_rank(weight, 2, "linear weight");
  if (weight.dim(1) != x.dim(1))
    throw ShapeError("linear: input width " + std::to_string(x.dim(1)) + " vs weight " +
                     shape_string(weight.shape()));
  require_shape(bias, Shape{weight.dim(0)}, "linear bias");
  Tensor<Scalar> y(Shape{x.dim(0), weight.dim(0)});
  auto ym = y.matrix();
  ym.noalias() = x.matrix() * weight.matrix().transpose();
  ym.rowwise() += bias.values().transpose();
  return y;
}

template <typename Scalar>
LinearGrads<Scalar> linear_backward(const Tensor<Scalar> &x, const Tensor<Scalar> &weight,
                                    const Tensor<Scalar> &grad_out) {
  require_shape(grad_out, Shape{x.dim(0), weight.dim(0)}, "linear grad_out");
  LinearGrads<Scalar> g{Tensor<Scalar>(x.shape()), Tensor<Scalar>(weight.shape()),
                        Tensor<Scalar>(Shape{weight.dim(0)})};
  g.input.matrix().noalias() = grad_out.matrix() * weight.matrix();
  g.weight.matrix().noalias() = grad_out.matrix().transpose() * x.matrix();
  g.bias.values() = grad_out.matrix().colwise().sum().transpose();
  return g;
}

template <typename Scalar>
DropoutResult<Scalar> dropout(const Tensor<Scalar> &x, double rate, Mode mode, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
  if (mode == Mode::eval || rate == 0.0) return {x, {}};
  Rng rng = make_rng(seed, 0xD20);
  DropoutResult<Scalar> r{Tensor<Scalar>(x.shape()), Tensor<Scalar>(x.shape())};
  const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - rate));
  for (Index i = 0; i < x.size(); ++i) {
    r.scale[i] = uniform01(rng) < rate ? Scalar(0) : keep_scale;
    r.output[i] = x[i] * r.scale[i];
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> dropout_backward(const Tensor<Scalar> &scale, const Tensor<Scalar> &grad_out) {
  if (scale.empty()) return grad_out;
  require_shape(grad_out, scale.shape(), "dropout grad_out");
  Tensor<Scalar> g(grad_out.shape());
  g.values() = grad_out.values().cwiseProduct(scale.values());
  return g;
}

template <typename Scalar> Tensor<Scalar> softmax(const Tensor<Scalar> &logits) {
  require_rank(logits, 2, "softmax logits");
  const Index n = logits.dim(0), k = logits.dim(1);
  Tensor<Scalar> p(logits.shape());
  for (Index i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < k; ++j) mx = std::max<double>(mx, logits(i, j));
    double z = 0.0;
    for (Index j = 0; j < k; ++j) z += std::exp(static_cast<double>(logits(i, j)) - mx);
    for (Index j = 0; j < k; ++j)
      p(i, j) = static_cast<Scalar>(std::exp(static_cast<double>(logits(i, j)) - mx) / z);
  }
  return p;
}

template <typename Scalar>
SoftmaxXent<Scalar> softmax_xent(const Tensor<Scalar> &logits, std::span<const int> targets) {
  require_rank(logits, 2, "softmax_xent logits");
  const Index n = logits.dim(0), k = logits.dim(1);
  if (static_cast<Index>(targets.size()) != n)
    throw ShapeError("softmax_xent: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(n) + " rows");
  SoftmaxXent<Scalar> r;
  r.probabilities = Tensor<Scalar>(logits.shape());
  double total = 0.0;
  for (Index i = 0; i < n; ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= k)
      throw LabelOutOfRange("class index " + std::to_string(t) + " outside [0, " +
                            std::to_string(k) + ")");
    double mx = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < k; ++j) mx = std::max<double>(mx, logits(i, j));
    double z = 0.0;
    for (Index j = 0; j < k; ++j) z += std::exp(static_cast<double>(logits(i, j)) - mx);
    const double log_z = std::log(z) + mx;
    for (Index j = 0; j < k; ++j)
      r.probabilities(i, j) = static_cast<Scalar>(std::exp(static_cast<double>(logits(i, j)) - log_z));
    total += log_z - static_cast<double>(logits(i, t));
  }
  r.loss = total / static_cast<double>(n);
  return r;
}

template <typename Scalar>
Tensor<Scalar> softmax_xent_backward(const Tensor<Scalar> &probabilities,
                                     std::span<const int> targets) {
  const Index n = probabilities.dim(0);
  Tensor<Scalar> g = probabilities;
  for (Index i = 0; i < n; ++i) g(i, targets[static_cast<std::size_t>(i)]) -= Scalar(1);
  g.values() /= static_cast<Scalar>(n);
  return g;
}

template <typename Scalar> double sum(const Tensor<Scalar> &x) {
  return x.values().template cast<double>().sum();
}

template <typename Scalar> Tensor<Scalar> sum_backward(const Tensor<Scalar> &x) {
  return Tensor<Scalar>(x.shape(), Scalar(1));
}

#define SNAPTURE_INSTANTIATE_OPS(S)                                                            \
  template Tensor<S> conv2d(const Tensor<S> &, const Tensor<S> &, const Tensor<S> &, Padding); \
  template Conv2dGrads<S> conv2d_backward(const Tensor<S> &, const Tensor<S> &,                \
                                          const Tensor<S> &, Padding, bool);                   \
  template PoolResult<S> maxpool2d(const Tensor<S> &);                                         \
  template Tensor<S> maxpool2d_backward(const Shape &, std::span<const Index>,                 \
                                        const Tensor<S> &);                                    \
  template Tensor<S> batchnorm(const Tensor<S> &, const Tensor<S> &, const Tensor<S> &,        \
                               Tensor<S> &, Tensor<S> &, Mode, BatchNormCache<S> *,            \
                               BatchNormOptions);                                              \
  template BatchNormGrads<S> batchnorm_backward(const BatchNormCache<S> &, const Tensor<S> &,  \
                                                const Tensor<S> &);                            \
  template Tensor<S> tanh(const Tensor<S> &);                                                  \
  template Tensor<S> tanh_backward(const Tensor<S> &, const Tensor<S> &);                      \
  template Tensor<S> linear(const Tensor<S> &, const Tensor<S> &, const Tensor<S> &);          \
  template LinearGrads<S> linear_backward(const Tensor<S> &, const Tensor<S> &,                \
                                          const Tensor<S> &);                                  \
  template DropoutResult<S> dropout(const Tensor<S> &, double, Mode, std::uint64_t);           \
  template Tensor<S> dropout_backward(const Tensor<S> &, const Tensor<S> &);                   \
  template Tensor<S> softmax(const Tensor<S> &);                                               \
  template SoftmaxXent<S> softmax_xent(const Tensor<S> &, std::span<const int>);               \
  template Tensor<S> softmax_xent_backward(const Tensor<S> &, std::span<const int>);           \
  template double sum(const Tensor<S> &);                                                      \
  template Tensor<S> sum_backward(const Tensor<S> &);

SNAPTURE_INSTANTIATE_OPS(float)
SNAPTURE_INSTANTIATE_OPS(double)

} // namespace snapture::nn
