#include "snapture/nn/lstm.hpp"

#include <cmath>

namespace snapture::nn {

namespace {

template <typename Scalar> Scalar sigmoid(Scalar z) { return Scalar(1) / (Scalar(1) + std::exp(-z)); }

template <typename Scalar>
Tensor<Scalar> layer_forward(const Tensor<Scalar> &x, const LstmLayer<Scalar> &layer,
                             LstmLayerCache<Scalar> &c) {
  const Index steps = x.dim(0), batch = x.dim(1), d = x.dim(2);
  const Index h = layer.hidden_size();
  if (layer.input_size() != d)
    throw ShapeError("lstm: layer expects input width " + std::to_string(layer.input_size()) +
                     ", got " + std::to_string(d));
  require_shape(layer.w_hh.value, Shape{4 * h, h}, "lstm w_hh");
  require_shape(layer.bias.value, Shape{4 * h}, "lstm bias");

  c.input = x;
  c.gates = Tensor<Scalar>(Shape{steps, batch, 4 * h});
  c.cell = Tensor<Scalar>(Shape{steps, batch, h});
  c.cell_tanh = Tensor<Scalar>(Shape{steps, batch, h});
  c.hidden = Tensor<Scalar>(Shape{steps, batch, h});

  // Input projections for all steps in one product.
  auto pre = c.gates.matrix(steps * batch, 4 * h);
  pre.noalias() = x.matrix(steps * batch, d) * layer.w_ih.value.matrix().transpose();
  pre.rowwise() += layer.bias.value.values().transpose();

  RowMatrix<Scalar> h_prev = RowMatrix<Scalar>::Zero(batch, h);
  RowMatrix<Scalar> c_prev = RowMatrix<Scalar>::Zero(batch, h);
  const auto w_hh = layer.w_hh.value.matrix();
  for (Index t = 0; t < steps; ++t) {
    Eigen::Map<RowMatrix<Scalar>> z(c.gates.data() + t * batch * 4 * h, batch, 4 * h);
    z.noalias() += h_prev * w_hh.transpose();
    Eigen::Map<RowMatrix<Scalar>> cell(c.cell.data() + t * batch * h, batch, h);
    Eigen::Map<RowMatrix<Scalar>> cell_tanh(c.cell_tanh.data() + t * batch * h, batch, h);
    Eigen::Map<RowMatrix<Scalar>> hid(c.hidden.data() + t * batch * h, batch, h);
    for (Index n = 0; n < batch; ++n) {
      for (Index j = 0; j < h; ++j) {
        const Scalar i_g = sigmoid(z(n, j));
        const Scalar f_g = sigmoid(z(n, h + j));
        const Scalar g_g = std::tanh(z(n, 2 * h + j));
        const Scalar o_g = sigmoid(z(n, 3 * h + j));
        z(n, j) = i_g;
        z(n, h + j) = f_g;
        z(n, 2 * h + j) = g_g;
        z(n, 3 * h + j) = o_g;
        const Scalar cv = f_g * c_prev(n, j) + i_g * g_g;
        cell(n, j) = cv;
        cell_tanh(n, j) = std::tanh(cv);
        hid(n, j) = o_g * cell_tanh(n, j);
      }
    }
    h_prev = hid;
    c_prev = cell;
  }
  return c.hidden;
}

template <typename Scalar>
Tensor<Scalar> layer_backward(LstmLayer<Scalar> &layer, const LstmLayerCache<Scalar> &c,
                              const Tensor<Scalar> &grad_hidden) {
  const Index steps = c.input.dim(0), batch = c.input.dim(1), d = c.input.dim(2);
  const Index h = layer.hidden_size();
  require_shape(grad_hidden, Shape{steps, batch, h}, "lstm grad_hidden");

  Tensor<Scalar> dz_all(Shape{steps, batch, 4 * h});
  RowMatrix<Scalar> dh_next = RowMatrix<Scalar>::Zero(batch, h);
  RowMatrix<Scalar> dc_next = RowMatrix<Scalar>::Zero(batch, h);
  RowMatrix<double> dw_hh = RowMatrix<double>::Zero(4 * h, h);
  const auto w_hh = layer.w_hh.value.matrix();

  for (Index t = steps - 1; t >= 0; --t) {
    Eigen::Map<const RowMatrix<Scalar>> gates(c.gates.data() + t * batch * 4 * h, batch, 4 * h);
    Eigen::Map<const RowMatrix<Scalar>> cell_tanh(c.cell_tanh.data() + t * batch * h, batch, h);
    Eigen::Map<const RowMatrix<Scalar>> dh_out(grad_hidden.data() + t * batch * h, batch, h);
    Eigen::Map<RowMatrix<Scalar>> dz(dz_all.data() + t * batch * 4 * h, batch, 4 * h);
    for (Index n = 0; n < batch; ++n) {
      for (Index j = 0; j < h; ++j) {
        const Scalar i_g = gates(n, j), f_g = gates(n, h + j), g_g = gates(n, 2 * h + j),
                     o_g = gates(n, 3 * h + j);
        const Scalar c_prev = t > 0 ? c.cell(t - 1, n, j) : Scalar(0);
        const Scalar dh = dh_out(n, j) + dh_next(n, j);
        const Scalar tc = cell_tanh(n, j);
        const Scalar dc = dc_next(n, j) + dh * o_g * (Scalar(1) - tc * tc);
        dz(n, j) = dc * g_g * i_g * (Scalar(1) - i_g);
        dz(n, h + j) = dc * c_prev * f_g * (Scalar(1) - f_g);
        dz(n, 2 * h + j) = dc * i_g * (Scalar(1) - g_g * g_g);
        dz(n, 3 * h + j) = dh * tc * o_g * (Scalar(1) - o_g);
        dc_next(n, j) = dc * f_g;
      }
    }
    if (t > 0) {
      Eigen::Map<const RowMatrix<Scalar>> h_prev(c.hidden.data() + (t - 1) * batch * h, batch, h);
      dw_hh += (dz.transpose() * h_prev).template cast<double>();
    }
    dh_next.noalias() = dz * w_hh;
  }

  const auto dz = dz_all.matrix(steps * batch, 4 * h);
  layer.w_hh.grad.matrix() += dw_hh.template cast<Scalar>();
  layer.w_ih.grad.matrix() +=
      (dz.transpose().template cast<double>() * c.input.matrix(steps * batch, d).template cast<double>())
          .template cast<Scalar>();
  layer.bias.grad.values() += dz.template cast<double>().colwise().sum().transpose().template cast<Scalar>();

  Tensor<Scalar> dx(Shape{steps, batch, d});
  dx.matrix(steps * batch, d).noalias() = dz * layer.w_ih.value.matrix();
  return dx;
}

} // namespace

template <typename Scalar>
Tensor<Scalar> lstm_forward(const Tensor<Scalar> &inputs, std::span<const LstmLayer<Scalar>> layers,
                            LstmCache<Scalar> *cache) {
  require_rank(inputs, 3, "lstm inputs");
  if (layers.empty()) throw ShapeError("lstm needs at least one layer");
  LstmCache<Scalar> local;
  LstmCache<Scalar> &c = cache ? *cache : local;
  c.layers.assign(layers.size(), {});
  Tensor<Scalar> x = inputs;
  for (std::size_t l = 0; l < layers.size(); ++l) x = layer_forward(x, layers[l], c.layers[l]);
  return x;
}

template <typename Scalar>
Tensor<Scalar> lstm_backward(std::span<LstmLayer<Scalar>> layers, const LstmCache<Scalar> &cache,
                             const Tensor<Scalar> &grad_hidden) {
  if (cache.layers.size() != layers.size())
    throw GraphStateError("lstm_backward without a matching forward pass");
  Tensor<Scalar> g = grad_hidden;
  for (std::size_t l = layers.size(); l-- > 0;) g = layer_backward(layers[l], cache.layers[l], g);
  return g;
}

template Tensor<float> lstm_forward(const Tensor<float> &, std::span<const LstmLayer<float>>,
                                    LstmCache<float> *);
template Tensor<double> lstm_forward(const Tensor<double> &, std::span<const LstmLayer<double>>,
                                     LstmCache<double> *);
template Tensor<float> lstm_backward(std::span<LstmLayer<float>>, const LstmCache<float> &,
                                     const Tensor<float> &);
template Tensor<double> lstm_backward(std::span<LstmLayer<double>>, const LstmCache<double> &,
                                      const Tensor<double> &);

} // namespace snapture::nn
