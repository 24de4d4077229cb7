#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snapture/nn/checkpoint.hpp"
#include "snapture/nn/layers.hpp"
#include "snapture/nn/lstm.hpp"

namespace snapture {

enum class Variant { cnnlstm, snapture, snapture_thold };

const char *to_string(Variant v) noexcept;
/// Accepts "cnnlstm", "snapture", "snapture_thold" and "snapture-thold".
Variant parse_variant(const std::string &name);

struct ModelConfig {
  Variant variant = Variant::snapture;
  int input_width = 64;
  int input_height = 48;
  int conv1_kernels = 5;
  int conv1_size = 11;
  int conv2_kernels = 10;
  int conv2_size = 6;
  int cnn_ff_width = 256;
  int lstm_layers = 2;
  int hidden = 64;
  double dropout = 0.2;
  int classes = 2;
  int fusion_width = 128;
  /// Required by snapture_thold; ignored otherwise.
  std::optional<double> gate_threshold;

  bool has_static_channel() const noexcept { return variant != Variant::cnnlstm; }
  int flattened_width() const noexcept {
    return conv2_kernels * (input_height / 4) * (input_width / 4);
  }
  /// Throws ConfigError.
  void validate() const;
};

nlohmann::json to_json(const ModelConfig &cfg);
ModelConfig model_config_from_json(const nlohmann::json &j);

/// A mini-batch of prepared samples. Differential frames of all sequences are
/// stacked along the first axis; lengths[i] frames belong to sample i.
template <typename Scalar> struct Batch {
  nn::Tensor<Scalar> frames;    ///< [sum T_i, 1, H, W], values in [0, 1]
  std::vector<int> lengths;     ///< T_i >= 1
  nn::Tensor<Scalar> snapshots; ///< [N, 1, H, W]; may be empty for cnnlstm
  std::vector<std::uint8_t> gates;
  std::vector<int> labels;

  int size() const noexcept { return static_cast<int>(lengths.size()); }
};

struct Prediction {
  std::vector<double> probabilities;
  int label = -1;
  bool gate = false;
  bool hand_found = true;
};

/// Two-layer CNN (conv, batch norm, tanh, 2x2 max pool, twice) followed by a
/// tanh feed-forward layer. Input [B, 1, H, W], output [B, ff_width].
template <typename Scalar> class CnnEncoder {
public:
  CnnEncoder() = default;
  CnnEncoder(const std::string &name, const ModelConfig &cfg, Rng &rng);

  nn::Tensor<Scalar> forward(const nn::Tensor<Scalar> &images, nn::Mode mode);
  /// The first convolution never needs an input gradient, so none is returned.
  void backward(const nn::Tensor<Scalar> &grad_features);

  std::vector<nn::Parameter<Scalar> *> parameters();
  std::vector<nn::Buffer<Scalar>> buffers();
  std::vector<nn::BatchNormLayer<Scalar> *> batchnorms() { return {&bn1_, &bn2_}; }
  /// Max-pool selections of the last forward pass, both stages.
  std::vector<nn::Index> pooling_pattern() const;

private:
  nn::Conv2dLayer<Scalar> conv1_;
  nn::BatchNormLayer<Scalar> bn1_;
  nn::TanhLayer<Scalar> act1_;
  nn::MaxPoolLayer<Scalar> pool1_;
  nn::Conv2dLayer<Scalar> conv2_;
  nn::BatchNormLayer<Scalar> bn2_;
  nn::TanhLayer<Scalar> act2_;
  nn::MaxPoolLayer<Scalar> pool2_;
  nn::LinearLayer<Scalar> ff_;
  nn::TanhLayer<Scalar> ff_act_;
  nn::Shape pooled_shape_;
};

/// Dynamic channel (CNN + stateless LSTM over differential images), optional
/// static channel (CNN over the peak snapshot, zeroed when gated off), and a
/// late-fusion head: concat -> dropout -> linear -> tanh -> linear -> softmax.
template <typename Scalar> class SnaptureModel {
public:
  SnaptureModel(const ModelConfig &cfg, std::uint64_t seed);

  const ModelConfig &config() const noexcept { return cfg_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Final top-layer LSTM hidden state at each sample's last valid step, [N, H].
  nn::Tensor<Scalar> dynamic_forward(const nn::Tensor<Scalar> &frames, std::span<const int> lengths,
                                     nn::Mode mode);
  /// [N, ff_width]; rows of gated-off samples are zero.
  nn::Tensor<Scalar> static_forward(const nn::Tensor<Scalar> &snapshots,
                                    std::span<const std::uint8_t> gates, nn::Mode mode);
  /// Logits [N, K] from the fused features.
  nn::Tensor<Scalar> fuse_and_classify(const nn::Tensor<Scalar> &hidden,
                                       const nn::Tensor<Scalar> &features, nn::Mode mode,
                                       std::uint64_t dropout_seed = 0);

  /// Logits [N, K]. Eval mode evaluates each sample on its own so results do
  /// not depend on batch company.
  nn::Tensor<Scalar> forward(const Batch<Scalar> &batch, nn::Mode mode,
                             std::uint64_t dropout_seed = 0);

  /// Mean softmax cross-entropy; keeps the graph for backward().
  double forward_loss(const Batch<Scalar> &batch, nn::Mode mode, std::uint64_t dropout_seed = 0);

  /// Accumulates d(loss)/d(theta) into every parameter's grad. Requires a
  /// preceding forward_loss(); throws GraphStateError otherwise.
  void backward();

  void zero_grad();

  /// Replaces the batch-norm running statistics with the plain average of
  /// the per-batch statistics over batch_at(0 .. count-1), in that order.
  void recalibrate_batchnorm(std::size_t count,
                             const std::function<Batch<Scalar>(std::size_t)> &batch_at);

  const nn::Tensor<Scalar> &last_probabilities() const noexcept { return probabilities_; }
  /// Max-pool selections of the last forward pass over every encoder.
  std::vector<nn::Index> pooling_pattern() const;

  /// Deterministic order: dynamic channel, static channel, head.
  std::vector<nn::Parameter<Scalar> *> parameters();
  std::vector<nn::Buffer<Scalar>> buffers();
  nn::Index parameter_count();

  nn::Checkpoint to_checkpoint();
  static SnaptureModel from_checkpoint(const nn::Checkpoint &ckpt);

private:
  nn::Tensor<Scalar> forward_batch(const Batch<Scalar> &batch, nn::Mode mode,
                                   std::uint64_t dropout_seed);

  ModelConfig cfg_;
  std::uint64_t seed_;
  CnnEncoder<Scalar> dynamic_cnn_;
  std::vector<nn::LstmLayer<Scalar>> lstm_;
  std::optional<CnnEncoder<Scalar>> static_cnn_;
  nn::DropoutLayer<Scalar> head_dropout_;
  nn::LinearLayer<Scalar> fuse_;
  nn::TanhLayer<Scalar> fuse_act_;
  nn::LinearLayer<Scalar> out_;

  // Graph state kept between forward_loss() and backward().
  bool graph_ready_ = false;
  std::vector<int> lengths_;
  std::vector<std::uint8_t> gates_;
  std::vector<int> labels_;
  nn::Index max_steps_ = 0;
  nn::LstmCache<Scalar> lstm_cache_;
  nn::Tensor<Scalar> probabilities_;
};

extern template class CnnEncoder<float>;
extern template class CnnEncoder<double>;
extern template class SnaptureModel<float>;
extern template class SnaptureModel<double>;

} // namespace snapture
