#include "snapture/model.hpp"

#include <algorithm>
#include <numeric>

namespace snapture {

using nn::Index;
using nn::Mode;
using nn::Shape;
using nn::Tensor;

const char *to_string(Variant v) noexcept {
  switch (v) {
  case Variant::cnnlstm: return "cnnlstm";
  case Variant::snapture: return "snapture";
  case Variant::snapture_thold: return "snapture_thold";
  }
  return "?";
}

Variant parse_variant(const std::string &name) {
  if (name == "cnnlstm") return Variant::cnnlstm;
  if (name == "snapture") return Variant::snapture;
  if (name == "snapture_thold" || name == "snapture-thold") return Variant::snapture_thold;
  throw ConfigError("unknown variant '" + name + "'");
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const char *what) {
    if (!ok) throw ConfigError(std::string("model config: ") + what);
  };
  need(input_width >= 4 && input_height >= 4, "input must be at least 4x4");
  need(input_width % 4 == 0 && input_height % 4 == 0, "input sides must be multiples of 4");
  need(conv1_kernels >= 1 && conv2_kernels >= 1, "kernel counts must be >= 1");
  need(conv1_size >= 1 && conv2_size >= 1, "kernel sizes must be >= 1");
  need(cnn_ff_width >= 1 && fusion_width >= 1, "layer widths must be >= 1");
  need(lstm_layers >= 1 && hidden >= 1, "lstm needs >= 1 layer and >= 1 hidden unit");
  need(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  need(classes >= 2, "class count must be >= 2");
  if (variant == Variant::snapture_thold)
    need(gate_threshold && *gate_threshold > 0.0, "snapture_thold needs a gate threshold > 0");
}

nlohmann::json to_json(const ModelConfig &c) {
  nlohmann::json j = {{"variant", to_string(c.variant)},
                      {"input_width", c.input_width},
                      {"input_height", c.input_height},
                      {"conv1_kernels", c.conv1_kernels},
                      {"conv1_size", c.conv1_size},
                      {"conv2_kernels", c.conv2_kernels},
                      {"conv2_size", c.conv2_size},
                      {"cnn_ff_width", c.cnn_ff_width},
                      {"lstm_layers", c.lstm_layers},
                      {"hidden", c.hidden},
                      {"dropout", c.dropout},
                      {"classes", c.classes},
                      {"fusion_width", c.fusion_width}};
  j["gate_threshold"] = c.gate_threshold ? nlohmann::json(*c.gate_threshold) : nlohmann::json();
  return j;
}

ModelConfig model_config_from_json(const nlohmann::json &j) {
  ModelConfig c;
  try {
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.input_width = j.at("input_width").get<int>();
    c.input_height = j.at("input_height").get<int>();
    c.conv1_kernels = j.at("conv1_kernels").get<int>();
    c.conv1_size = j.at("conv1_size").get<int>();
    c.conv2_kernels = j.at("conv2_kernels").get<int>();
    c.conv2_size = j.at("conv2_size").get<int>();
    c.cnn_ff_width = j.at("cnn_ff_width").get<int>();
    c.lstm_layers = j.at("lstm_layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.classes = j.at("classes").get<int>();
    c.fusion_width = j.at("fusion_width").get<int>();
    if (j.contains("gate_threshold") && !j["gate_threshold"].is_null())
      c.gate_threshold = j["gate_threshold"].get<double>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

template <typename S>
CnnEncoder<S>::CnnEncoder(const std::string &name, const ModelConfig &cfg, Rng &rng)
    : conv1_(name + ".conv1", 1, cfg.conv1_kernels, cfg.conv1_size, rng),
      bn1_(name + ".bn1", cfg.conv1_kernels),
      conv2_(name + ".conv2", cfg.conv1_kernels, cfg.conv2_kernels, cfg.conv2_size, rng),
      bn2_(name + ".bn2", cfg.conv2_kernels),
      ff_(name + ".ff", cfg.flattened_width(), cfg.cnn_ff_width, rng) {}

template <typename S> Tensor<S> CnnEncoder<S>::forward(const Tensor<S> &images, Mode mode) {
  nn::require_rank(images, 4, "cnn input");
  auto x = pool1_.forward(act1_.forward(bn1_.forward(conv1_.forward(images), mode)));
  x = pool2_.forward(act2_.forward(bn2_.forward(conv2_.forward(x), mode)));
  pooled_shape_ = x.shape();
  const Index b = x.dim(0);
  const Index flat = x.size() / std::max<Index>(b, 1);
  if (flat != ff_.in_features())
    throw ShapeError("cnn input " + nn::shape_string(images.shape()) + " flattens to " +
                     std::to_string(flat) + ", expected " + std::to_string(ff_.in_features()));
  return ff_act_.forward(ff_.forward(std::move(x).reshaped({b, flat})));
}

template <typename S> void CnnEncoder<S>::backward(const Tensor<S> &grad_features) {
  auto g = ff_.backward(ff_act_.backward(grad_features)).reshaped(pooled_shape_);
  g = conv2_.backward(bn2_.backward(act2_.backward(pool2_.backward(g))));
  conv1_.backward(bn1_.backward(act1_.backward(pool1_.backward(g))), false);
}

template <typename S> std::vector<Index> CnnEncoder<S>::pooling_pattern() const {
  auto p = pool1_.last_argmax();
  const auto &q = pool2_.last_argmax();
  p.insert(p.end(), q.begin(), q.end());
  return p;
}

template <typename S> std::vector<nn::Parameter<S> *> CnnEncoder<S>::parameters() {
  return {&conv1_.weight, &conv1_.bias, &bn1_.gamma, &bn1_.beta, &conv2_.weight,
          &conv2_.bias,   &bn2_.gamma,  &bn2_.beta,  &ff_.weight,   &ff_.bias};
}

template <typename S> std::vector<nn::Buffer<S>> CnnEncoder<S>::buffers() {
  return {{bn1_.name() + ".running_mean", &bn1_.running_mean},
          {bn1_.name() + ".running_var", &bn1_.running_var},
          {bn2_.name() + ".running_mean", &bn2_.running_mean},
          {bn2_.name() + ".running_var", &bn2_.running_var}};
}

// ---------------------------------------------------------------------------

// Each component draws from its own stream, so the dynamic channel starts
// from the same weights whichever variant is built around it.
template <typename S>
SnaptureModel<S>::SnaptureModel(const ModelConfig &cfg, std::uint64_t seed)
    : cfg_((cfg.validate(), cfg)), seed_(seed), head_dropout_(cfg.dropout) {
  Rng dyn = make_rng(seed, 1);
  dynamic_cnn_ = CnnEncoder<S>("dynamic", cfg_, dyn);
  Index in = cfg_.cnn_ff_width;
  const Index h = cfg_.hidden;
  for (int l = 0; l < cfg_.lstm_layers; ++l) {
    const std::string p = "lstm." + std::to_string(l);
    nn::LstmLayer<S> layer;
    layer.w_ih = {p + ".w_ih", nn::xavier_uniform_init<S>({4 * h, in}, in, 4 * h, dyn)};
    layer.w_hh = {p + ".w_hh", nn::xavier_uniform_init<S>({4 * h, h}, h, 4 * h, dyn)};
    layer.bias = {p + ".bias", Tensor<S>(Shape{4 * h})};
    lstm_.push_back(std::move(layer));
    in = h;
  }
  if (cfg_.has_static_channel()) {
    Rng st = make_rng(seed, 2);
    static_cnn_.emplace("static", cfg_, st);
  }
  Rng head = make_rng(seed, 3);
  const Index fused = h + (cfg_.has_static_channel() ? cfg_.cnn_ff_width : 0);
  fuse_ = nn::LinearLayer<S>("head.fuse", fused, cfg_.fusion_width, head);
  out_ = nn::LinearLayer<S>("head.out", cfg_.fusion_width, cfg_.classes, head);
}

template <typename S>
Tensor<S> SnaptureModel<S>::dynamic_forward(const Tensor<S> &frames, std::span<const int> lengths,
                                            Mode mode) {
  nn::require_rank(frames, 4, "dynamic input");
  if (lengths.empty()) throw ShapeError("dynamic input: empty batch");
  Index total = 0, tmax = 0;
  for (int t : lengths) {
    if (t < 1) throw ShapeError("dynamic input: sequence length must be >= 1");
    total += t;
    tmax = std::max<Index>(tmax, t);
  }
  if (total != frames.dim(0))
    throw ShapeError("dynamic input: lengths sum to " + std::to_string(total) + " but " +
                     std::to_string(frames.dim(0)) + " frames were given");

  const auto feats = dynamic_cnn_.forward(frames, mode);
  const Index n = static_cast<Index>(lengths.size());
  const Index f = feats.dim(1);
  // Pack into [Tmax, N, F]; padded steps stay zero and are never read.
  Tensor<S> seq(Shape{tmax, n, f});
  Index row = 0;
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < lengths[i]; ++t, ++row)
      seq.matrix(tmax * n, f).row(t * n + i) = feats.matrix().row(row);

  lstm_cache_ = {};
  const auto hs =
      nn::lstm_forward<S>(seq, std::span<const nn::LstmLayer<S>>(lstm_), &lstm_cache_);
  const Index h = cfg_.hidden;
  Tensor<S> last(Shape{n, h});
  for (Index i = 0; i < n; ++i)
    last.matrix().row(i) = hs.matrix(tmax * n, h).row((lengths[i] - 1) * n + i);
  lengths_.assign(lengths.begin(), lengths.end());
  max_steps_ = tmax;
  return last;
}

template <typename S>
Tensor<S> SnaptureModel<S>::static_forward(const Tensor<S> &snapshots,
                                           std::span<const std::uint8_t> gates, Mode mode) {
  if (!static_cnn_) throw ConfigError("cnnlstm has no static channel");
  nn::require_rank(snapshots, 4, "static input");
  if (static_cast<Index>(gates.size()) != snapshots.dim(0))
    throw ShapeError("static input: one gate per snapshot required");
  auto feats = static_cnn_->forward(snapshots, mode);
  for (Index i = 0; i < feats.dim(0); ++i)
    if (!gates[i]) feats.matrix().row(i).setZero();
  gates_.assign(gates.begin(), gates.end());
  return feats;
}

template <typename S>
Tensor<S> SnaptureModel<S>::fuse_and_classify(const Tensor<S> &hidden, const Tensor<S> &features,
                                              Mode mode, std::uint64_t dropout_seed) {
  nn::require_rank(hidden, 2, "fusion hidden");
  Tensor<S> joint;
  if (static_cnn_) {
    nn::require_rank(features, 2, "fusion static features");
    if (features.dim(0) != hidden.dim(0)) throw ShapeError("fusion: batch sizes differ");
    const Index n = hidden.dim(0);
    joint = Tensor<S>(Shape{n, hidden.dim(1) + features.dim(1)});
    joint.matrix() << hidden.matrix(), features.matrix();
  } else {
    joint = hidden;
  }
  auto x = head_dropout_.forward(joint, mode, dropout_seed);
  return out_.forward(fuse_act_.forward(fuse_.forward(x)));
}

template <typename S>
Tensor<S> SnaptureModel<S>::forward_batch(const Batch<S> &batch, Mode mode,
                                          std::uint64_t dropout_seed) {
  const auto hidden = dynamic_forward(batch.frames, batch.lengths, mode);
  Tensor<S> feats;
  if (static_cnn_) feats = static_forward(batch.snapshots, batch.gates, mode);
  return fuse_and_classify(hidden, feats, mode, dropout_seed);
}

template <typename S>
Tensor<S> SnaptureModel<S>::forward(const Batch<S> &batch, Mode mode, std::uint64_t dropout_seed) {
  graph_ready_ = false;
  if (mode == Mode::train) return forward_batch(batch, mode, dropout_seed);

  const Index n = batch.size();
  const Index frame_size = batch.frames.size() / std::max<Index>(batch.frames.dim(0), 1);
  Tensor<S> logits(Shape{n, cfg_.classes});
  Index offset = 0;
  for (Index i = 0; i < n; ++i) {
    Batch<S> one;
    const Index t = batch.lengths[i];
    Shape fs = batch.frames.shape();
    fs[0] = t;
    one.frames = Tensor<S>(fs, batch.frames.values().segment(offset * frame_size, t * frame_size));
    one.lengths = {batch.lengths[i]};
    if (static_cnn_) {
      Shape ss = batch.snapshots.shape();
      const Index snap_size = batch.snapshots.size() / ss[0];
      ss[0] = 1;
      one.snapshots = Tensor<S>(ss, batch.snapshots.values().segment(i * snap_size, snap_size));
      one.gates = {batch.gates[i]};
    }
    logits.matrix().row(i) = forward_batch(one, mode, dropout_seed).matrix().row(0);
    offset += t;
  }
  return logits;
}

template <typename S>
double SnaptureModel<S>::forward_loss(const Batch<S> &batch, Mode mode, std::uint64_t dropout_seed) {
  const auto logits = forward_batch(batch, mode, dropout_seed);
  auto r = nn::softmax_xent(logits, std::span<const int>(batch.labels));
  probabilities_ = std::move(r.probabilities);
  labels_ = batch.labels;
  graph_ready_ = true;
  return r.loss;
}

template <typename S> void SnaptureModel<S>::backward() {
  if (!graph_ready_) throw GraphStateError("backward() needs a preceding forward_loss()");
  graph_ready_ = false;
  auto d = nn::softmax_xent_backward(probabilities_, std::span<const int>(labels_));
  d = head_dropout_.backward(fuse_.backward(fuse_act_.backward(out_.backward(d))));

  const Index n = static_cast<Index>(lengths_.size());
  const Index h = cfg_.hidden;
  Tensor<S> dh(Shape{n, h});
  dh.matrix() = d.matrix().leftCols(h);
  if (static_cnn_) {
    Tensor<S> ds(Shape{n, d.dim(1) - h});
    ds.matrix() = d.matrix().rightCols(d.dim(1) - h);
    for (Index i = 0; i < n; ++i)
      if (!gates_[i]) ds.matrix().row(i).setZero();
    static_cnn_->backward(ds);
  }

  const Index tmax = max_steps_;
  Tensor<S> dhs(Shape{tmax, n, h});
  for (Index i = 0; i < n; ++i)
    dhs.matrix(tmax * n, h).row((lengths_[i] - 1) * n + i) = dh.matrix().row(i);
  const auto dx = nn::lstm_backward<S>(std::span<nn::LstmLayer<S>>(lstm_), lstm_cache_, dhs);
  const Index f = dx.dim(2);
  Index total = std::accumulate(lengths_.begin(), lengths_.end(), Index{0});
  Tensor<S> dfeats(Shape{total, f});
  Index row = 0;
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < lengths_[i]; ++t, ++row)
      dfeats.matrix().row(row) = dx.matrix(tmax * n, f).row(t * n + i);
  dynamic_cnn_.backward(dfeats);
}

template <typename S> void SnaptureModel<S>::zero_grad() {
  for (auto *p : parameters()) p->zero_grad();
}

template <typename S>
void SnaptureModel<S>::recalibrate_batchnorm(std::size_t count,
                                             const std::function<Batch<S>(std::size_t)> &batch_at) {
  std::vector<nn::BatchNormLayer<S> *> bns = dynamic_cnn_.batchnorms();
  if (static_cnn_)
    for (auto *bn : static_cnn_->batchnorms()) bns.push_back(bn);
  std::vector<double> keep;
  for (auto *bn : bns) {
    keep.push_back(bn->momentum());
    bn->reset_running_stats();
  }
  // Momentum 1/(k+1) on batch k turns the running update into a running mean.
  for (std::size_t k = 0; k < count; ++k) {
    for (auto *bn : bns) bn->set_momentum(1.0 / static_cast<double>(k + 1));
    forward_batch(batch_at(k), Mode::train, 0);
  }
  for (std::size_t i = 0; i < bns.size(); ++i) bns[i]->set_momentum(keep[i]);
  graph_ready_ = false;
}

template <typename S> std::vector<Index> SnaptureModel<S>::pooling_pattern() const {
  auto p = dynamic_cnn_.pooling_pattern();
  if (static_cnn_) {
    const auto q = static_cnn_->pooling_pattern();
    p.insert(p.end(), q.begin(), q.end());
  }
  return p;
}

template <typename S> std::vector<nn::Parameter<S> *> SnaptureModel<S>::parameters() {
  auto ps = dynamic_cnn_.parameters();
  for (auto &l : lstm_) {
    ps.push_back(&l.w_ih);
    ps.push_back(&l.w_hh);
    ps.push_back(&l.bias);
  }
  if (static_cnn_) {
    const auto st = static_cnn_->parameters();
    ps.insert(ps.end(), st.begin(), st.end());
  }
  ps.insert(ps.end(), {&fuse_.weight, &fuse_.bias, &out_.weight, &out_.bias});
  return ps;
}

template <typename S> std::vector<nn::Buffer<S>> SnaptureModel<S>::buffers() {
  auto bs = dynamic_cnn_.buffers();
  if (static_cnn_) {
    const auto st = static_cnn_->buffers();
    bs.insert(bs.end(), st.begin(), st.end());
  }
  return bs;
}

template <typename S> Index SnaptureModel<S>::parameter_count() {
  Index n = 0;
  for (const auto *p : parameters()) n += p->value.size();
  return n;
}

template <typename S> nn::Checkpoint SnaptureModel<S>::to_checkpoint() {
  nn::Checkpoint ck;
  ck.config = {{"model", to_json(cfg_)}, {"seed", seed_}};
  auto add = [&](const std::string &name, const Tensor<S> &t) {
    nn::NamedTensor nt{name, t.shape(), {}};
    nt.data.resize(static_cast<std::size_t>(t.size()));
    for (Index i = 0; i < t.size(); ++i) nt.data[static_cast<std::size_t>(i)] = static_cast<float>(t[i]);
    ck.tensors.push_back(std::move(nt));
  };
  for (const auto *p : parameters()) add(p->name, p->value);
  for (const auto &b : buffers()) add(b.name, *b.value);
  return ck;
}

template <typename S> SnaptureModel<S> SnaptureModel<S>::from_checkpoint(const nn::Checkpoint &ck) {
  if (!ck.config.contains("model")) throw CheckpointError("checkpoint has no model config");
  SnaptureModel m(model_config_from_json(ck.config["model"]),
                  ck.config.value("seed", std::uint64_t{0}));
  auto load = [&](const std::string &name, Tensor<S> &dst) {
    const auto &nt = ck.at(name);
    if (nt.shape != dst.shape())
      throw CheckpointError("tensor " + name + " has shape " + nn::shape_string(nt.shape) +
                            ", model expects " + nn::shape_string(dst.shape()));
    for (Index i = 0; i < dst.size(); ++i) dst[i] = static_cast<S>(nt.data[static_cast<std::size_t>(i)]);
  };
  for (auto *p : m.parameters()) load(p->name, p->value);
  for (auto &b : m.buffers()) load(b.name, *b.value);
  if (ck.tensors.size() != m.parameters().size() + m.buffers().size())
    throw CheckpointError("checkpoint carries tensors the model does not know");
  return m;
}

template class CnnEncoder<float>;
template class CnnEncoder<double>;
template class SnaptureModel<float>;
template class SnaptureModel<double>;

} // namespace snapture
