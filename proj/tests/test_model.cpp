#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace snapture;
using nn::Index;
using nn::Mode;

TEST_CASE("gradient check, every parameter group") {
  SnaptureModel<double> m(oracle::gradcheck_config(), 3);
  const auto batch = oracle::tiny_batch(m.config(), 11);
  for (const auto &g : oracle::gradcheck(m, batch)) {
    INFO(g.name << " rel " << g.rel_error << " max " << g.max_abs_diff);
    CHECK(g.rel_error < 1e-3);
  }
}

namespace {

Batch<double> single(const Batch<double> &b, int i) {
  const auto h = b.frames.dim(2), w = b.frames.dim(3);
  int offset = 0;
  for (int k = 0; k < i; ++k) offset += b.lengths[k];
  Batch<double> s;
  s.lengths = {b.lengths[i]};
  s.gates = {b.gates[i]};
  s.labels = {b.labels[i]};
  s.frames = nn::Tensor<double>({b.lengths[i], 1, h, w});
  s.frames.values() = b.frames.values().segment(offset * h * w, b.lengths[i] * h * w);
  s.snapshots = nn::Tensor<double>({1, 1, h, w});
  s.snapshots.values() = b.snapshots.values().segment(i * h * w, h * w);
  return s;
}

} // namespace

TEST_CASE("parameter count matches the layer shapes") {
  for (auto v : {Variant::cnnlstm, Variant::snapture, Variant::snapture_thold}) {
    ModelConfig c;
    c.variant = v;
    c.gate_threshold = 0.1;
    c.classes = 4;
    SnaptureModel<float> m(c, 0);
    CHECK(m.parameter_count() == oracle::parameter_count(c));
    long total = 0;
    for (auto *p : m.parameters()) total += p->value.size();
    CHECK(total == oracle::parameter_count(c));
  }
  ModelConfig plain;
  plain.variant = Variant::cnnlstm;
  ModelConfig fused;
  CHECK(SnaptureModel<float>(fused, 0).parameter_count() > SnaptureModel<float>(plain, 0).parameter_count());
}

TEST_CASE("model construction is deterministic in the seed") {
  SnaptureModel<double> a(oracle::gradcheck_config(), 5), b(oracle::gradcheck_config(), 5),
      c(oracle::gradcheck_config(), 6);
  const auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->value == pb[i]->value);
    any_diff |= !(pa[i]->value == pc[i]->value);
  }
  CHECK(any_diff);
  const auto batch = oracle::tiny_batch(a.config(), 1);
  CHECK(a.forward(batch, Mode::train, 3) == b.forward(batch, Mode::train, 3));
}

TEST_CASE("a closed gate zeroes the static features") {
  SnaptureModel<double> m(oracle::gradcheck_config(), 2);
  const auto batch = oracle::tiny_batch(m.config(), 2);
  const auto f = m.static_forward(batch.snapshots, batch.gates, Mode::eval);
  REQUIRE(f.shape() == nn::Shape{3, 12});
  for (int k = 0; k < 12; ++k) CHECK(f(1, k) == 0.0);
  double row0 = 0;
  for (int k = 0; k < 12; ++k) row0 += std::abs(f(0, k));
  CHECK(row0 > 0.0);

  // With the gate closed the snapshot content is irrelevant.
  auto other = batch;
  for (int i = 0; i < 12 * 16; ++i) other.snapshots[12 * 16 + i] = 0.5;
  const auto l1 = m.forward(batch, Mode::eval), l2 = m.forward(other, Mode::eval);
  for (int k = 0; k < 3; ++k) CHECK(l1(1, k) == l2(1, k));
}

TEST_CASE("eval outputs do not depend on batch company") {
  SnaptureModel<double> m(oracle::gradcheck_config(), 4);
  const auto batch = oracle::tiny_batch(m.config(), 4);
  const auto all = m.forward(batch, Mode::eval);
  for (int i = 0; i < 3; ++i) {
    const auto one = m.forward(single(batch, i), Mode::eval);
    for (int k = 0; k < 3; ++k) CHECK(one(0, k) == doctest::Approx(all(i, k)).epsilon(1e-13));
  }
}

TEST_CASE("zero output layer gives the uniform loss") {
  auto cfg = oracle::gradcheck_config();
  cfg.classes = 9;
  SnaptureModel<double> m(cfg, 1);
  auto params = m.parameters();
  params[params.size() - 1]->value.set_zero();
  params[params.size() - 2]->value.set_zero();
  auto batch = oracle::tiny_batch(cfg, 1);
  batch.labels = {8, 0, 4};
  CHECK(m.forward_loss(batch, Mode::train, 1) == doctest::Approx(std::log(9.0)).epsilon(1e-12));
  for (Index i = 0; i < m.last_probabilities().size(); ++i)
    CHECK(m.last_probabilities()[i] == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("backward requires a forward pass") {
  SnaptureModel<double> m(oracle::gradcheck_config(), 1);
  CHECK_THROWS_AS(m.backward(), GraphStateError);
  m.forward_loss(oracle::tiny_batch(m.config(), 1), Mode::train, 1);
  m.backward();
  CHECK_THROWS_AS(m.backward(), GraphStateError);
}

TEST_CASE("model config validation") {
  ModelConfig c;
  c.variant = Variant::snapture_thold;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.gate_threshold = 0.2;
  CHECK_NOTHROW(c.validate());
  c.input_width = 30;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.input_width = 64;
  c.classes = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_variant("snapture-thold") == Variant::snapture_thold);
  CHECK_THROWS_AS(parse_variant("resnet"), ConfigError);
  c.classes = 5;
  const auto j = to_json(c);
  CHECK(to_json(model_config_from_json(j)) == j);
}

TEST_CASE("checkpoint round trip reproduces predictions exactly") {
  auto cfg = oracle::gradcheck_config();
  SnaptureModel<float> m(cfg, 8);
  const auto bd = oracle::tiny_batch(cfg, 8);
  Batch<float> b{bd.frames.cast<float>(), bd.lengths, bd.snapshots.cast<float>(), bd.gates, bd.labels};
  // Move the running statistics away from their initial values first.
  m.forward_loss(b, Mode::train, 2);
  const auto before = m.forward(b, Mode::eval);
  auto restored = SnaptureModel<float>::from_checkpoint(nn::decode_checkpoint(nn::encode_checkpoint(m.to_checkpoint())));
  CHECK(restored.forward(b, Mode::eval) == before);
  CHECK(to_json(restored.config()) == to_json(cfg));
  const auto pa = m.parameters(), pb = restored.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
  const auto ba = m.buffers(), bb = restored.buffers();
  REQUIRE(ba.size() == bb.size());
  for (std::size_t i = 0; i < ba.size(); ++i) CHECK(*ba[i].value == *bb[i].value);
}

TEST_CASE("variant relations") {
  auto cfg = oracle::gradcheck_config();
  const auto batch = oracle::tiny_batch(cfg, 12);

  // cnnlstm ignores the snapshot entirely.
  auto plain_cfg = cfg;
  plain_cfg.variant = Variant::cnnlstm;
  SnaptureModel<double> plain(plain_cfg, 3);
  auto noisy = batch;
  noisy.snapshots.values().setConstant(0.9);
  noisy.gates = {1, 1, 1};
  CHECK(plain.forward(batch, Mode::eval) == plain.forward(noisy, Mode::eval));

  // With every gate open the thresholded model is the plain snapture model.
  auto snap_cfg = cfg;
  snap_cfg.variant = Variant::snapture;
  SnaptureModel<double> snap(snap_cfg, 3), thold(cfg, 3);
  auto open = batch;
  open.gates = {1, 1, 1};
  CHECK(snap.forward(open, Mode::eval) == thold.forward(open, Mode::eval));

  // Gated samples with the same motion get the same prediction.
  Batch<double> twin = batch;
  twin.lengths = {2, 2};
  twin.gates = {0, 0};
  twin.labels = {0, 1};
  const Index plane = 12 * 16;
  twin.frames = nn::Tensor<double>({4, 1, 12, 16});
  twin.frames.values().head(2 * plane) = batch.frames.values().head(2 * plane);
  twin.frames.values().tail(2 * plane) = batch.frames.values().head(2 * plane);
  twin.snapshots = nn::Tensor<double>({2, 1, 12, 16});
  twin.snapshots.values().head(plane).setConstant(0.1);
  twin.snapshots.values().tail(plane).setConstant(0.8);
  const auto l = thold.forward(twin, Mode::eval);
  for (int k = 0; k < 3; ++k) CHECK(l(0, k) == l(1, k));
}
