#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rainseg/core/error.hpp"
#include "rainseg/losses/losses.hpp"
#include "rainseg/model/checkpoint.hpp"
#include "rainseg/model/unet.hpp"

using namespace rainseg;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.in_channels = 3;
  c.encoder_features = {4, 8, 16, 32};
  c.patch_size = 8;
  return c;
}

// Independent closed form of the layer inventory's scalar count.
std::size_t closed_form_count(const ModelConfig& c) {
  const auto& f = c.encoder_features;
  std::size_t total = 0, cin = c.in_channels;
  for (const auto w : f) {
    total += w * cin * 9 + w + 2 * w + w * w * 9 + w + 2 * w;
    cin = w;
  }
  for (std::size_t l = f.size() - 1; l >= 1; --l) {
    const std::size_t w = f[l - 1], in = w / 2, up = f[l];
    total += w * up * 9 + w + 2 * w;                  // up-conv and its batchnorm
    total += 2 * (in * w + in) + in + 1;              // gate projections and psi
    total += w * 2 * w * 9 + w + 2 * w + w * w * 9 + w + 2 * w;
  }
  return total + c.num_classes * f[0] + c.num_classes;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.encoder_features = {64, 64, 128};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.patch_size = 36;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.dropout_p = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("parameter inventory and count") {
  const ModelConfig c;
  const auto p = init_params(c, 1);
  CHECK(p.parameter_count() == closed_form_count(c));
  CHECK(p.parameter_count() == 8661352);
  CHECK(closed_form_count(small_config()) == init_params(small_config(), 1).parameter_count());
  const auto inv = layer_inventory(c);
  CHECK(inv.front().name == "enc1.conv1.w");
  CHECK(inv.front().shape == Shape{64, 21, 3, 3});
  CHECK(inv.back().name == "head.b");
  CHECK(p.batchnorms().size() == batchnorm_inventory(c).size());
}

TEST_CASE("init is deterministic and follows the scheme") {
  const auto c = small_config();
  const auto a = init_params(c, 3), b = init_params(c, 3), d = init_params(c, 4);
  CHECK(params_identical(a, b));
  CHECK_FALSE(params_identical(a, d));
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& n = a.name(i);
    const auto& t = a.tensor(i);
    CHECK(t.requires_grad());
    if (n.ends_with(".b") || n.ends_with(".beta")) {
      for (const float v : t.data()) CHECK(v == 0.0f);
    } else if (n.ends_with(".gamma")) {
      for (const float v : t.data()) CHECK(v == 1.0f);
    }
  }
  // He-normal spread on the widest default layer.
  const auto full = init_params(ModelConfig{}, 5);
  const auto& w = full.at("enc4.conv2.w");
  double ss = 0;
  for (const float v : w.data()) ss += static_cast<double>(v) * v;
  const double expected = std::sqrt(2.0 / (512.0 * 9.0));
  CHECK(std::abs(std::sqrt(ss / static_cast<double>(w.numel())) / expected - 1.0) < 0.02);
}

TEST_CASE("encoder block shapes at full scale") {
  auto params = init_params(ModelConfig{}, 2);
  Tape tape(false);
  ParamBinding<float> p(tape, params);
  const auto x = Tensor::randn({2, 21, 32, 32}, 3, 1.0f);
  const auto e1 = encoder_block(tape, p, params, x, 1, Mode::eval);
  CHECK(e1.features.shape() == Shape{2, 64, 32, 32});
  CHECK(e1.pooled.shape() == Shape{2, 64, 16, 16});
  for (const float v : e1.features.data()) CHECK(v >= 0.0f);
  const auto e4 = encoder_block(tape, p, params, Tensor::randn({2, 256, 8, 8}, 4, 1.0f), 4, Mode::eval);
  CHECK(e4.features.shape() == Shape{2, 512, 8, 8});
}

TEST_CASE("forward shape contract and normalization") {
  auto params = init_params(ModelConfig{}, 6);
  Tape tape(false);
  const auto out = forward(tape, params, Tensor::randn({16, 21, 32, 32}, 7, 1.0f));
  CHECK(out.probs.shape() == Shape{16, 5, 32, 32});
  const std::size_t plane = 32 * 32;
  for (std::size_t n = 0; n < 16; n += 5) {
    for (std::size_t i = 0; i < plane; i += 17) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += out.probs.data()[(n * 5 + k) * plane + i];
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
  CHECK(out.attention.size() == 3);
  for (const auto& a : out.attention) {
    for (const float v : a.data()) {
      CHECK(v > 0.0f);
      CHECK(v < 1.0f);
    }
  }
}

TEST_CASE("forward on other batch sizes and patch sizes") {
  auto params = init_params(small_config(), 8);
  for (const std::size_t n : {1, 3}) {
    for (const std::size_t z : {8, 16, 24}) {
      Tape tape(false);
      const auto out = forward(tape, params, Tensor::randn({n, 3, z, z}, n * z, 1.0f));
      CHECK(out.probs.shape() == Shape{n, 5, z, z});
    }
  }
  Tape tape(false);
  CHECK_THROWS_AS(forward(tape, params, Tensor::randn({1, 4, 8, 8}, 1, 1.0f)), ShapeError);
  CHECK_THROWS_AS(forward(tape, params, Tensor::randn({1, 3, 12, 12}, 1, 1.0f)), ShapeError);
}

TEST_CASE("eval forward is deterministic") {
  auto params = init_params(small_config(), 9);
  const auto x = Tensor::randn({2, 3, 16, 16}, 10, 1.0f);
  Tape t1(false), t2(false);
  CHECK(bit_identical(forward(t1, params, x).probs, forward(t2, params, x).probs));
}

TEST_CASE("attention gate saturation") {
  auto params = init_params(small_config(), 11);
  const auto skip = Tensor::randn({2, 4, 8, 8}, 12, 1.0f);
  const auto gate = Tensor::randn({2, 4, 8, 8}, 13, 1.0f);
  for (const float bias : {20.0f, -20.0f}) {
    params.at("att1.psi.b") = Tensor::full({1}, bias);
    params.at("att1.psi.w") = Tensor::zeros({1, 2, 1, 1});
    Tape tape(false);
    ParamBinding<float> p(tape, params);
    const auto out = attention_gate(tape, p, skip, gate, 1);
    for (std::size_t i = 0; i < skip.numel(); ++i) {
      const float expect = bias > 0 ? skip.data()[i] : 0.0f;
      CHECK(std::abs(out.gated.data()[i] - expect) < 1e-6 * std::max(1.0f, std::abs(skip.data()[i])) + 1e-6);
    }
  }
  // A coarser gate is projected and then upsampled.
  Tape tape(false);
  auto fresh = init_params(small_config(), 14);
  ParamBinding<float> p(tape, fresh);
  const auto out = attention_gate(tape, p, skip, Tensor::randn({2, 4, 4, 4}, 15, 1.0f), 1);
  CHECK(out.alpha.shape() == Shape{2, 1, 8, 8});
  CHECK_THROWS_AS(attention_gate(tape, p, skip, Tensor::randn({2, 4, 3, 3}, 16, 1.0f), 1), ShapeError);
}

TEST_CASE("predict_classes tie rule and invariance") {
  const auto uniform = Tensor::full({1, 5, 2, 2}, 0.2f);
  for (const auto c : predict_classes(uniform)) CHECK(c == 0);
  std::vector<float> onehot(5 * 4, 0.0f);
  for (std::size_t i = 0; i < 4; ++i) onehot[((i + 1) % 5) * 4 + i] = 1.0f;
  const auto pc = predict_classes(Tensor({1, 5, 2, 2}, onehot));
  for (std::size_t i = 0; i < 4; ++i) CHECK(pc[i] == (i + 1) % 5);

  Tape tape(false);
  const auto logits = Tensor::randn({2, 5, 4, 4}, 17, 1.0f);
  CHECK(predict_classes(softmax_channel(tape, logits)) ==
        predict_classes(softmax_channel(tape, mul_scalar(tape, logits, 2.0f))));
}

TEST_CASE("every parameter receives gradient") {
  auto params = init_params(small_config(), 18);
  Tape tape;
  DropoutStream ds{19, 0};
  const auto out = forward(tape, params, Tensor::randn({2, 3, 8, 8}, 20, 1.0f), ForwardOptions{Mode::train, &ds});
  std::vector<std::uint8_t> labels(2 * 64);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i % 5);
  const auto loss = combined_loss(tape, out.probs, LossTargets{labels, {}}, LossConfig{});
  tape.backward(loss.total);
  const auto grads = out.params.gradients(tape);
  REQUIRE(grads.size() == params.size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& n = params.name(i);
    // Conv biases feeding batchnorm are cancelled by the normalization.
    const bool cancelled = n.ends_with(".b") && !n.starts_with("att") && !n.starts_with("head");
    if (cancelled) continue;
    bool nonzero = false;
    for (const float g : grads[i].data()) nonzero = nonzero || g != 0.0f;
    CAPTURE(n);
    CHECK(nonzero);
  }
}

TEST_CASE("train forward needs a dropout stream") {
  auto params = init_params(small_config(), 21);
  Tape tape;
  CHECK_THROWS_AS(forward(tape, params, Tensor::randn({2, 3, 8, 8}, 22, 1.0f), ForwardOptions{Mode::train, nullptr}),
                  ConfigError);
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir("ckpt");
  Checkpoint ck;
  ck.params = init_params(small_config(), 23);
  ck.params.batchnorm("enc1.bn1").running_mean[0] = 0.125f;
  ck.extras.emplace_back("norm_mean", Tensor::randn({3}, 24, 1.0f));
  save_checkpoint(ck, dir / "m.munw");
  const auto back = load_checkpoint(dir / "m.munw");
  CHECK(params_identical(ck.params, back.params));
  REQUIRE(back.extra("norm_mean") != nullptr);
  CHECK(bit_identical(*back.extra("norm_mean"), ck.extras[0].second));
  CHECK(back.params.config().dropout_p == doctest::Approx(0.3));
  CHECK(encode_checkpoint(back) == encode_checkpoint(ck));

  const auto x = Tensor::randn({2, 3, 8, 8}, 25, 1.0f);
  auto p1 = ck.params;
  auto p2 = back.params;
  Tape t1(false), t2(false);
  CHECK(bit_identical(forward(t1, p1, x).probs, forward(t2, p2, x).probs));
}

TEST_CASE("checkpoint decoding errors") {
  Checkpoint ck;
  ck.params = init_params(small_config(), 26);
  auto bytes = encode_checkpoint(ck);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), FormatError);
  auto version = bytes;
  version[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(version), FormatError);
}

}  // TEST_SUITE
