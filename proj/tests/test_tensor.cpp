#include <doctest.h>

#include <cmath>
#include <numeric>

#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"
#include "rainseg/losses/losses.hpp"
#include "rainseg/tensor/gradcheck.hpp"
#include "rainseg/tensor/ops.hpp"

using namespace rainseg;

namespace {

Tensor64 weighted(Tape64& t, const Tensor64& y, std::uint64_t seed) {
  return sum(t, mul(t, y, Tensor64::uniform(y.shape(), seed, -1.0, 1.0)));
}

double mean_of(std::span<const float> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

TEST_SUITE("tensor") {

TEST_CASE("rng streams are reproducible and well spread") {
  CounterRng a(5, 2), b(5, 2), c(5, 3);
  CHECK(a.bits_at(10) == b.bits_at(10));
  CHECK(a.bits_at(10) != c.bits_at(10));
  // SplitMix64 finalizer of the golden-gamma increment, a published reference value.
  CHECK(CounterRng::finalize(0x9E3779B97F4A7C15ULL) == 0xE220A8397B1DCDAFULL);
  double lo = 1, hi = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    lo = std::min(lo, a.uniform_at(i));
    hi = std::max(hi, a.uniform_at(i));
  }
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
}

TEST_CASE("zeros and randn") {
  const auto z = Tensor::zeros({2, 3});
  CHECK(z.numel() == 6);
  for (const float v : z.data()) CHECK(v == 0.0f);
  CHECK(bit_identical(Tensor::randn({4}, 1, 1.0f), Tensor::randn({4}, 1, 1.0f)));
  CHECK_THROWS_AS(Tensor::zeros({2, 0}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros({1, 1, 1, 1, 1}), ShapeError);

  const auto r = Tensor::randn({10000}, 7, 1.0f);
  const double m = mean_of(r.data());
  double ss = 0;
  for (const float v : r.data()) ss += (v - m) * (v - m);
  CHECK(std::abs(m) < 0.05);
  CHECK(std::abs(std::sqrt(ss / 10000.0) - 1.0) < 0.05);
}

TEST_CASE("add, concat and shape errors") {
  Tape tape;
  const auto x = Tensor::randn({1, 3, 2, 2}, 1, 1.0f);
  CHECK(bit_identical(add(tape, x, Tensor::zeros(x.shape())), x));
  const auto cat = concat_channels(tape, x, Tensor::randn({1, 4, 2, 2}, 2, 1.0f));
  CHECK(cat.shape() == Shape{1, 7, 2, 2});
  CHECK(cat.data()[0] == x.data()[0]);
  try {
    add(tape, x, Tensor::zeros({1, 3, 2, 3}));
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[1,3,2,2]") != std::string::npos);
    CHECK(msg.find("[1,3,2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(concat_channels(tape, x, Tensor::zeros({1, 3, 4, 4})), ShapeError);
  const auto biased = add(tape, x, Tensor::full({1, 3, 1, 1}, 1.0f));
  CHECK(biased.data()[5] == doctest::Approx(x.data()[5] + 1.0f));
}

TEST_CASE("conv2d hand example and identity") {
  Tape tape;
  const auto y = conv2d(tape, Tensor::full({1, 1, 3, 3}, 1.0f), Tensor::full({1, 1, 3, 3}, 1.0f), Tensor::zeros({1}));
  CHECK(y.shape() == Shape{1, 1, 3, 3});
  CHECK(y.data()[4] == 9.0f);
  CHECK(y.data()[0] == 4.0f);
  CHECK(y.data()[8] == 4.0f);
  CHECK(y.data()[1] == 6.0f);

  const auto x = Tensor::randn({2, 1, 5, 5}, 3, 1.0f);
  CHECK(bit_identical(conv2d(tape, x, Tensor::full({1, 1, 1, 1}, 1.0f), Tensor::zeros({1})), x));
  CHECK_THROWS_AS(conv2d(tape, x, Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1})), ShapeError);
  CHECK_THROWS_AS(conv2d(tape, x, Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1})), ShapeError);
  CHECK_THROWS_AS(conv2d(tape, Tensor::zeros({1, 1, 6, 6}), Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1}),
                         Conv2dOptions{2, std::size_t{1}}),
                  ShapeError);
}

TEST_CASE("conv2d output extent closed form over random shapes") {
  CounterRng rng(99);
  Tape tape(false);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t k = 1 + 2 * rng.next_below(3);
    const std::size_t s = 1 + rng.next_below(2);
    const std::size_t p = rng.next_below((k + 1) / 2);
    const std::size_t out = 1 + rng.next_below(5);
    const std::size_t span = (out - 1) * s + k;
    if (span <= 2 * p) continue;
    const std::size_t h = span - 2 * p;
    const auto y = conv2d(tape, Tensor::randn({1, 2, h, h}, trial, 1.0f), Tensor::randn({3, 2, k, k}, trial + 1, 1.0f),
                          Tensor::zeros({3}), Conv2dOptions{s, p});
    CHECK(y.shape() == Shape{1, 3, out, out});
    CHECK(y.dim(2) == (h + 2 * p - k) / s + 1);
    ++checked;
  }
  CHECK(checked > 30);
}

TEST_CASE("activations") {
  Tape tape;
  CHECK(sigmoid(tape, Tensor::zeros({1})).data()[0] == 0.5f);
  const auto sm = softmax_channel(tape, Tensor::zeros({1, 5, 2, 2}));
  for (const float v : sm.data()) CHECK(v == doctest::Approx(0.2f).epsilon(1e-7));
  const auto r = softmax_channel(tape, Tensor::randn({3, 5, 4, 4}, 4, 3.0f));
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t i = 0; i < 16; ++i) {
      double s = 0;
      for (std::size_t k = 0; k < 5; ++k) s += r.data()[(n * 5 + k) * 16 + i];
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
  const auto big = sigmoid(tape, Tensor(Shape{2}, {-100.0f, 100.0f}));
  CHECK(big.data()[0] >= 0.0f);
  CHECK(big.data()[1] <= 1.0f);
  const auto rl = relu(tape, Tensor(Shape{3}, {-1.0f, 0.0f, 2.0f}));
  CHECK(rl.data()[0] == 0.0f);
  CHECK(rl.data()[2] == 2.0f);
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape tape;
  auto x = Tensor(Shape{2}, {0.0f, 1.0f}).set_requires_grad(true);
  x = tape.watch(x);
  tape.backward(sum(tape, relu(tape, x)));
  CHECK(tape.grad(x)->data()[0] == 0.0f);
  CHECK(tape.grad(x)->data()[1] == 1.0f);
}

TEST_CASE("maxpool and upsample") {
  Tape tape;
  CHECK(maxpool2d(tape, Tensor(Shape{1, 1, 2, 2}, {1, 2, 3, 4})).data()[0] == 4.0f);
  const auto x = Tensor::randn({2, 3, 4, 6}, 5, 1.0f);
  CHECK(bit_identical(maxpool2d(tape, upsample_nearest2(tape, x)), x));
  CHECK(upsample_nearest2(tape, x).shape() == Shape{2, 3, 8, 12});
  CHECK_THROWS_AS(maxpool2d(tape, Tensor::zeros({1, 1, 3, 4})), ShapeError);

  // Ties route the gradient to the first maximum.
  auto t = Tensor(Shape{1, 1, 2, 2}, {1, 1, 1, 1}).set_requires_grad(true);
  t = tape.watch(t);
  tape.backward(sum(tape, maxpool2d(tape, t)));
  const auto g = *tape.grad(t);
  CHECK(g.data()[0] == 1.0f);
  CHECK(g.data()[1] == 0.0f);
  CHECK(g.data()[3] == 0.0f);
}

TEST_CASE("batchnorm statistics") {
  Tape tape;
  auto state = BatchNormState<float>::fresh(3);
  const auto x = Tensor::randn({4, 3, 5, 5}, 6, 2.0f);
  const auto y = batchnorm2d(tape, x, Tensor::full({3}, 1.0f), Tensor::zeros({3}), state, Mode::train);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, ss = 0;
    for (std::size_t n = 0; n < 4; ++n) {
      for (std::size_t i = 0; i < 25; ++i) s += y.data()[(n * 3 + c) * 25 + i];
    }
    const double m = s / 100.0;
    for (std::size_t n = 0; n < 4; ++n) {
      for (std::size_t i = 0; i < 25; ++i) ss += std::pow(y.data()[(n * 3 + c) * 25 + i] - m, 2);
    }
    CHECK(std::abs(m) < 1e-6);
    CHECK(std::abs(ss / 100.0 - 1.0) < 1e-4);
  }
  CHECK(state.running_mean[0] != 0.0f);

  auto fresh = BatchNormState<float>::fresh(3);
  const auto e = batchnorm2d(tape, x, Tensor::full({3}, 1.0f), Tensor::zeros({3}), fresh, Mode::eval);
  for (std::size_t i = 0; i < x.numel(); ++i) {
    CHECK(e.data()[i] == doctest::Approx(x.data()[i] / std::sqrt(1.0 + 1e-5)).epsilon(1e-6));
  }
  CHECK_THROWS_AS(batchnorm2d(tape, Tensor::zeros({1, 3, 1, 1}), Tensor::full({3}, 1.0f), Tensor::zeros({3}), state,
                              Mode::train),
                  ShapeError);
}

TEST_CASE("dropout") {
  Tape tape;
  const auto x = Tensor::randn({100000}, 8, 1.0f);
  DropoutStream s{11, 0};
  CHECK(bit_identical(dropout(tape, x, 0.3, s, Mode::eval), x));
  CHECK(bit_identical(dropout(tape, x, 0.0, s, Mode::train), x));
  const auto y = dropout(tape, x, 0.3, s, Mode::train);
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (y.data()[i] == 0.0f) {
      ++zeros;
    } else {
      CHECK(y.data()[i] == doctest::Approx(x.data()[i] / 0.7f).epsilon(1e-6));
    }
  }
  CHECK(std::abs(static_cast<double>(zeros) / 1e5 - 0.3) < 0.01);
  CHECK(s.counter == 1);
  DropoutStream again{11, 0};
  CHECK(bit_identical(dropout(tape, x, 0.3, again, Mode::train), y));
  CHECK_THROWS_AS(dropout(tape, x, 1.0, s, Mode::train), ConfigError);
}

TEST_CASE("non-finite forward results raise") {
  Tape tape;
  const auto bad = Tensor(Shape{2}, {1.0f, std::numeric_limits<float>::infinity()});
  CHECK_THROWS_AS(add(tape, bad, Tensor::zeros({2})), NumericError);
}

TEST_CASE("backward basics") {
  Tape tape;
  auto x = Tensor::randn({2, 3}, 9, 1.0f).set_requires_grad(true);
  x = tape.watch(x);
  const auto loss = sum(tape, x);
  tape.backward(loss);
  const auto gx = tape.grad(x);
  REQUIRE(gx.has_value());
  for (const float g : gx->data()) CHECK(g == 1.0f);
  CHECK_THROWS(tape.backward(loss));

  Tape t2;
  auto y = Tensor::randn({5}, 10, 1.0f).set_requires_grad(true);
  y = t2.watch(y);
  auto c = Tensor::randn({5}, 11, 1.0f);
  t2.backward(mul_scalar(t2, sum(t2, mul(t2, y, y)), 0.5f));
  for (std::size_t i = 0; i < 5; ++i) CHECK(t2.grad(y)->data()[i] == doctest::Approx(y.data()[i]));
  CHECK_FALSE(t2.grad(c).has_value());

  Tape t3;
  auto z = t3.watch(Tensor::randn({2, 2}, 12, 1.0f).set_requires_grad(true));
  CHECK_THROWS_AS(t3.backward(mul_scalar(t3, z, 2.0f)), ShapeError);
}

TEST_CASE("fan-out gradients add up") {
  const auto x0 = Tensor64::randn({3, 4}, 13, 1.0);
  auto branch = [&](bool first, bool second) {
    Tape64 t;
    auto x = t.watch(Tensor64(x0).set_requires_grad(true));
    Tensor64 total = sum(t, mul_scalar(t, x, 0.0));
    if (first) total = add(t, total, sum(t, sigmoid(t, x)));
    if (second) total = add(t, total, sum(t, mul(t, x, x)));
    t.backward(total);
    return *t.grad(x);
  };
  const auto both = branch(true, true), a = branch(true, false), b = branch(false, true);
  for (std::size_t i = 0; i < x0.numel(); ++i) {
    CHECK(both.data()[i] == doctest::Approx(a.data()[i] + b.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("forward determinism") {
  auto run = [] {
    Tape tape(false);
    const auto x = Tensor::randn({2, 3, 8, 8}, 14, 1.0f);
    auto h = conv2d(tape, x, Tensor::randn({4, 3, 3, 3}, 15, 0.3f), Tensor::zeros({4}));
    return softmax_channel(tape, maxpool2d(tape, relu(tape, h)));
  };
  CHECK(bit_identical(run(), run()));
}

TEST_CASE("finite difference oracle") {
  const auto x = Tensor64::randn({3, 4}, 16, 1.0);
  CHECK(finite_diff_check([](Tape64& t, const Tensor64& v) { return sum(t, v); }, x).max_rel_error < 1e-9);
  CHECK(finite_diff_check([](Tape64& t, const Tensor64& v) { return sum(t, sigmoid(t, v)); }, x).max_rel_error <
        1e-5);
  const std::vector<std::uint8_t> labels{0, 1, 2, 3, 4, 0, 1, 2};
  const auto logits = Tensor64::randn({2, 5, 2, 2}, 17, 1.0);
  const auto err = finite_diff_check(
      [&](Tape64& t, const Tensor64& v) {
        return focal_loss(t, softmax_channel(t, v), LossTargets{labels, {}}, LossConfig{});
      },
      logits);
  CHECK(err.max_rel_error < 1e-4);
  CHECK(relative_error(1.0, 1.0) == 0.0);
  CHECK(relative_error(0.0, 0.0) == 0.0);
}

TEST_CASE("op gradients against finite differences") {
  using Fn = std::function<Tensor64(Tape64&, std::span<const Tensor64>)>;
  struct Case {
    const char* name;
    Fn f;
    std::vector<Tensor64> inputs;
    double tol;
  };
  const auto a = Tensor64::randn({2, 3, 4, 4}, 20, 1.0);
  const auto b = Tensor64::randn({2, 3, 4, 4}, 21, 1.0);
  std::vector<Case> cases{
      {"concat",
       [](Tape64& t, std::span<const Tensor64> in) { return weighted(t, concat_channels(t, in[0], in[1]), 1); },
       {a, Tensor64::randn({2, 4, 4, 4}, 22, 1.0)}, 1e-4},
      {"conv2d",
       [](Tape64& t, std::span<const Tensor64> in) { return weighted(t, conv2d(t, in[0], in[1], in[2]), 2); },
       {Tensor64::randn({2, 3, 8, 8}, 23, 1.0), Tensor64::randn({4, 3, 3, 3}, 24, 0.4), Tensor64::randn({4}, 25, 1.0)},
       1e-4},
      {"softmax", [](Tape64& t, std::span<const Tensor64> in) { return weighted(t, softmax_channel(t, in[0]), 3); },
       {Tensor64::randn({2, 5, 4, 4}, 26, 1.0)}, 1e-4},
      {"upsample",
       [](Tape64& t, std::span<const Tensor64> in) { return weighted(t, upsample_nearest2(t, in[0]), 4); }, {a},
       1e-4},
      {"gate", [](Tape64& t, std::span<const Tensor64> in) { return weighted(t, channel_gate(t, in[0], in[1]), 5); },
       {a, Tensor64::randn({2, 1, 4, 4}, 27, 1.0)}, 1e-4},
      {"batchnorm",
       [](Tape64& t, std::span<const Tensor64> in) {
         auto s = BatchNormState<double>::fresh(3);
         return weighted(t, batchnorm2d(t, in[0], in[1], in[2], s, Mode::train), 6);
       },
       {Tensor64::randn({4, 3, 5, 5}, 28, 1.0), Tensor64::uniform({3}, 29, 0.5, 1.5), Tensor64::randn({3}, 30, 1.0)},
       1e-3},
      {"mul", [](Tape64& t, std::span<const Tensor64> in) { return weighted(t, mul(t, in[0], in[1]), 7); }, {a, b},
       1e-4},
  };
  for (const auto& c : cases) {
    CAPTURE(c.name);
    CHECK(finite_diff_check(c.f, c.inputs).max_rel_error < c.tol);
  }

  // Maxpool away from ties: distinct values spaced well beyond the probe step.
  std::vector<double> vals(32);
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>((i * 13) % 32) * 0.1;
  const Tensor64 distinct({1, 2, 4, 4}, vals);
  CHECK(finite_diff_check([](Tape64& t, const Tensor64& v) { return weighted(t, maxpool2d(t, v), 8); }, distinct)
            .max_rel_error < 1e-4);
}

TEST_CASE("kink detection skips probes straddling a relu corner") {
  const GradFn f = [](Tape64& t, std::span<const Tensor64> in) { return sum(t, relu(t, in[0])); };
  const std::vector<Tensor64> x{Tensor64({3}, {1e-4, 0.5, -0.7})};
  GradCheckOptions options;
  options.step = 1e-3;
  const auto naive = finite_diff_check(f, x, options);
  CHECK(naive.max_rel_error > 0.1);
  CHECK(naive.skipped == 0);
  options.kink_tolerance = 1e-3;
  const auto guarded = finite_diff_check(f, x, options);
  CHECK(guarded.skipped == 1);
  CHECK(guarded.coordinates == 2);
  CHECK(guarded.max_rel_error < 1e-9);
}

}  // TEST_SUITE
