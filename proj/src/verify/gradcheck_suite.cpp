#include "rainseg/verify/gradcheck_suite.hpp"

#include <functional>

#include "rainseg/core/rng.hpp"
#include "rainseg/losses/losses.hpp"
#include "rainseg/model/unet.hpp"
#include "rainseg/tensor/gradcheck.hpp"
#include "rainseg/tensor/ops.hpp"

namespace rainseg {

namespace {

constexpr double kTight = 1e-4;
constexpr double kLoose = 1e-3;

// Contracts an output with fixed random weights so every coordinate matters.
Tensor64 project(Tape64& tape, const Tensor64& y, std::uint64_t seed) {
  const auto w = Tensor64::uniform(y.shape(), seed, -1.0, 1.0);
  return sum(tape, mul(tape, y, w));
}

// Uniform values in [lo, hi] kept at least `gap` away from each other in rank
// order, so max pooling and relu stay clear of ties and kinks under the probe step.
Tensor64 spread(const Shape& shape, std::uint64_t seed, double gap) {
  const std::size_t n = shape_numel(shape);
  std::vector<double> v(n);
  CounterRng rng(seed, 7);
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.next_below(i)]);
  for (std::size_t i = 0; i < n; ++i) {
    const double centered = static_cast<double>(perm[i]) - static_cast<double>(n) / 2.0 + 0.5;
    v[i] = centered * gap;
  }
  return Tensor64(shape, std::move(v));
}

std::vector<std::uint8_t> random_labels(std::size_t n, std::size_t k, std::uint64_t seed) {
  CounterRng rng(seed, 11);
  std::vector<std::uint8_t> out(n);
  for (auto& v : out) v = static_cast<std::uint8_t>(rng.next_below(k));
  // A few invalid cells exercise masking.
  for (std::size_t i = 0; i < n; i += 7) out[i] = kInvalidLabel;
  return out;
}

}  // namespace

std::vector<GradCheckItem> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<GradCheckItem> items;
  auto s = [&](std::uint64_t tag) { return derive_seed(seed, tag); };
  auto check = [&](std::string name, const GradFn& f, const std::vector<Tensor64>& inputs, double threshold,
                   GradCheckOptions options = {}) {
    const auto r = finite_diff_check(f, inputs, options);
    // At most a tenth of the probes may be skipped as kinks.
    const bool ok = r.max_rel_error < threshold && r.skipped * 10 <= r.coordinates + r.skipped;
    items.push_back({std::move(name), r.max_rel_error, threshold, r.coordinates, r.skipped, ok});
  };

  const Shape x4{2, 3, 4, 4};
  const auto a = Tensor64::randn(x4, s(1), 1.0);
  const auto b = Tensor64::randn(x4, s(2), 1.0);

  check("add", [&](Tape64& t, std::span<const Tensor64> in) { return project(t, add(t, in[0], in[1]), s(100)); },
        {a, b}, kTight);
  check("add_bias",
        [&](Tape64& t, std::span<const Tensor64> in) { return project(t, add(t, in[0], in[1]), s(101)); },
        {a, Tensor64::randn({3}, s(3), 1.0)}, kTight);
  check("mul", [&](Tape64& t, std::span<const Tensor64> in) { return project(t, mul(t, in[0], in[1]), s(102)); },
        {a, b}, kTight);
  check("mul_scalar",
        [&](Tape64& t, std::span<const Tensor64> in) { return project(t, mul_scalar(t, in[0], -1.7), s(103)); },
        {a}, kTight);
  check("concat_channels",
        [&](Tape64& t, std::span<const Tensor64> in) {
          return project(t, concat_channels(t, in[0], in[1]), s(104));
        },
        {a, Tensor64::randn({2, 2, 4, 4}, s(4), 1.0)}, kTight);
  check("conv2d",
        [&](Tape64& t, std::span<const Tensor64> in) { return project(t, conv2d(t, in[0], in[1], in[2]), s(105)); },
        {Tensor64::randn({2, 3, 6, 6}, s(5), 1.0), Tensor64::randn({4, 3, 3, 3}, s(6), 0.5),
         Tensor64::randn({4}, s(7), 0.5)},
        kTight);
  check("conv2d_stride2_1x1",
        [&](Tape64& t, std::span<const Tensor64> in) {
          const auto y = conv2d(t, in[0], in[1], in[2], Conv2dOptions{2, std::size_t{1}});
          return project(t, add(t, y, conv2d(t, in[0], in[3], in[2], Conv2dOptions{2, std::size_t{0}})), s(106));
        },
        {Tensor64::randn({2, 3, 7, 7}, s(8), 1.0), Tensor64::randn({4, 3, 3, 3}, s(9), 0.5),
         Tensor64::randn({4}, s(10), 0.5), Tensor64::randn({4, 3, 1, 1}, s(11), 0.5)},
        kTight);
  check("relu", [&](Tape64& t, std::span<const Tensor64> in) { return project(t, relu(t, in[0]), s(107)); },
        {spread(x4, s(12), 0.05)}, kTight);
  check("sigmoid", [&](Tape64& t, std::span<const Tensor64> in) { return project(t, sigmoid(t, in[0]), s(108)); },
        {a}, kTight);
  check("softmax_channel",
        [&](Tape64& t, std::span<const Tensor64> in) { return project(t, softmax_channel(t, in[0]), s(109)); }, {a},
        kTight);
  check("maxpool2d", [&](Tape64& t, std::span<const Tensor64> in) { return project(t, maxpool2d(t, in[0]), s(110)); },
        {spread(x4, s(13), 0.05)}, kTight);
  check("upsample_nearest2",
        [&](Tape64& t, std::span<const Tensor64> in) { return project(t, upsample_nearest2(t, in[0]), s(111)); },
        {a}, kTight);
  check("channel_gate",
        [&](Tape64& t, std::span<const Tensor64> in) { return project(t, channel_gate(t, in[0], in[1]), s(112)); },
        {a, Tensor64::randn({2, 1, 4, 4}, s(14), 1.0)}, kTight);
  check("dropout",
        [&](Tape64& t, std::span<const Tensor64> in) {
          DropoutStream stream{s(15), 0};
          return project(t, dropout(t, in[0], 0.3, stream, Mode::train), s(113));
        },
        {a}, kTight);
  check("batchnorm2d",
        [&](Tape64& t, std::span<const Tensor64> in) {
          auto state = BatchNormState<double>::fresh(3);
          return project(t, batchnorm2d(t, in[0], in[1], in[2], state, Mode::train), s(114));
        },
        {a, Tensor64::uniform({3}, s(16), 0.5, 1.5), Tensor64::randn({3}, s(17), 0.5)}, kLoose);

  const std::size_t K = 5;
  const Shape logits_shape{2, K, 4, 4};
  const auto labels = random_labels(2 * 4 * 4, K, s(18));
  const LossTargets targets{labels, {}};
  const LossConfig loss_cfg;
  const auto logits = Tensor64::randn(logits_shape, s(19), 1.0);
  check("focal_loss",
        [&](Tape64& t, std::span<const Tensor64> in) {
          return focal_loss(t, softmax_channel(t, in[0]), targets, loss_cfg);
        },
        {logits}, kTight);
  check("dice_loss",
        [&](Tape64& t, std::span<const Tensor64> in) {
          return dice_loss(t, softmax_channel(t, in[0]), targets, loss_cfg);
        },
        {logits}, kTight);
  LossConfig weighted = loss_cfg;
  weighted.lambda_fl = 0.7f;
  weighted.lambda_dice = 1.3f;
  weighted.alpha = 0.5f;
  check("combined_loss",
        [&](Tape64& t, std::span<const Tensor64> in) {
          return combined_loss(t, softmax_channel(t, in[0]), targets, weighted).total;
        },
        {logits}, kTight);

  // Reduced network: [4,8,16,32] features on 16x16 patches, train mode with a
  // fixed dropout mask. Conv biases ahead of batchnorm have exactly zero
  // gradient, hence the raised denominator floor.
  ModelConfig cfg;
  cfg.in_channels = 3;
  cfg.num_classes = K;
  cfg.encoder_features = {4, 8, 16, 32};
  cfg.patch_size = 16;
  const auto base = init_params(cfg, s(20)).cast<double>();
  std::vector<Tensor64> inputs;
  for (std::size_t i = 0; i < base.size(); ++i) inputs.push_back(base.tensor(i));
  {
    // Perturb biases and batchnorm affine terms away from their initial values.
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      const auto noise = Tensor64::randn(inputs[i].shape(), s(200 + i), 0.1);
      auto d = inputs[i].mutable_data();
      for (std::size_t j = 0; j < d.size(); ++j) d[j] += noise.data()[j];
    }
  }
  const auto x = Tensor64::randn({2, 3, 16, 16}, s(21), 1.0);
  inputs.push_back(x);
  const auto net_labels = random_labels(2 * 16 * 16, K, s(22));
  const LossTargets net_targets{net_labels, {}};
  const std::size_t nparams = base.size();
  auto build = [&](std::span<const Tensor64> in) {
    BasicModelParams<double> p(cfg);
    for (std::size_t i = 0; i < nparams; ++i) p.add(base.name(i), in[i]);
    for (const auto& [layer, state] : base.batchnorms()) p.add_batchnorm(layer, state);
    return p;
  };

  check("attention_gate",
        [&](Tape64& t, std::span<const Tensor64> in) {
          auto p = build(in);
          ParamBinding<double> binding(t, p);
          const auto skip = in[nparams];
          const auto gate = Tensor64::randn({2, 8, 16, 16}, s(23), 1.0);
          return project(t, attention_gate(t, binding, conv2d(t, skip, binding["enc1.conv1.w"], binding["enc1.conv1.b"]),
                                           conv2d(t, gate, binding["dec1.up.w"], binding["dec1.up.b"]), 1)
                                .gated,
                         s(115));
        },
        inputs, kTight, GradCheckOptions{1e-4, std::size_t{6}, s(24), 0.0, 1e-3});

  check("attention_unet",
        [&](Tape64& t, std::span<const Tensor64> in) {
          auto p = build(in);
          DropoutStream stream{s(25), 0};
          auto out = forward(t, p, in[nparams], ForwardOptions{Mode::train, &stream});
          return combined_loss(t, out.probs, net_targets, loss_cfg).total;
        },
        inputs, kLoose, GradCheckOptions{1e-5, std::size_t{4}, s(26), 1e-6, 1e-3});
  return items;
}

}  // namespace rainseg
