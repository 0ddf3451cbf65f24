#include <benchmark/benchmark.h>

#include <vector>

#include "rainseg/core/rng.hpp"
#include "rainseg/kernels/conv.hpp"
#include "rainseg/kernels/gemm.hpp"
#include "rainseg/kernels/parallel.hpp"
#include "rainseg/losses/losses.hpp"
#include "rainseg/model/params.hpp"
#include "rainseg/model/unet.hpp"
#include "rainseg/tensor/tape.hpp"

namespace {

using namespace rainseg;

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.next_normal());
  return v;
}

void set_label(benchmark::State& state, bool parallel) {
  state.SetLabel(parallel ? "parallel" : "reference");
}

// Args: {n, parallel}
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const bool parallel = state.range(1) != 0;
  const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if (parallel) {
      kernels::gemm(false, false, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    } else {
      kernels::reference::gemm(false, false, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
  set_label(state, parallel);
}
BENCHMARK(BM_Gemm)->ArgsProduct({{64, 256, 512}, {0, 1}})->Unit(benchmark::kMillisecond);

kernels::ConvGeometry conv_geometry(std::size_t channels, std::size_t size) {
  return kernels::ConvGeometry::make(8, channels, size, size, channels, 3, 3, 1, 1);
}

// Args: {channels, spatial size, parallel}
void BM_ConvForward(benchmark::State& state) {
  const auto g = conv_geometry(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const bool parallel = state.range(2) != 0;
  const auto x = random_vector(g.batch * g.in_channels * g.height * g.width, 3);
  const auto w = random_vector(g.out_channels * g.patch_len(), 4);
  const auto bias = random_vector(g.out_channels, 5);
  std::vector<float> y(g.batch * g.out_channels * g.out_pixels());
  for (auto _ : state) {
    if (parallel) {
      kernels::conv2d_forward(g, x.data(), w.data(), bias.data(), y.data());
    } else {
      kernels::reference::conv2d_forward(g, x.data(), w.data(), bias.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  set_label(state, parallel);
}
BENCHMARK(BM_ConvForward)->ArgsProduct({{16, 64}, {32}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_ConvBackward(benchmark::State& state) {
  const auto g = conv_geometry(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const bool parallel = state.range(2) != 0;
  const auto x = random_vector(g.batch * g.in_channels * g.height * g.width, 3);
  const auto w = random_vector(g.out_channels * g.patch_len(), 4);
  const auto dy = random_vector(g.batch * g.out_channels * g.out_pixels(), 6);
  std::vector<float> dx(x.size()), dw(w.size()), db(g.out_channels);
  for (auto _ : state) {
    if (parallel) {
      kernels::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    } else {
      kernels::reference::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    }
    benchmark::DoNotOptimize(dw.data());
  }
  set_label(state, parallel);
}
BENCHMARK(BM_ConvBackward)->ArgsProduct({{16, 64}, {32}, {0, 1}})->Unit(benchmark::kMillisecond);

// One forward and backward pass of a reduced network through the tensor ops,
// which dispatch on the active backend. Args: {parallel}
void BM_TrainStep(benchmark::State& state) {
  const bool parallel = state.range(0) != 0;
  kernels::ScopedBackend scoped(parallel ? kernels::Backend::parallel : kernels::Backend::reference);
  ModelConfig cfg;
  cfg.in_channels = 21;
  cfg.num_classes = 5;
  cfg.encoder_features = {16, 32, 64, 128};
  cfg.patch_size = 32;
  auto params = init_params(cfg, 7);
  const auto x = Tensor::randn({4, 21, 32, 32}, 8, 1.0f);
  std::vector<std::uint8_t> labels(4 * 32 * 32);
  CounterRng rng(9);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng.next_below(5));
  for (auto _ : state) {
    Tape tape;
    DropoutStream stream{10, 0};
    auto out = forward(tape, params, x, ForwardOptions{Mode::train, &stream});
    auto loss = combined_loss(tape, out.probs, LossTargets{labels, {}}, LossConfig{});
    tape.backward(loss.total);
    benchmark::DoNotOptimize(loss.total.item());
  }
  set_label(state, parallel);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
