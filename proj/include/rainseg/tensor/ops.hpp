#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "rainseg/tensor/tape.hpp"
#include "rainseg/tensor/tensor.hpp"

namespace rainseg {

enum class Mode { train, eval };

// Shapes broadcastable as a per-channel bias for an [N,C,H,W] tensor: [C] or [1,C,1,1].
bool is_channel_bias_shape(const Shape& bias, const Shape& x);

// a + b for identical shapes, or b broadcast as a per-channel bias.
template <typename T>
BasicTensor<T> add(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

// Elementwise product of identically shaped tensors.
template <typename T>
BasicTensor<T> mul(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> mul_scalar(BasicTape<T>& tape, const BasicTensor<T>& a, T s);

// [N,Ca,H,W] | [N,Cb,H,W] -> [N,Ca+Cb,H,W]
template <typename T>
BasicTensor<T> concat_channels(BasicTape<T>& tape, const BasicTensor<T>& a, const BasicTensor<T>& b);

struct Conv2dOptions {
  std::size_t stride = 1;
  // Zero padding per side; unset means "same", (k - 1) / 2.
  std::optional<std::size_t> padding;
};

// x[N,Cin,H,W] * w[Cout,Cin,kh,kw] + bias[Cout]
template <typename T>
BasicTensor<T> conv2d(BasicTape<T>& tape, const BasicTensor<T>& x, const BasicTensor<T>& w,
                      const BasicTensor<T>& bias, Conv2dOptions options = {});

// Subgradient at 0 is 0.
template <typename T>
BasicTensor<T> relu(BasicTape<T>& tape, const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> sigmoid(BasicTape<T>& tape, const BasicTensor<T>& x);

// Softmax over axis 1 of an [N,C,H,W] tensor, independently per (n, row, col).
template <typename T>
BasicTensor<T> softmax_channel(BasicTape<T>& tape, const BasicTensor<T>& x);

// 2x2 window, stride 2; ties route the gradient to the first maximum in row-major order.
template <typename T>
BasicTensor<T> maxpool2d(BasicTape<T>& tape, const BasicTensor<T>& x);

// Nearest-neighbour x2 replication; backward sums each 2x2 block.
template <typename T>
BasicTensor<T> upsample_nearest2(BasicTape<T>& tape, const BasicTensor<T>& x);

template <typename T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;

  static BatchNormState fresh(std::size_t channels) {
    return {std::vector<T>(channels, T(0)), std::vector<T>(channels, T(1))};
  }
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Per-channel statistics over (batch, height, width). Train mode normalizes by
// the biased batch variance and folds the batch mean and unbiased variance into
// `state` with momentum 0.1; eval mode uses `state` as is.
template <typename T>
BasicTensor<T> batchnorm2d(BasicTape<T>& tape, const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                           const BasicTensor<T>& beta, BatchNormState<T>& state, Mode mode);

// Source of dropout masks: the k-th dropout call draws from CounterRng(seed, k).
struct DropoutStream {
  std::uint64_t seed = 0;
  std::uint64_t counter = 0;
};

// Inverted dropout: zero with probability p, scale survivors by 1 / (1 - p).
template <typename T>
BasicTensor<T> dropout(BasicTape<T>& tape, const BasicTensor<T>& x, double p, DropoutStream& stream,
                       Mode mode);

// x[N,C,H,W] * gate[N,1,H,W], the gate broadcast over channels.
template <typename T>
BasicTensor<T> channel_gate(BasicTape<T>& tape, const BasicTensor<T>& x, const BasicTensor<T>& gate);

// Sum of all elements, as a rank-0 tensor.
template <typename T>
BasicTensor<T> sum(BasicTape<T>& tape, const BasicTensor<T>& x);

// Throws NumericError naming `op` if any value is NaN or infinite.
template <typename T>
void require_finite(const BasicTensor<T>& t, const char* op);

}  // namespace rainseg
