#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "rainseg/model/params.hpp"
#include "rainseg/tensor/ops.hpp"

namespace rainseg {

/// Parameters registered on one tape for one forward pass.
template <typename T>
class ParamBinding {
 public:
  ParamBinding(BasicTape<T>& tape, const BasicModelParams<T>& params);

  const BasicTensor<T>& operator[](std::string_view name) const;
  const BasicTensor<T>& at(std::size_t i) const { return bound_[i]; }
  std::size_t size() const noexcept { return bound_.size(); }

  // Gradient per parameter, in declaration order, after tape.backward().
  std::vector<BasicTensor<T>> gradients(const BasicTape<T>& tape) const;

 private:
  const BasicModelParams<T>* params_;
  std::vector<BasicTensor<T>> bound_;
};

template <typename T>
struct EncoderOutput {
  BasicTensor<T> features;
  BasicTensor<T> pooled;
};

// conv3x3 -> bn -> relu, twice, then 2x2 max pooling. `level` is 1-based.
template <typename T>
EncoderOutput<T> encoder_block(BasicTape<T>& tape, const ParamBinding<T>& p, BasicModelParams<T>& params,
                               const BasicTensor<T>& x, std::size_t level, Mode mode);

template <typename T>
struct GateOutput {
  BasicTensor<T> gated;
  BasicTensor<T> alpha;  // [N,1,H,W]
};

/// Additive attention: alpha = sigmoid(psi(relu(Wg*g + Wx*x))), output x * alpha.
/// A gate at half the skip resolution is projected, then upsampled x2.
template <typename T>
GateOutput<T> attention_gate(BasicTape<T>& tape, const ParamBinding<T>& p, const BasicTensor<T>& skip,
                             const BasicTensor<T>& gate, std::size_t level);

struct ForwardOptions {
  Mode mode = Mode::eval;
  // Required when mode is train and dropout_p > 0.
  DropoutStream* dropout = nullptr;
};

template <typename T>
struct ForwardOutput {
  BasicTensor<T> probs;  // [N,K,z,z]
  ParamBinding<T> params;
  std::vector<BasicTensor<T>> attention;  // alpha maps, deepest decoder level first
};

// x[N,C,z,z] -> channel-softmax class probabilities [N,K,z,z].
template <typename T>
ForwardOutput<T> forward(BasicTape<T>& tape, BasicModelParams<T>& params, const BasicTensor<T>& x,
                         const ForwardOptions& options = {});

// Per-cell argmax over K; ties go to the lowest class index. Output is [N][z][z].
template <typename T>
std::vector<std::uint8_t> predict_classes(const BasicTensor<T>& probs);

}  // namespace rainseg
