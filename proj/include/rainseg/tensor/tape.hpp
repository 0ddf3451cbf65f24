#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "rainseg/tensor/tensor.hpp"

namespace rainseg {

enum class OpKind : std::uint8_t {
  leaf,
  add,
  add_bias,
  mul,
  mul_scalar,
  concat_channels,
  conv2d,
  relu,
  sigmoid,
  softmax_channel,
  maxpool2d,
  upsample_nearest2,
  batchnorm2d,
  dropout,
  channel_gate,
  sum,
  focal_loss,
  dice_loss,
};

std::string_view op_name(OpKind kind);

/// Reverse-mode record of executed operations.
///
/// Nodes are appended in execution order, so the record is topologically
/// sorted. Operations whose inputs carry no gradient (or a tape built with
/// grad disabled) are not recorded at all.
template <typename T>
class BasicTape {
 public:
  using TensorT = BasicTensor<T>;
  // Receives the gradient of the op output; accumulates into input slots.
  using BackwardFn = std::function<void(BasicTape&, std::span<const T>)>;

  struct Record {
    OpKind kind;
    std::vector<std::uint32_t> inputs;
    std::uint32_t output;
  };

  explicit BasicTape(bool grad_enabled = true);

  bool grad_enabled() const noexcept { return grad_enabled_; }

  // Registers a leaf. Tensors without requires_grad pass through unchanged.
  // Registers a leaf; tensors already on this tape are returned unchanged.
  TensorT watch(const TensorT& tensor);

  // True when `t` belongs to this tape and carries a gradient.
  bool tracks(const TensorT& t) const noexcept;

  // Appends an op if any input is tracked; otherwise returns `output` as is.
  TensorT record(OpKind kind, std::initializer_list<const TensorT*> inputs, TensorT output,
                 BackwardFn backward);

  // Gradient accumulator of a tracked tensor, zero-initialized on first use.
  std::span<T> grad_slot(const TensorT& t);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward in reverse.
  void backward(const TensorT& loss);

  // Gradient of a tracked tensor after backward(); zeros if it was not reached.
  std::optional<TensorT> grad(const TensorT& t) const;

  const std::vector<Record>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<T> grad;
    BackwardFn backward;
  };

  std::uint64_t id_;
  bool grad_enabled_;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
  std::vector<Record> records_;
};

using Tape = BasicTape<float>;
using Tape64 = BasicTape<double>;

extern template class BasicTape<float>;
extern template class BasicTape<double>;

}  // namespace rainseg
