#include "rainseg/tensor/tape.hpp"

#include <atomic>
#include <stdexcept>

#include "rainseg/core/error.hpp"

namespace rainseg {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::add: return "add";
    case OpKind::add_bias: return "add_bias";
    case OpKind::mul: return "mul";
    case OpKind::mul_scalar: return "mul_scalar";
    case OpKind::concat_channels: return "concat_channels";
    case OpKind::conv2d: return "conv2d";
    case OpKind::relu: return "relu";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::softmax_channel: return "softmax_channel";
    case OpKind::maxpool2d: return "maxpool2d";
    case OpKind::upsample_nearest2: return "upsample_nearest2";
    case OpKind::batchnorm2d: return "batchnorm2d";
    case OpKind::dropout: return "dropout";
    case OpKind::channel_gate: return "channel_gate";
    case OpKind::sum: return "sum";
    case OpKind::focal_loss: return "focal_loss";
    case OpKind::dice_loss: return "dice_loss";
  }
  return "unknown";
}

namespace {
std::atomic<std::uint64_t> next_tape_id{1};
}

template <typename T>
BasicTape<T>::BasicTape(bool grad_enabled) : id_(next_tape_id++), grad_enabled_(grad_enabled) {}

template <typename T>
bool BasicTape<T>::tracks(const TensorT& t) const noexcept {
  return t.node() && t.node()->tape == id_ && t.node()->id < nodes_.size();
}

template <typename T>
typename BasicTape<T>::TensorT BasicTape<T>::watch(const TensorT& tensor) {
  if (tracks(tensor)) return tensor;
  if (!grad_enabled_ || !tensor.requires_grad()) return tensor.detached();
  if (backward_done_) throw std::logic_error("tape already ran backward; start a new tape");
  TensorT out = tensor.detached();
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{tensor.shape(), {}, {}});
  records_.push_back(Record{OpKind::leaf, {}, id});
  out.attach(NodeRef{id_, id});
  return out;
}

template <typename T>
typename BasicTape<T>::TensorT BasicTape<T>::record(OpKind kind,
                                                    std::initializer_list<const TensorT*> inputs,
                                                    TensorT output, BackwardFn backward) {
  output = output.detached();
  output.set_requires_grad(false);
  if (!grad_enabled_) return output;
  std::vector<std::uint32_t> ids;
  for (const TensorT* in : inputs) {
    if (in && tracks(*in)) ids.push_back(in->node()->id);
  }
  if (ids.empty()) return output;
  if (backward_done_) throw std::logic_error("tape already ran backward; start a new tape");
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back(Node{output.shape(), {}, std::move(backward)});
  records_.push_back(Record{kind, std::move(ids), id});
  output.set_requires_grad(true);
  output.attach(NodeRef{id_, id});
  return output;
}

template <typename T>
std::span<T> BasicTape<T>::grad_slot(const TensorT& t) {
  if (!tracks(t)) throw std::logic_error("grad_slot on a tensor not tracked by this tape");
  Node& node = nodes_[t.node()->id];
  if (node.grad.empty()) node.grad.assign(shape_numel(node.shape), T(0));
  return {node.grad.data(), node.grad.size()};
}

template <typename T>
void BasicTape<T>::backward(const TensorT& loss) {
  if (loss.numel() != 1) throw ShapeError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  if (!tracks(loss)) throw std::logic_error("loss was not produced on this tape");
  if (backward_done_) throw std::logic_error("backward already ran on this tape; run a new forward first");
  backward_done_ = true;
  nodes_[loss.node()->id].grad.assign(1, T(1));
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    Node& node = nodes_[i];
    if (node.grad.empty() || !node.backward) continue;
    node.backward(*this, std::span<const T>(node.grad.data(), node.grad.size()));
    // Intermediate gradients are dead once propagated; leaves keep theirs.
    node.backward = nullptr;
    std::vector<T>().swap(node.grad);
  }
}

template <typename T>
std::optional<typename BasicTape<T>::TensorT> BasicTape<T>::grad(const TensorT& t) const {
  if (!tracks(t)) return std::nullopt;
  const Node& node = nodes_[t.node()->id];
  if (node.grad.empty()) return TensorT::zeros(node.shape);
  return TensorT(node.shape, node.grad);
}

template class BasicTape<float>;
template class BasicTape<double>;

}  // namespace rainseg
