#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rainseg {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

// Identity of a tensor inside one tape.
struct NodeRef {
  std::uint64_t tape = 0;
  std::uint32_t id = 0;
};

/// Dense row-major array of order <= 4. 4-D tensors use [batch, channel, height, width].
///
/// Storage is shared between copies and treated as immutable once a tensor has
/// been produced by an operation; mutable_data() detaches (copy-on-write).
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor();
  BasicTensor(Shape shape, std::vector<T> values);

  static BasicTensor zeros(const Shape& shape);
  static BasicTensor full(const Shape& shape, T value);
  // Normal(0, stddev^2) values from CounterRng(seed).
  static BasicTensor randn(const Shape& shape, std::uint64_t seed, T stddev);
  // Uniform [lo, hi) values from CounterRng(seed).
  static BasicTensor uniform(const Shape& shape, std::uint64_t seed, T lo, T hi);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return data_ ? data_->size() : 0; }

  std::span<const T> data() const noexcept { return {data_->data(), data_->size()}; }
  std::span<T> mutable_data();

  T item() const;

  bool requires_grad() const noexcept { return requires_grad_; }
  BasicTensor& set_requires_grad(bool value) noexcept {
    requires_grad_ = value;
    return *this;
  }

  const std::optional<NodeRef>& node() const noexcept { return node_; }
  void attach(NodeRef ref) noexcept { node_ = ref; }
  // Same values and flags, no tape identity.
  BasicTensor detached() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(numel());
    const auto src = data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(src[i]);
    BasicTensor<U> result(shape_, std::move(out));
    result.set_requires_grad(requires_grad_);
    return result;
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  bool requires_grad_ = false;
  std::optional<NodeRef> node_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

template <typename T>
bool bit_identical(const BasicTensor<T>& a, const BasicTensor<T>& b);

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace rainseg
