#include "rainseg/tensor/tensor.hpp"

#include <cstring>

#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"

namespace rainseg {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.size() > 4) throw ShapeError("tensor order " + std::to_string(shape.size()) + " exceeds 4");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("zero extent in shape " + to_string(shape));
  }
}

}  // namespace

template <typename T>
BasicTensor<T>::BasicTensor() : data_(std::make_shared<std::vector<T>>(1, T(0))) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
  check_extents(shape_);
  if (shape_numel(shape_) != values.size()) {
    throw ShapeError("shape " + to_string(shape_) + " holds " + std::to_string(shape_numel(shape_)) +
                     " values, got " + std::to_string(values.size()));
  }
  data_ = std::make_shared<std::vector<T>>(std::move(values));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::zeros(const Shape& shape) {
  return full(shape, T(0));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(const Shape& shape, T value) {
  check_extents(shape);
  return BasicTensor(shape, std::vector<T>(shape_numel(shape), value));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::randn(const Shape& shape, std::uint64_t seed, T stddev) {
  check_extents(shape);
  std::vector<T> v(shape_numel(shape));
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(rng.normal_at(i) * stddev);
  return BasicTensor(shape, std::move(v));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::uniform(const Shape& shape, std::uint64_t seed, T lo, T hi) {
  check_extents(shape);
  std::vector<T> v(shape_numel(shape));
  const CounterRng rng(seed);
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = static_cast<T>(lo + (hi - lo) * rng.uniform_at(i));
  }
  return BasicTensor(shape, std::move(v));
}

template <typename T>
std::size_t BasicTensor<T>::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape_));
  }
  return shape_[axis];
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_data() {
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
  return {data_->data(), data_->size()};
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar shape " + to_string(shape_));
  return (*data_)[0];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detached() const {
  BasicTensor copy = *this;
  copy.node_.reset();
  return copy;
}

template <typename T>
bool bit_identical(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.numel() * sizeof(T)) == 0;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template bool bit_identical(const BasicTensor<float>&, const BasicTensor<float>&);
template bool bit_identical(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace rainseg
