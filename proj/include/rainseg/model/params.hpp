#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rainseg/tensor/ops.hpp"
#include "rainseg/tensor/tensor.hpp"

namespace rainseg {

struct ModelConfig {
  std::size_t in_channels = 21;
  std::size_t num_classes = 5;
  std::vector<std::size_t> encoder_features{64, 128, 256, 512};
  double dropout_p = 0.3;
  std::size_t patch_size = 32;

  std::size_t levels() const noexcept { return encoder_features.size(); }
  // Throws ConfigError on an unusable configuration.
  void validate() const;
};

/// Learnable tensors of the attention U-Net in declaration order, plus the
/// running statistics of every batchnorm layer.
///
/// Names follow `<block>.<layer>.<param>`; see layer_inventory() for the full list.
template <typename T>
class BasicModelParams {
 public:
  using TensorT = BasicTensor<T>;

  BasicModelParams() = default;
  explicit BasicModelParams(ModelConfig config) : config_(std::move(config)) {}

  const ModelConfig& config() const noexcept { return config_; }

  void add(std::string name, TensorT tensor);
  void add_batchnorm(std::string layer, BatchNormState<T> state);

  bool contains(std::string_view name) const;
  const TensorT& at(std::string_view name) const;
  TensorT& at(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  const TensorT& tensor(std::size_t i) const { return entries_[i].second; }
  TensorT& tensor(std::size_t i) { return entries_[i].second; }

  BatchNormState<T>& batchnorm(std::string_view layer);
  const BatchNormState<T>& batchnorm(std::string_view layer) const;
  const std::vector<std::pair<std::string, BatchNormState<T>>>& batchnorms() const noexcept { return bn_; }

  // Total number of learnable scalars.
  std::size_t parameter_count() const;

  template <typename U>
  BasicModelParams<U> cast() const {
    BasicModelParams<U> out(config_);
    for (const auto& [n, t] : entries_) {
      auto c = t.template cast<U>();
      c.set_requires_grad(true);
      out.add(n, std::move(c));
    }
    for (const auto& [n, s] : bn_) {
      BatchNormState<U> state;
      state.running_mean.assign(s.running_mean.begin(), s.running_mean.end());
      state.running_var.assign(s.running_var.begin(), s.running_var.end());
      out.add_batchnorm(n, std::move(state));
    }
    return out;
  }

 private:
  ModelConfig config_;
  std::vector<std::pair<std::string, TensorT>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::pair<std::string, BatchNormState<T>>> bn_;
};

using ModelParams = BasicModelParams<float>;

// Bitwise equality of config, names, shapes, values and batchnorm statistics.
bool params_identical(const ModelParams& a, const ModelParams& b);

struct LayerSpec {
  std::string name;
  Shape shape;
};

// Declared parameters and their shapes, in forward order.
std::vector<LayerSpec> layer_inventory(const ModelConfig& config);
// Batchnorm layer names and channel counts, in forward order.
std::vector<std::pair<std::string, std::size_t>> batchnorm_inventory(const ModelConfig& config);

// He-normal convolution weights (stddev sqrt(2 / fan_in)), zero biases,
// gamma 1 and beta 0. Parameter i draws from CounterRng(derive_seed(seed, i)).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

extern template class BasicModelParams<float>;
extern template class BasicModelParams<double>;

}  // namespace rainseg
