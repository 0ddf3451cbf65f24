#include "rainseg/model/params.hpp"

#include <cmath>
#include <cstring>

#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"

namespace rainseg {

void ModelConfig::validate() const {
  if (in_channels == 0) throw ConfigError("in_channels must be >= 1");
  if (num_classes < 2 || num_classes > 254) throw ConfigError("num_classes must lie in [2, 254]");
  if (encoder_features.size() < 2) throw ConfigError("encoder needs at least two levels");
  for (std::size_t i = 0; i < encoder_features.size(); ++i) {
    if (encoder_features[i] < 2) throw ConfigError("encoder feature widths must be >= 2");
    if (i > 0 && encoder_features[i] <= encoder_features[i - 1]) {
      throw ConfigError("encoder feature widths must be strictly increasing");
    }
  }
  if (!(dropout_p >= 0.0) || dropout_p >= 1.0) throw ConfigError("dropout_p must lie in [0, 1)");
  const std::size_t factor = std::size_t{1} << (levels() - 1);
  if (patch_size == 0 || patch_size % factor != 0) {
    throw ConfigError("patch_size " + std::to_string(patch_size) + " must be divisible by " +
                      std::to_string(factor));
  }
}

template <typename T>
void BasicModelParams<T>::add(std::string name, TensorT tensor) {
  if (index_.count(name)) throw ConfigError("duplicate parameter " + name);
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(tensor));
}

template <typename T>
void BasicModelParams<T>::add_batchnorm(std::string layer, BatchNormState<T> state) {
  bn_.emplace_back(std::move(layer), std::move(state));
}

template <typename T>
bool BasicModelParams<T>::contains(std::string_view name) const {
  return index_.count(std::string(name)) > 0;
}

template <typename T>
const typename BasicModelParams<T>::TensorT& BasicModelParams<T>::at(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter " + std::string(name));
  return entries_[it->second].second;
}

template <typename T>
typename BasicModelParams<T>::TensorT& BasicModelParams<T>::at(std::string_view name) {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter " + std::string(name));
  return entries_[it->second].second;
}

template <typename T>
BatchNormState<T>& BasicModelParams<T>::batchnorm(std::string_view layer) {
  for (auto& [n, s] : bn_) {
    if (n == layer) return s;
  }
  throw ConfigError("unknown batchnorm layer " + std::string(layer));
}

template <typename T>
const BatchNormState<T>& BasicModelParams<T>::batchnorm(std::string_view layer) const {
  for (const auto& [n, s] : bn_) {
    if (n == layer) return s;
  }
  throw ConfigError("unknown batchnorm layer " + std::string(layer));
}

template <typename T>
std::size_t BasicModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

template class BasicModelParams<float>;
template class BasicModelParams<double>;

bool params_identical(const ModelParams& a, const ModelParams& b) {
  const auto& ca = a.config();
  const auto& cb = b.config();
  if (ca.in_channels != cb.in_channels || ca.num_classes != cb.num_classes ||
      ca.encoder_features != cb.encoder_features || ca.patch_size != cb.patch_size ||
      std::memcmp(&ca.dropout_p, &cb.dropout_p, sizeof(double)) != 0) {
    return false;
  }
  if (a.size() != b.size() || a.batchnorms().size() != b.batchnorms().size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.name(i) != b.name(i) || !bit_identical(a.tensor(i), b.tensor(i))) return false;
  }
  for (std::size_t i = 0; i < a.batchnorms().size(); ++i) {
    const auto& [na, sa] = a.batchnorms()[i];
    const auto& [nb, sb] = b.batchnorms()[i];
    if (na != nb || sa.running_mean.size() != sb.running_mean.size()) return false;
    const std::size_t bytes = sa.running_mean.size() * sizeof(float);
    if (std::memcmp(sa.running_mean.data(), sb.running_mean.data(), bytes) != 0 ||
        std::memcmp(sa.running_var.data(), sb.running_var.data(), bytes) != 0) {
      return false;
    }
  }
  return true;
}

namespace {

void push_conv(std::vector<LayerSpec>& out, const std::string& prefix, std::size_t cout, std::size_t cin,
               std::size_t k) {
  out.push_back({prefix + ".w", {cout, cin, k, k}});
  out.push_back({prefix + ".b", {cout}});
}

void push_bn(std::vector<LayerSpec>& out, const std::string& prefix, std::size_t c) {
  out.push_back({prefix + ".gamma", {c}});
  out.push_back({prefix + ".beta", {c}});
}

}  // namespace

std::vector<LayerSpec> layer_inventory(const ModelConfig& config) {
  config.validate();
  const auto& f = config.encoder_features;
  const std::size_t levels = f.size();
  std::vector<LayerSpec> out;
  std::size_t cin = config.in_channels;
  for (std::size_t l = 1; l <= levels; ++l) {
    const std::string p = "enc" + std::to_string(l);
    push_conv(out, p + ".conv1", f[l - 1], cin, 3);
    push_bn(out, p + ".bn1", f[l - 1]);
    push_conv(out, p + ".conv2", f[l - 1], f[l - 1], 3);
    push_bn(out, p + ".bn2", f[l - 1]);
    cin = f[l - 1];
  }
  for (std::size_t l = levels - 1; l >= 1; --l) {
    const std::size_t width = f[l - 1];
    const std::size_t inter = std::max<std::size_t>(1, width / 2);
    const std::string d = "dec" + std::to_string(l);
    const std::string a = "att" + std::to_string(l);
    push_conv(out, d + ".up", width, f[l], 3);
    push_bn(out, d + ".upbn", width);
    push_conv(out, a + ".wg", inter, width, 1);
    push_conv(out, a + ".wx", inter, width, 1);
    push_conv(out, a + ".psi", 1, inter, 1);
    push_conv(out, d + ".conv1", width, 2 * width, 3);
    push_bn(out, d + ".bn1", width);
    push_conv(out, d + ".conv2", width, width, 3);
    push_bn(out, d + ".bn2", width);
  }
  push_conv(out, "head", config.num_classes, f[0], 1);
  return out;
}

std::vector<std::pair<std::string, std::size_t>> batchnorm_inventory(const ModelConfig& config) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& spec : layer_inventory(config)) {
    constexpr std::string_view suffix = ".gamma";
    if (spec.name.size() > suffix.size() && spec.name.ends_with(suffix)) {
      out.emplace_back(spec.name.substr(0, spec.name.size() - suffix.size()), spec.shape[0]);
    }
  }
  return out;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams params(config);
  const auto inventory = layer_inventory(config);
  for (std::size_t i = 0; i < inventory.size(); ++i) {
    const auto& spec = inventory[i];
    Tensor t;
    if (spec.name.ends_with(".w")) {
      const std::size_t fan_in = spec.shape[1] * spec.shape[2] * spec.shape[3];
      t = Tensor::randn(spec.shape, derive_seed(seed, i), static_cast<float>(std::sqrt(2.0 / fan_in)));
    } else if (spec.name.ends_with(".gamma")) {
      t = Tensor::full(spec.shape, 1.0f);
    } else {
      t = Tensor::zeros(spec.shape);
    }
    t.set_requires_grad(true);
    params.add(spec.name, std::move(t));
  }
  for (const auto& [layer, channels] : batchnorm_inventory(config)) {
    params.add_batchnorm(layer, BatchNormState<float>::fresh(channels));
  }
  return params;
}

}  // namespace rainseg
