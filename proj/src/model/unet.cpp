#include "rainseg/model/unet.hpp"

#include <string>

#include "rainseg/core/error.hpp"

namespace rainseg {

template <typename T>
ParamBinding<T>::ParamBinding(BasicTape<T>& tape, const BasicModelParams<T>& params) : params_(&params) {
  bound_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) bound_.push_back(tape.watch(params.tensor(i)));
}

template <typename T>
const BasicTensor<T>& ParamBinding<T>::operator[](std::string_view name) const {
  for (std::size_t i = 0; i < params_->size(); ++i) {
    if (params_->name(i) == name) return bound_[i];
  }
  throw ConfigError("unknown parameter " + std::string(name));
}

template <typename T>
std::vector<BasicTensor<T>> ParamBinding<T>::gradients(const BasicTape<T>& tape) const {
  std::vector<BasicTensor<T>> out;
  out.reserve(bound_.size());
  for (const auto& t : bound_) {
    auto g = tape.grad(t);
    out.push_back(g ? *g : BasicTensor<T>::zeros(t.shape()));
  }
  return out;
}

namespace {

template <typename T>
BasicTensor<T> conv_bn_relu(BasicTape<T>& tape, const ParamBinding<T>& p, BasicModelParams<T>& params,
                            const BasicTensor<T>& x, const std::string& conv, const std::string& bn,
                            Mode mode) {
  auto y = conv2d(tape, x, p[conv + ".w"], p[conv + ".b"]);
  y = batchnorm2d(tape, y, p[bn + ".gamma"], p[bn + ".beta"], params.batchnorm(bn), mode);
  return relu(tape, y);
}

template <typename T>
BasicTensor<T> conv1x1(BasicTape<T>& tape, const ParamBinding<T>& p, const BasicTensor<T>& x,
                       const std::string& name) {
  return conv2d(tape, x, p[name + ".w"], p[name + ".b"]);
}

}  // namespace

template <typename T>
EncoderOutput<T> encoder_block(BasicTape<T>& tape, const ParamBinding<T>& p, BasicModelParams<T>& params,
                               const BasicTensor<T>& x, std::size_t level, Mode mode) {
  if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw ShapeError("encoder block needs an [N,C,H,W] input with even H and W, got " + to_string(x.shape()));
  }
  const std::string e = "enc" + std::to_string(level);
  auto h = conv_bn_relu(tape, p, params, x, e + ".conv1", e + ".bn1", mode);
  h = conv_bn_relu(tape, p, params, h, e + ".conv2", e + ".bn2", mode);
  auto pooled = maxpool2d(tape, h);
  return {std::move(h), std::move(pooled)};
}

template <typename T>
GateOutput<T> attention_gate(BasicTape<T>& tape, const ParamBinding<T>& p, const BasicTensor<T>& skip,
                             const BasicTensor<T>& gate, std::size_t level) {
  const std::string a = "att" + std::to_string(level);
  auto g = conv1x1(tape, p, gate, a + ".wg");
  if (g.rank() == 4 && skip.rank() == 4 && 2 * g.dim(2) == skip.dim(2) && 2 * g.dim(3) == skip.dim(3)) {
    g = upsample_nearest2(tape, g);
  }
  auto xs = conv1x1(tape, p, skip, a + ".wx");
  if (g.shape() != xs.shape()) {
    throw ShapeError("attention gate: projected gate " + to_string(g.shape()) + " does not match skip " +
                     to_string(xs.shape()));
  }
  auto act = relu(tape, add(tape, g, xs));
  auto alpha = sigmoid(tape, conv1x1(tape, p, act, a + ".psi"));
  auto gated = channel_gate(tape, skip, alpha);
  return {std::move(gated), std::move(alpha)};
}

template <typename T>
ForwardOutput<T> forward(BasicTape<T>& tape, BasicModelParams<T>& params, const BasicTensor<T>& x,
                         const ForwardOptions& options) {
  const ModelConfig& cfg = params.config();
  if (x.rank() != 4) throw ShapeError("model input must be [N,C,z,z], got " + to_string(x.shape()));
  if (x.dim(1) != cfg.in_channels) {
    throw ShapeError("model input channels: expected " + std::to_string(cfg.in_channels) + ", got " +
                     std::to_string(x.dim(1)));
  }
  const std::size_t factor = std::size_t{1} << (cfg.levels() - 1);
  if (x.dim(2) != x.dim(3) || x.dim(2) % factor != 0) {
    throw ShapeError("model input patch: expected square extents divisible by " + std::to_string(factor) +
                     ", got " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)));
  }
  const bool drop = options.mode == Mode::train && cfg.dropout_p > 0.0;
  if (drop && !options.dropout) throw ConfigError("train-mode forward needs a dropout stream");

  ForwardOutput<T> out{BasicTensor<T>(), ParamBinding<T>(tape, params), {}};
  const ParamBinding<T>& p = out.params;
  const std::size_t levels = cfg.levels();

  std::vector<BasicTensor<T>> skips;
  BasicTensor<T> h = x;
  for (std::size_t l = 1; l < levels; ++l) {
    auto enc = encoder_block(tape, p, params, h, l, options.mode);
    skips.push_back(std::move(enc.features));
    h = std::move(enc.pooled);
  }
  // Bottleneck: same two conv stages, no pooling.
  {
    const std::string e = "enc" + std::to_string(levels);
    h = conv_bn_relu(tape, p, params, h, e + ".conv1", e + ".bn1", options.mode);
    h = conv_bn_relu(tape, p, params, h, e + ".conv2", e + ".bn2", options.mode);
  }
  for (std::size_t l = levels - 1; l >= 1; --l) {
    const std::string d = "dec" + std::to_string(l);
    auto up = conv_bn_relu(tape, p, params, upsample_nearest2(tape, h), d + ".up", d + ".upbn", options.mode);
    auto gate = attention_gate(tape, p, skips[l - 1], up, l);
    out.attention.push_back(gate.alpha);
    h = concat_channels(tape, gate.gated, up);
    h = conv_bn_relu(tape, p, params, h, d + ".conv1", d + ".bn1", options.mode);
    h = conv_bn_relu(tape, p, params, h, d + ".conv2", d + ".bn2", options.mode);
    if (drop) h = dropout(tape, h, cfg.dropout_p, *options.dropout, Mode::train);
  }
  out.probs = softmax_channel(tape, conv1x1(tape, p, h, "head"));
  return out;
}

template <typename T>
std::vector<std::uint8_t> predict_classes(const BasicTensor<T>& probs) {
  if (probs.rank() != 4) throw ShapeError("predict_classes expects [N,K,z,z], got " + to_string(probs.shape()));
  const std::size_t n = probs.dim(0);
  const std::size_t k = probs.dim(1);
  const std::size_t plane = probs.dim(2) * probs.dim(3);
  const auto v = probs.data();
  std::vector<std::uint8_t> out(n * plane);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t best = 0;
      T best_v = v[b * k * plane + p];
      for (std::size_t c = 1; c < k; ++c) {
        const T cand = v[(b * k + c) * plane + p];
        if (cand > best_v) {
          best_v = cand;
          best = c;
        }
      }
      out[b * plane + p] = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

#define RAINSEG_INSTANTIATE_UNET(T)                                                                       \
  template class ParamBinding<T>;                                                                         \
  template EncoderOutput<T> encoder_block<T>(BasicTape<T>&, const ParamBinding<T>&, BasicModelParams<T>&, \
                                             const BasicTensor<T>&, std::size_t, Mode);                   \
  template GateOutput<T> attention_gate<T>(BasicTape<T>&, const ParamBinding<T>&, const BasicTensor<T>&,  \
                                           const BasicTensor<T>&, std::size_t);                           \
  template ForwardOutput<T> forward<T>(BasicTape<T>&, BasicModelParams<T>&, const BasicTensor<T>&,        \
                                       const ForwardOptions&);                                            \
  template std::vector<std::uint8_t> predict_classes<T>(const BasicTensor<T>&);

RAINSEG_INSTANTIATE_UNET(float)
RAINSEG_INSTANTIATE_UNET(double)

}  // namespace rainseg
