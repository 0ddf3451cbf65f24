#include "rainseg/train/adam.hpp"

#include <cmath>
#include <string>

#include "rainseg/core/error.hpp"
#include "rainseg/kernels/parallel.hpp"

namespace rainseg {

AdamState AdamState::for_params(const ModelParams& params) {
  AdamState s;
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m.emplace_back(params.tensor(i).numel(), 0.0f);
    s.v.emplace_back(params.tensor(i).numel(), 0.0f);
  }
  return s;
}

void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state, float learning_rate,
               float weight_decay) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients and " +
                     std::to_string(state.m.size()) + " moment slots for " + std::to_string(params.size()) +
                     " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params.tensor(i).shape() || state.m[i].size() != params.tensor(i).numel() ||
        state.v[i].size() != params.tensor(i).numel()) {
      throw ShapeError("adam_step: gradient " + to_string(grads[i].shape()) + " vs parameter " + params.name(i) +
                       " " + to_string(params.tensor(i).shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const float bc1 = static_cast<float>(1.0 - std::pow(static_cast<double>(kAdamBeta1), t));
  const float bc2 = static_cast<float>(1.0 - std::pow(static_cast<double>(kAdamBeta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params.tensor(i).mutable_data();
    const auto g = grads[i].data();
    float* m = state.m[i].data();
    float* v = state.v[i].data();
    const std::size_t n = theta.size();
    RAINSEG_PARFOR
    for (std::size_t j = 0; j < n; ++j) {
      const float gj = g[j] + weight_decay * theta[j];
      m[j] = kAdamBeta1 * m[j] + (1.0f - kAdamBeta1) * gj;
      v[j] = kAdamBeta2 * v[j] + (1.0f - kAdamBeta2) * gj * gj;
      const float m_hat = m[j] / bc1;
      const float v_hat = v[j] / bc2;
      theta[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + kAdamEps);
    }
  }
}

}  // namespace rainseg
