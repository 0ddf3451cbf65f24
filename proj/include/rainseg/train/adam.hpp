#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rainseg/model/params.hpp"

namespace rainseg {

inline constexpr float kAdamBeta1 = 0.9f;
inline constexpr float kAdamBeta2 = 0.999f;
inline constexpr float kAdamEps = 1e-8f;

// First/second moments mirroring the parameter shapes, and the step counter.
struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::uint64_t step = 0;

  static AdamState for_params(const ModelParams& params);
};

/// One Adam update with coupled L2 decay:
///   g' = g + wd * theta
///   m = b1 m + (1 - b1) g',  v = b2 v + (1 - b2) g'^2
///   theta -= lr * m_hat / (sqrt(v_hat) + eps), with bias-corrected moments.
void adam_step(ModelParams& params, std::span<const Tensor> grads, AdamState& state, float learning_rate,
               float weight_decay);

}  // namespace rainseg
