#pragma once

#include <cstdint>
#include <span>

#include "rainseg/tensor/tape.hpp"
#include "rainseg/tensor/tensor.hpp"

namespace rainseg {

inline constexpr std::uint8_t kInvalidLabel = 255;
// Probabilities are clamped into [kProbFloor, 1 - kProbFloor] before the log.
inline constexpr double kProbFloor = 1e-7;
// Dice averages over classes with labels in the batch or predicted mass above this.
inline constexpr double kDiceMassFloor = 1e-6;

struct LossConfig {
  float alpha = 1.0f;
  float gamma = 2.0f;
  float epsilon = 1.0f;
  float lambda_fl = 1.0f;
  float lambda_dice = 1.0f;

  void validate() const;
};

/// Targets for an [N,K,z,z] probability batch: labels[N*z*z] with 255 for
/// invalid cells, and an optional validity mask of the same length (non-zero
/// = valid). A cell counts when the mask allows it and its label is not 255.
struct LossTargets {
  std::span<const std::uint8_t> labels;
  std::span<const std::uint8_t> mask;
};

/// Mean over valid cells of alpha * (1 - p)^gamma * -log(p), p the clamped
/// probability of the true class.
template <typename T>
BasicTensor<T> focal_loss(BasicTape<T>& tape, const BasicTensor<T>& probs, const LossTargets& targets,
                          const LossConfig& config);

/// 1 - mean_k Dice_k, Dice_k = (2 sum p*y + eps) / (sum p + sum y + eps), sums
/// over the valid cells of the whole batch.
template <typename T>
BasicTensor<T> dice_loss(BasicTape<T>& tape, const BasicTensor<T>& probs, const LossTargets& targets,
                         const LossConfig& config);

template <typename T>
struct CombinedLoss {
  BasicTensor<T> total;
  double focal = 0.0;
  double dice = 0.0;
};

// lambda_fl * focal + lambda_dice * dice, with both components for logging.
template <typename T>
CombinedLoss<T> combined_loss(BasicTape<T>& tape, const BasicTensor<T>& probs, const LossTargets& targets,
                              const LossConfig& config);

}  // namespace rainseg
