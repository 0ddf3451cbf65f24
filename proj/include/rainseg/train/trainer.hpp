#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rainseg/losses/losses.hpp"
#include "rainseg/model/params.hpp"
#include "rainseg/train/adam.hpp"

namespace rainseg {

struct TrainConfig {
  float learning_rate = 1e-4f;
  float weight_decay = 1e-5f;
  std::size_t batch_size = 16;
  std::size_t max_epochs = 50;
  std::size_t early_stop_patience = 10;
  double min_delta = 1e-5;
  std::uint64_t seed = 42;
  LossConfig loss;

  void validate() const;
};

/// Patches with their targets: inputs [P][C][z][z], labels and mask [P][z][z].
struct PatchDataset {
  std::size_t channels = 0;
  std::size_t patch_size = 0;
  std::vector<float> inputs;
  std::vector<std::uint8_t> labels;
  std::vector<std::uint8_t> mask;

  std::size_t size() const noexcept;
  std::size_t cells_per_patch() const noexcept { return patch_size * patch_size; }
  // Stacks the listed patches into an [n,C,z,z] tensor.
  Tensor batch_inputs(std::span<const std::size_t> indices) const;
  std::vector<std::uint8_t> batch_labels(std::span<const std::size_t> indices) const;
  std::vector<std::uint8_t> batch_mask(std::span<const std::size_t> indices) const;
};

struct LossStats {
  double total = 0.0;
  double focal = 0.0;
  double dice = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  LossStats train;
  LossStats val;
};

// Patch visiting order for an epoch, shuffled from derive_seed(seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch);

/// One pass over `data` in train mode: one adam_step per batch. Returns the
/// mean of the per-batch losses.
LossStats train_epoch(ModelParams& params, AdamState& state, const PatchDataset& data, const TrainConfig& config,
                      std::size_t epoch);

struct Evaluation {
  LossStats loss;
  std::vector<std::uint8_t> predictions;  // [P][z][z]
};

// Eval-mode forward in chunks of `batch_size`; the loss covers the whole set at once.
Evaluation evaluate(ModelParams& params, const PatchDataset& data, const LossConfig& loss, std::size_t batch_size);

struct FitResult {
  ModelParams best;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<EpochRecord> history;
  bool stopped_early = false;
};

/// Epoch loop with early stopping on the validation combined loss: an epoch
/// improves when its loss is below best - min_delta; training stops after
/// `early_stop_patience` epochs without improvement or at max_epochs. The
/// returned parameters (with their batchnorm statistics) are the snapshot
/// taken at the best epoch.
FitResult fit(const ModelParams& initial, const PatchDataset& train, const PatchDataset& val, const TrainConfig& config,
              const std::function<void(const EpochRecord&)>& on_epoch = {});

// epoch,train_total,train_focal,train_dice,val_total,val_focal,val_dice with LF endings.
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace rainseg
