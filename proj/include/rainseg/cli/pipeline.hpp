#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "rainseg/cli/run_config.hpp"
#include "rainseg/data/manifest.hpp"
#include "rainseg/data/patches.hpp"
#include "rainseg/data/split.hpp"
#include "rainseg/data/stack.hpp"
#include "rainseg/metrics/metrics.hpp"
#include "rainseg/model/checkpoint.hpp"

namespace rainseg {

/// Normalized patches of a scene with their split.
struct PreparedData {
  PatchSet patches;
  SplitAssignment split;
  ChannelStats stats;
};

/// Tiles the raw stack, splits it (or takes `fixed_split`) and normalizes every
/// channel with `stats` when given, otherwise with statistics over the valid
/// cells of the training patches.
PreparedData prepare_data(const GridStack& raw, const LabelGrid& labels, std::size_t patch_size,
                          const std::array<double, 3>& fractions, std::uint64_t seed,
                          const SplitAssignment* fixed_split = nullptr, const ChannelStats* stats = nullptr);

std::vector<std::string> scheme_names(const LpaScheme& scheme);

// Normalization statistics travel with the checkpoint as extras.
void store_stats(Checkpoint& ckpt, const ChannelStats& stats);
ChannelStats stored_stats(const Checkpoint& ckpt);

// Eval-mode predictions [P][z][z] over every patch.
std::vector<std::uint8_t> predict_patches(ModelParams& params, const PatchSet& patches, std::size_t batch_size);

// Confusion matrix of `predictions` on the listed patches.
ConfusionMatrix split_confusion(const PatchSet& patches, const std::vector<std::uint8_t>& predictions,
                                std::span<const std::size_t> indices);

struct RunResult {
  FitResult fit;
  Scores test;
  bool stopped_early = false;
};

/// Full training run: writes config.txt (verbatim copy when `config_text` is
/// given), config.resolved.txt, splits.csv, history.csv, best.ckpt and
/// metrics.csv (test split, best checkpoint) into `out`. Per-epoch progress
/// goes to `log`.
RunResult train_run(const RunConfig& config, const std::filesystem::path& out, std::ostream& log,
                    const std::optional<std::string>& config_text = std::nullopt);

}  // namespace rainseg
