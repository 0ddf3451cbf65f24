#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rainseg/data/raster.hpp"
#include "rainseg/data/stack.hpp"
#include "rainseg/train/trainer.hpp"

namespace rainseg {

struct PatchOrigin {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const PatchOrigin&, const PatchOrigin&) = default;
};

/// Non-overlapping z x z tiles of a stack padded on the bottom and right.
/// Patches are ordered row-major over the patch grid. A cell is valid when
/// the stack cell is valid and its label is not 255; padding is invalid with
/// zero inputs and label 255. Inputs are copied wherever the stack is valid,
/// including cells without a label.
struct PatchSet {
  std::size_t patch_size = 0;
  std::size_t channels = 0;
  std::size_t height = 0;  // unpadded grid
  std::size_t width = 0;
  std::size_t patch_rows = 0;
  std::size_t patch_cols = 0;
  std::size_t num_classes = 0;
  std::vector<PatchOrigin> origins;
  std::vector<float> inputs;          // [P][C][z][z]
  std::vector<std::uint8_t> labels;   // [P][z][z]
  std::vector<std::uint8_t> valid;    // [P][z][z]

  std::size_t size() const noexcept { return origins.size(); }
  std::size_t cells_per_patch() const noexcept { return patch_size * patch_size; }
  std::size_t valid_cells(std::size_t patch) const;

  // Copies the listed patches into a training dataset.
  PatchDataset dataset(std::span<const std::size_t> indices) const;
};

// Throws ConfigError when z is not a positive multiple of 8, when z exceeds
// the grid, or when stack and labels disagree in extent.
PatchSet tile_patches(const GridStack& stack, const LabelGrid& labels, std::size_t z);

// [H][W] mask of grid cells covered by the listed patches (padding excluded).
std::vector<std::uint8_t> patch_coverage(const PatchSet& patches, std::span<const std::size_t> indices);

// Reassembles per-patch class maps [P][z][z] onto the H x W grid; cells that
// are invalid in the patch set become 255.
LabelGrid untile(const PatchSet& patches, std::span<const std::uint8_t> predictions);

}  // namespace rainseg
