#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rainseg/data/raster.hpp"

namespace rainseg {

struct ChannelInfo {
  std::string modality;
  std::size_t month = 0;
  friend bool operator==(const ChannelInfo&, const ChannelInfo&) = default;
};

struct ModalitySlice {
  std::string modality;
  std::size_t month = 0;
  RasterGrid grid;  // single channel
};

/// Channel-wise concatenation of all modalities over all months.
struct GridStack {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<ChannelInfo> channels;  // channel index -> (modality, month)
  std::vector<float> values;          // [c][h][w]
  std::vector<std::uint8_t> valid;    // [h][w]

  std::size_t num_channels() const noexcept { return channels.size(); }
  std::size_t cells() const noexcept { return height * width; }
  float at(std::size_t c, std::size_t r, std::size_t col) const { return values[(c * height + r) * width + col]; }
  std::size_t valid_cells() const;
};

// Slices must be grouped by modality (modality-major) with the same month
// sequence inside every group.
GridStack stack_modalities(const std::vector<ModalitySlice>& slices);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  static ChannelStats identity(std::size_t channels);
  std::size_t size() const noexcept { return mean.size(); }
};

// Population statistics over valid cells. Throws ConfigError for a channel
// with no valid cells.
ChannelStats compute_stats(const GridStack& stack);

// z-scores every channel with the given stats, or with the stack's own stats
// when none are supplied. Channels with zero spread are only centered.
std::pair<GridStack, ChannelStats> normalize_channels(const GridStack& stack, const ChannelStats* stats = nullptr);

}  // namespace rainseg
