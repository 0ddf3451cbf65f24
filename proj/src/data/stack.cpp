#include "rainseg/data/stack.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "rainseg/core/error.hpp"

namespace rainseg {

namespace {
constexpr double kMinSpread = 1e-12;
}

std::size_t GridStack::valid_cells() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

GridStack stack_modalities(const std::vector<ModalitySlice>& slices) {
  if (slices.empty()) throw ConfigError("no modality grids to stack");
  std::vector<std::string> modalities;
  std::vector<std::vector<std::size_t>> months;
  for (const auto& s : slices) {
    if (modalities.empty() || modalities.back() != s.modality) {
      if (std::find(modalities.begin(), modalities.end(), s.modality) != modalities.end()) {
        throw ConfigError("modality '" + s.modality + "' is not contiguous; order must be modality-major");
      }
      modalities.push_back(s.modality);
      months.emplace_back();
    }
    auto& seq = months.back();
    if (std::find(seq.begin(), seq.end(), s.month) != seq.end()) {
      throw ConfigError("modality '" + s.modality + "' lists month " + std::to_string(s.month) + " twice");
    }
    seq.push_back(s.month);
  }
  for (std::size_t m = 1; m < months.size(); ++m) {
    if (months[m] != months[0]) {
      throw ConfigError("modality '" + modalities[m] + "' does not cover the same months as '" + modalities[0] + "'");
    }
  }

  const auto& first = slices.front().grid;
  GridStack out;
  out.height = first.height;
  out.width = first.width;
  out.valid.assign(out.cells(), 1);
  out.values.reserve(out.cells() * slices.size());
  for (const auto& s : slices) {
    s.grid.validate();
    if (s.grid.height != out.height || s.grid.width != out.width) {
      throw ConfigError("modality '" + s.modality + "' month " + std::to_string(s.month) + " is " +
                        std::to_string(s.grid.height) + "x" + std::to_string(s.grid.width) + ", expected " +
                        std::to_string(out.height) + "x" + std::to_string(out.width));
    }
    if (s.grid.channels != 1) {
      throw ConfigError("modality '" + s.modality + "' month " + std::to_string(s.month) +
                        " must be a single-channel grid");
    }
    out.channels.push_back({s.modality, s.month});
    out.values.insert(out.values.end(), s.grid.values.begin(), s.grid.values.end());
    for (std::size_t i = 0; i < out.cells(); ++i) out.valid[i] &= s.grid.valid[i];
  }
  const std::size_t plane = out.cells();
  for (std::size_t i = 0; i < plane; ++i) {
    if (!out.valid[i]) {
      for (std::size_t c = 0; c < out.num_channels(); ++c) out.values[c * plane + i] = 0.0f;
    }
  }
  return out;
}

ChannelStats ChannelStats::identity(std::size_t channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 1.0)};
}

ChannelStats compute_stats(const GridStack& stack) {
  const std::size_t plane = stack.cells();
  const std::size_t n = stack.valid_cells();
  if (n == 0) throw ConfigError("cannot normalize: no channel has valid cells");
  ChannelStats st;
  for (std::size_t c = 0; c < stack.num_channels(); ++c) {
    const float* v = stack.values.data() + c * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (stack.valid[i]) sum += v[i];
    }
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      if (stack.valid[i]) ss += (v[i] - mean) * (v[i] - mean);
    }
    st.mean.push_back(mean);
    st.stddev.push_back(std::sqrt(ss / static_cast<double>(n)));
  }
  return st;
}

std::pair<GridStack, ChannelStats> normalize_channels(const GridStack& stack, const ChannelStats* stats) {
  ChannelStats st = stats ? *stats : compute_stats(stack);
  if (st.mean.size() != stack.num_channels() || st.stddev.size() != stack.num_channels()) {
    throw ConfigError("normalization stats cover " + std::to_string(st.mean.size()) + " channels, stack has " +
                      std::to_string(stack.num_channels()));
  }
  GridStack out = stack;
  const std::size_t plane = stack.cells();
  for (std::size_t c = 0; c < stack.num_channels(); ++c) {
    const double scale = st.stddev[c] > kMinSpread ? 1.0 / st.stddev[c] : 1.0;
    float* v = out.values.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (out.valid[i]) v[i] = static_cast<float>((v[i] - st.mean[c]) * scale);
    }
  }
  return {std::move(out), std::move(st)};
}

}  // namespace rainseg
