#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace rainseg {

/// Gridded values [channel][row][col] with one validity flag per cell shared by
/// all channels. Invalid cells hold 0 in memory and NaN on disk.
struct RasterGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<float> values;
  std::vector<std::uint8_t> valid;

  static RasterGrid filled(std::size_t height, std::size_t width, std::size_t channels, float value);

  std::size_t cells() const noexcept { return height * width; }
  float& at(std::size_t c, std::size_t r, std::size_t col) { return values[(c * height + r) * width + col]; }
  float at(std::size_t c, std::size_t r, std::size_t col) const { return values[(c * height + r) * width + col]; }
  bool is_valid(std::size_t r, std::size_t col) const { return valid[r * width + col] != 0; }
  // Marks a cell invalid and zeroes its values.
  void invalidate(std::size_t r, std::size_t col);
  // Throws ConfigError when extents are zero, sizes disagree, or a valid value is not finite.
  void validate() const;
};

/// Class id per cell; 255 marks invalid or padded cells.
struct LabelGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(std::size_t r, std::size_t c) const { return labels[r * width + c]; }
  void validate() const;
};

bool operator==(const RasterGrid& a, const RasterGrid& b);
bool operator==(const LabelGrid& a, const LabelGrid& b);

// MGRID: "MGRD", u16 version 1, u32 H, u32 W, u32 C, u8 dtype 0 (f32), then
// C*H*W little-endian f32 in [c][h][w] order; NaN encodes nodata.
std::vector<std::uint8_t> encode_grid(const RasterGrid& grid);
RasterGrid decode_grid(const std::vector<std::uint8_t>& bytes);
RasterGrid read_grid(const std::filesystem::path& path);
void write_grid(const RasterGrid& grid, const std::filesystem::path& path);

// MLBL: "MLBL", u16 version 1, u32 H, u32 W, u8 K, then H*W class bytes.
std::vector<std::uint8_t> encode_labels(const LabelGrid& labels);
LabelGrid decode_labels(const std::vector<std::uint8_t>& bytes);
LabelGrid read_labels(const std::filesystem::path& path);
void write_labels(const LabelGrid& labels, const std::filesystem::path& path);

}  // namespace rainseg
