#include "rainseg/data/raster.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "rainseg/core/binary_io.hpp"
#include "rainseg/core/error.hpp"

namespace rainseg {

namespace {
constexpr std::uint16_t kGridVersion = 1;
constexpr std::uint16_t kLabelVersion = 1;
constexpr std::uint8_t kInvalid = 255;
}  // namespace

RasterGrid RasterGrid::filled(std::size_t height, std::size_t width, std::size_t channels, float value) {
  RasterGrid g;
  g.height = height;
  g.width = width;
  g.channels = channels;
  g.values.assign(height * width * channels, value);
  g.valid.assign(height * width, 1);
  return g;
}

void RasterGrid::invalidate(std::size_t r, std::size_t col) {
  valid[r * width + col] = 0;
  for (std::size_t c = 0; c < channels; ++c) at(c, r, col) = 0.0f;
}

void RasterGrid::validate() const {
  if (height == 0 || width == 0 || channels == 0) {
    throw ConfigError("raster extents must be non-zero, got " + std::to_string(height) + "x" +
                      std::to_string(width) + "x" + std::to_string(channels));
  }
  if (values.size() != height * width * channels || valid.size() != height * width) {
    throw ConfigError("raster buffers do not match its extents");
  }
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t i = 0; i < height * width; ++i) {
      if (valid[i] && !std::isfinite(values[c * height * width + i])) {
        throw ConfigError("raster holds a non-finite value at a valid cell (channel " + std::to_string(c) + ")");
      }
    }
  }
}

void LabelGrid::validate() const {
  if (height == 0 || width == 0) throw ConfigError("label grid extents must be non-zero");
  if (labels.size() != height * width) throw ConfigError("label buffer does not match its extents");
  for (const auto v : labels) {
    if (v != kInvalid && v >= num_classes) {
      throw ConfigError("label " + std::to_string(v) + " outside 0.." + std::to_string(num_classes - 1));
    }
  }
}

bool operator==(const RasterGrid& a, const RasterGrid& b) {
  return a.height == b.height && a.width == b.width && a.channels == b.channels && a.valid == b.valid &&
         a.values.size() == b.values.size() &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

bool operator==(const LabelGrid& a, const LabelGrid& b) {
  return a.height == b.height && a.width == b.width && a.num_classes == b.num_classes && a.labels == b.labels;
}

std::vector<std::uint8_t> encode_grid(const RasterGrid& grid) {
  grid.validate();
  io::Writer w;
  w.text("MGRD");
  w.u16(kGridVersion);
  w.u32(static_cast<std::uint32_t>(grid.height));
  w.u32(static_cast<std::uint32_t>(grid.width));
  w.u32(static_cast<std::uint32_t>(grid.channels));
  w.u8(0);
  const float nodata = std::numeric_limits<float>::quiet_NaN();
  const std::size_t plane = grid.cells();
  for (std::size_t c = 0; c < grid.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) w.f32(grid.valid[i] ? grid.values[c * plane + i] : nodata);
  }
  return w.take();
}

RasterGrid decode_grid(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes, "MGRID");
  if (r.text(4, "magic") != "MGRD") throw FormatError("MGRID: bad magic, expected MGRD", 0);
  const auto version = r.u16("version");
  if (version != kGridVersion) throw FormatError("MGRID: unsupported version " + std::to_string(version), 4);
  RasterGrid g;
  g.height = r.u32("height");
  g.width = r.u32("width");
  g.channels = r.u32("channels");
  if (g.height == 0 || g.width == 0 || g.channels == 0) {
    throw FormatError("MGRID: zero extent in header (" + std::to_string(g.height) + "x" + std::to_string(g.width) +
                          "x" + std::to_string(g.channels) + ")",
                      6);
  }
  const auto dtype = r.u8("dtype");
  if (dtype != 0) throw FormatError("MGRID: unsupported dtype " + std::to_string(dtype), 18);
  const std::size_t plane = g.cells();
  const std::size_t expected = plane * g.channels * 4;
  if (r.remaining() != expected) {
    throw FormatError("MGRID: payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(expected),
                      r.pos());
  }
  g.values.resize(plane * g.channels);
  for (auto& v : g.values) v = r.f32("payload");
  g.valid.assign(plane, 1);
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      if (std::isnan(g.values[c * plane + i])) g.valid[i] = 0;
    }
  }
  for (std::size_t i = 0; i < plane; ++i) {
    if (!g.valid[i]) {
      for (std::size_t c = 0; c < g.channels; ++c) g.values[c * plane + i] = 0.0f;
    }
  }
  g.validate();
  return g;
}

RasterGrid read_grid(const std::filesystem::path& path) { return decode_grid(io::read_file(path)); }
void write_grid(const RasterGrid& grid, const std::filesystem::path& path) { io::write_file(path, encode_grid(grid)); }

std::vector<std::uint8_t> encode_labels(const LabelGrid& labels) {
  labels.validate();
  io::Writer w;
  w.text("MLBL");
  w.u16(kLabelVersion);
  w.u32(static_cast<std::uint32_t>(labels.height));
  w.u32(static_cast<std::uint32_t>(labels.width));
  w.u8(static_cast<std::uint8_t>(labels.num_classes));
  w.bytes(labels.labels.data(), labels.labels.size());
  return w.take();
}

LabelGrid decode_labels(const std::vector<std::uint8_t>& bytes) {
  io::Reader r(bytes, "MLBL");
  if (r.text(4, "magic") != "MLBL") throw FormatError("MLBL: bad magic, expected MLBL", 0);
  const auto version = r.u16("version");
  if (version != kLabelVersion) throw FormatError("MLBL: unsupported version " + std::to_string(version), 4);
  LabelGrid g;
  g.height = r.u32("height");
  g.width = r.u32("width");
  g.num_classes = r.u8("class count");
  if (g.height == 0 || g.width == 0) throw FormatError("MLBL: zero extent in header", 6);
  if (r.remaining() != g.height * g.width) {
    throw FormatError("MLBL: payload holds " + std::to_string(r.remaining()) + " bytes, expected " +
                          std::to_string(g.height * g.width),
                      r.pos());
  }
  g.labels.resize(g.height * g.width);
  for (auto& v : g.labels) v = r.u8("payload");
  g.validate();
  return g;
}

LabelGrid read_labels(const std::filesystem::path& path) { return decode_labels(io::read_file(path)); }
void write_labels(const LabelGrid& labels, const std::filesystem::path& path) {
  io::write_file(path, encode_labels(labels));
}

}  // namespace rainseg
