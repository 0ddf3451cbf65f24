#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rainseg/data/lpa.hpp"
#include "rainseg/data/raster.hpp"
#include "rainseg/data/stack.hpp"

namespace rainseg {

struct ManifestChannel {
  std::string modality;
  std::size_t month = 0;
  std::string path;  // relative to the manifest directory
};

/// Dataset description stored as JSON next to the grids it names.
struct Manifest {
  LpaScheme scheme;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<ManifestChannel> channels;
  std::string rain;     // MGRID rainfall in mm
  std::string labels;   // optional MLBL target
  std::optional<ChannelStats> normalization;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
  std::vector<ChannelInfo> channel_table() const;
};

std::string manifest_json(const Manifest& manifest);
Manifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Reads every channel grid and stacks them in manifest order.
GridStack load_stack(const Manifest& manifest);
// The manifest's label file when present, otherwise the quantized rainfall.
LabelGrid load_labels(const Manifest& manifest);

}  // namespace rainseg
