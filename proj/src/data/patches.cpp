#include "rainseg/data/patches.hpp"

#include <algorithm>

#include "rainseg/core/error.hpp"
#include "rainseg/kernels/parallel.hpp"

namespace rainseg {

std::size_t PatchSet::valid_cells(std::size_t patch) const {
  const auto* v = valid.data() + patch * cells_per_patch();
  return static_cast<std::size_t>(std::count(v, v + cells_per_patch(), std::uint8_t{1}));
}

PatchDataset PatchSet::dataset(std::span<const std::size_t> indices) const {
  PatchDataset d;
  d.channels = channels;
  d.patch_size = patch_size;
  const std::size_t zz = cells_per_patch();
  d.inputs.reserve(indices.size() * channels * zz);
  d.labels.reserve(indices.size() * zz);
  d.mask.reserve(indices.size() * zz);
  for (const auto p : indices) {
    if (p >= size()) throw ConfigError("patch index " + std::to_string(p) + " out of range");
    d.inputs.insert(d.inputs.end(), inputs.begin() + static_cast<std::ptrdiff_t>(p * channels * zz),
                    inputs.begin() + static_cast<std::ptrdiff_t>((p + 1) * channels * zz));
    d.labels.insert(d.labels.end(), labels.begin() + static_cast<std::ptrdiff_t>(p * zz),
                    labels.begin() + static_cast<std::ptrdiff_t>((p + 1) * zz));
    d.mask.insert(d.mask.end(), valid.begin() + static_cast<std::ptrdiff_t>(p * zz),
                  valid.begin() + static_cast<std::ptrdiff_t>((p + 1) * zz));
  }
  return d;
}

PatchSet tile_patches(const GridStack& stack, const LabelGrid& labels, std::size_t z) {
  if (z == 0 || z % 8 != 0) throw ConfigError("patch size must be a positive multiple of 8, got " + std::to_string(z));
  if (stack.height != labels.height || stack.width != labels.width) {
    throw ConfigError("stack is " + std::to_string(stack.height) + "x" + std::to_string(stack.width) +
                      " but labels are " + std::to_string(labels.height) + "x" + std::to_string(labels.width));
  }
  if (z > stack.height || z > stack.width) {
    throw ConfigError("patch size " + std::to_string(z) + " exceeds the " + std::to_string(stack.height) + "x" +
                      std::to_string(stack.width) + " grid");
  }
  PatchSet ps;
  ps.patch_size = z;
  ps.channels = stack.num_channels();
  ps.height = stack.height;
  ps.width = stack.width;
  ps.num_classes = labels.num_classes;
  ps.patch_rows = (stack.height + z - 1) / z;
  ps.patch_cols = (stack.width + z - 1) / z;
  const std::size_t count = ps.patch_rows * ps.patch_cols;
  const std::size_t zz = z * z;
  const std::size_t C = ps.channels;
  ps.origins.resize(count);
  ps.inputs.assign(count * C * zz, 0.0f);
  ps.labels.assign(count * zz, 255);
  ps.valid.assign(count * zz, 0);
  const std::size_t plane = stack.cells();

  RAINSEG_PARFOR
  for (std::ptrdiff_t pi = 0; pi < static_cast<std::ptrdiff_t>(count); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    const PatchOrigin o{(p / ps.patch_cols) * z, (p % ps.patch_cols) * z};
    ps.origins[p] = o;
    for (std::size_t r = 0; r < z; ++r) {
      const std::size_t gr = o.row + r;
      if (gr >= stack.height) break;
      for (std::size_t c = 0; c < z; ++c) {
        const std::size_t gc = o.col + c;
        if (gc >= stack.width) break;
        const std::size_t g = gr * stack.width + gc;
        const std::size_t l = r * z + c;
        if (!stack.valid[g]) continue;
        for (std::size_t ch = 0; ch < C; ++ch) ps.inputs[(p * C + ch) * zz + l] = stack.values[ch * plane + g];
        const std::uint8_t label = labels.labels[g];
        if (label == 255) continue;
        ps.labels[p * zz + l] = label;
        ps.valid[p * zz + l] = 1;
      }
    }
  }
  return ps;
}

LabelGrid untile(const PatchSet& patches, std::span<const std::uint8_t> predictions) {
  const std::size_t zz = patches.cells_per_patch();
  if (predictions.size() != patches.size() * zz) {
    throw ConfigError("expected " + std::to_string(patches.size() * zz) + " predicted cells, got " +
                      std::to_string(predictions.size()));
  }
  LabelGrid out;
  out.height = patches.height;
  out.width = patches.width;
  out.num_classes = patches.num_classes;
  out.labels.assign(out.height * out.width, 255);
  const std::size_t z = patches.patch_size;
  for (std::size_t p = 0; p < patches.size(); ++p) {
    const auto o = patches.origins[p];
    for (std::size_t r = 0; r < z && o.row + r < out.height; ++r) {
      for (std::size_t c = 0; c < z && o.col + c < out.width; ++c) {
        const std::size_t l = p * zz + r * z + c;
        if (!patches.valid[l]) continue;
        const auto v = predictions[l];
        if (v != 255 && v >= out.num_classes) {
          throw ConfigError("predicted class " + std::to_string(v) + " outside 0.." +
                            std::to_string(out.num_classes - 1));
        }
        out.labels[(o.row + r) * out.width + o.col + c] = v;
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> patch_coverage(const PatchSet& patches, std::span<const std::size_t> indices) {
  std::vector<std::uint8_t> mask(patches.height * patches.width, 0);
  const std::size_t z = patches.patch_size;
  for (const std::size_t p : indices) {
    if (p >= patches.size()) throw ConfigError("patch index " + std::to_string(p) + " out of range");
    const auto& o = patches.origins[p];
    for (std::size_t r = o.row; r < std::min(o.row + z, patches.height); ++r) {
      for (std::size_t c = o.col; c < std::min(o.col + z, patches.width); ++c) mask[r * patches.width + c] = 1;
    }
  }
  return mask;
}

}  // namespace rainseg
