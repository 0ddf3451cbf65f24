#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rainseg/data/patches.hpp"

namespace rainseg {

enum class Split : std::uint8_t { train = 0, val = 1, test = 2, unassigned = 3 };

const char* split_name(Split s);
Split parse_split(const std::string& name);

struct SplitAssignment {
  std::vector<Split> assignment;                          // per patch
  std::vector<std::int32_t> bucket;                       // majority class per patch, -1 if unassignable
  std::array<std::vector<std::size_t>, 3> class_cells;    // per split: valid cells per class
  std::array<std::vector<std::size_t>, 3> bucket_patches; // per split: patches per majority class

  std::vector<std::size_t> indices(Split s) const;
  std::size_t count(Split s) const;
};

/// Stratified patch assignment.
///
/// Patches with at least one valid cell are bucketed by their majority class
/// (ties to the lowest id). Split totals are the largest-remainder rounding of
/// fractions * assignable count. Each bucket gets floor(n_b * f_s) patches per
/// split plus one extra for some splits, chosen so bucket sizes and split
/// totals both come out exact; extras go preferentially to the cells with the
/// largest fractional remainder, then to the lowest split index, then to the
/// lowest bucket. Largest-remainder ties also go to the lowest split index, so
/// 10 patches at 70/15/15 yield 7/2/1. Inside a bucket, patches are shuffled
/// with derive_seed(seed, bucket) and dealt train, then val, then test.
SplitAssignment stratified_split(const PatchSet& patches, std::array<double, 3> fractions, std::uint64_t seed);

// Largest-remainder rounding of total * fractions; ties to the lower index.
std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& fractions);

// CSV with header patch_row,patch_col,split (patch grid coordinates).
std::string split_csv(const PatchSet& patches, const SplitAssignment& split);
SplitAssignment parse_split_csv(const std::string& text, const PatchSet& patches);

}  // namespace rainseg
