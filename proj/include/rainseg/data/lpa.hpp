#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rainseg/data/raster.hpp"

namespace rainseg {

struct ClassInterval {
  double lower_mm = 0.0;
  std::optional<double> upper_mm;  // exclusive; empty for the open-ended top class
  std::uint8_t id = 0;
  std::string name;
};

/// Rainfall categories of one region as contiguous half-open intervals.
struct LpaScheme {
  std::string region;
  double lpa_mm = 0.0;
  std::vector<ClassInterval> classes;

  // Builds contiguous intervals [b_k, b_{k+1}) from the lower bounds of
  // classes 1..K-1; class 0 starts at 0 and the last class is open-ended.
  static LpaScheme from_bounds(std::string region, double lpa_mm, const std::vector<double>& upper_bounds);

  std::size_t num_classes() const noexcept { return classes.size(); }
  void validate() const;
  // Throws ConfigError for negative or non-finite rainfall.
  std::uint8_t classify(double mm) const;
};

const std::vector<std::string>& class_names();
const std::vector<LpaScheme>& builtin_schemes();
// Case-insensitive lookup; spaces and underscores are interchangeable.
const LpaScheme& builtin_scheme(std::string_view region);

LabelGrid quantize_precip(const RasterGrid& rain, const LpaScheme& scheme);

}  // namespace rainseg
