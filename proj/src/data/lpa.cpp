#include "rainseg/data/lpa.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "rainseg/core/error.hpp"

namespace rainseg {

const std::vector<std::string>& class_names() {
  static const std::vector<std::string> names{"Scarcity", "Deficit", "Normal", "Excess", "Large Excess"};
  return names;
}

LpaScheme LpaScheme::from_bounds(std::string region, double lpa_mm, const std::vector<double>& upper_bounds) {
  LpaScheme s;
  s.region = std::move(region);
  s.lpa_mm = lpa_mm;
  double lower = 0.0;
  for (std::size_t k = 0; k <= upper_bounds.size(); ++k) {
    ClassInterval c;
    c.lower_mm = lower;
    if (k < upper_bounds.size()) c.upper_mm = upper_bounds[k];
    c.id = static_cast<std::uint8_t>(k);
    c.name = k < class_names().size() ? class_names()[k] : "Class " + std::to_string(k);
    if (c.upper_mm) lower = *c.upper_mm;
    s.classes.push_back(std::move(c));
  }
  s.validate();
  return s;
}

void LpaScheme::validate() const {
  if (classes.size() < 2 || classes.size() > 254) {
    throw ConfigError("scheme '" + region + "' needs between 2 and 254 classes, has " + std::to_string(classes.size()));
  }
  if (classes.front().lower_mm != 0.0) throw ConfigError("scheme '" + region + "' must start at 0 mm");
  for (std::size_t k = 0; k < classes.size(); ++k) {
    const auto& c = classes[k];
    if (c.id != k) throw ConfigError("scheme '" + region + "' class ids must be 0..K-1 in order");
    const bool last = k + 1 == classes.size();
    if (last != !c.upper_mm.has_value()) {
      throw ConfigError("scheme '" + region + "': only the last class is open-ended");
    }
    if (!last) {
      if (!(*c.upper_mm > c.lower_mm) || !std::isfinite(*c.upper_mm)) {
        throw ConfigError("scheme '" + region + "': empty interval for class " + c.name);
      }
      if (classes[k + 1].lower_mm != *c.upper_mm) {
        throw ConfigError("scheme '" + region + "': intervals must be contiguous at class " + c.name);
      }
    }
  }
}

std::uint8_t LpaScheme::classify(double mm) const {
  if (!std::isfinite(mm) || mm < 0.0) {
    throw ConfigError("rainfall must be finite and non-negative, got " + std::to_string(mm));
  }
  for (const auto& c : classes) {
    if (!c.upper_mm || mm < *c.upper_mm) return c.id;
  }
  return classes.back().id;
}

const std::vector<LpaScheme>& builtin_schemes() {
  static const std::vector<LpaScheme> schemes{
      LpaScheme::from_bounds("Assam", 328.6, {131, 263, 395, 527}),
      LpaScheme::from_bounds("Bihar", 216.5, {87, 173, 260, 346}),
      LpaScheme::from_bounds("Himachal Pradesh", 120.5, {48, 96, 145, 192.8}),
      LpaScheme::from_bounds("Karnataka", 271.8, {109, 217, 326, 435}),
      LpaScheme::from_bounds("Kerala", 144.1, {58, 115, 173, 231}),
  };
  return schemes;
}

namespace {
std::string fold(std::string_view s) {
  std::string out;
  for (char ch : s) out.push_back(ch == '_' ? ' ' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  return out;
}
}  // namespace

const LpaScheme& builtin_scheme(std::string_view region) {
  const auto key = fold(region);
  for (const auto& s : builtin_schemes()) {
    if (fold(s.region) == key) return s;
  }
  throw ConfigError("unknown region '" + std::string(region) +
                    "' (known: Assam, Bihar, Himachal Pradesh, Karnataka, Kerala)");
}

LabelGrid quantize_precip(const RasterGrid& rain, const LpaScheme& scheme) {
  scheme.validate();
  if (rain.channels != 1) throw ConfigError("rainfall grid must have one channel, has " + std::to_string(rain.channels));
  LabelGrid out;
  out.height = rain.height;
  out.width = rain.width;
  out.num_classes = scheme.num_classes();
  out.labels.assign(rain.cells(), 255);
  for (std::size_t i = 0; i < rain.cells(); ++i) {
    if (rain.valid[i]) out.labels[i] = scheme.classify(rain.values[i]);
  }
  return out;
}

}  // namespace rainseg
