#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rainseg/data/raster.hpp"

namespace rainseg {

/// K x K counts, rows = ground truth, columns = prediction.
struct ConfusionMatrix {
  std::size_t num_classes = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t total = 0;

  explicit ConfusionMatrix(std::size_t k = 0) : num_classes(k), counts(k * k, 0) {}

  std::uint64_t at(std::size_t truth, std::size_t pred) const { return counts[truth * num_classes + pred]; }
  void add(std::uint8_t truth, std::uint8_t pred);
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

// Counts cells valid in both grids (label != 255). Throws ConfigError on an
// extent or class-count mismatch and NumericError when no cell is valid.
ConfusionMatrix confusion(const LabelGrid& pred, const LabelGrid& truth);
// Same over flat label arrays; `mask` may be empty.
ConfusionMatrix confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth,
                          std::span<const std::uint8_t> mask, std::size_t num_classes);

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;  // ground-truth cells
  bool absent = false;        // zero support
};

/// Per-class and summary scores. Precision, recall and F1 are 0 when their
/// denominator is 0. Macro averages run over classes that occur in the truth
/// or the prediction; weighted F1 weights by ground-truth support.
struct Scores {
  std::vector<ClassScore> per_class;
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::uint64_t total = 0;
};

Scores scores(const ConfusionMatrix& cm);

// class,name,precision,recall,f1,support rows followed by summary rows.
std::string metrics_csv(const Scores& s, const std::vector<std::string>& class_names);

// Binary PPM (P6). Palette: D73027, FC8D59, FEE08B, 91BFDB, 4575B4; 255 is white.
std::vector<std::uint8_t> render_classmap(const LabelGrid& labels);

}  // namespace rainseg
