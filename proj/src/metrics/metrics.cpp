#include "rainseg/metrics/metrics.hpp"

#include <array>
#include <cstdio>
#include <sstream>

#include "rainseg/core/error.hpp"

namespace rainseg {

void ConfusionMatrix::add(std::uint8_t truth, std::uint8_t pred) {
  if (truth >= num_classes || pred >= num_classes) {
    throw ConfigError("class id " + std::to_string(std::max(truth, pred)) + " outside 0.." +
                      std::to_string(num_classes - 1));
  }
  ++counts[truth * num_classes + pred];
  ++total;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes != num_classes) throw ConfigError("cannot merge confusion matrices of different size");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  total += other.total;
  return *this;
}

ConfusionMatrix confusion(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> truth,
                          std::span<const std::uint8_t> mask, std::size_t num_classes) {
  if (pred.size() != truth.size() || (!mask.empty() && mask.size() != truth.size())) {
    throw ConfigError("prediction, truth and mask sizes differ");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 255 || pred[i] == 255 || (!mask.empty() && !mask[i])) continue;
    cm.add(truth[i], pred[i]);
  }
  if (cm.total == 0) throw NumericError("no valid cells");
  return cm;
}

ConfusionMatrix confusion(const LabelGrid& pred, const LabelGrid& truth) {
  if (pred.height != truth.height || pred.width != truth.width) {
    throw ConfigError("prediction is " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                      ", truth is " + std::to_string(truth.height) + "x" + std::to_string(truth.width));
  }
  if (pred.num_classes != truth.num_classes) throw ConfigError("prediction and truth disagree on the class count");
  return confusion(pred.labels, truth.labels, {}, truth.num_classes);
}

Scores scores(const ConfusionMatrix& cm) {
  if (cm.total == 0) throw NumericError("no valid cells");
  const std::size_t K = cm.num_classes;
  Scores s;
  s.total = cm.total;
  s.per_class.resize(K);
  std::uint64_t trace = 0;
  std::size_t active = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::uint64_t row = 0, col = 0;
    for (std::size_t j = 0; j < K; ++j) {
      row += cm.at(k, j);
      col += cm.at(j, k);
    }
    const double tp = static_cast<double>(cm.at(k, k));
    trace += cm.at(k, k);
    auto& c = s.per_class[k];
    c.support = row;
    c.absent = row == 0;
    c.precision = col > 0 ? tp / static_cast<double>(col) : 0.0;
    c.recall = row > 0 ? tp / static_cast<double>(row) : 0.0;
    c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    if (row > 0 || col > 0) {
      ++active;
      s.macro_precision += c.precision;
      s.macro_recall += c.recall;
      s.macro_f1 += c.f1;
    }
    s.weighted_f1 += c.f1 * static_cast<double>(row);
  }
  s.accuracy = static_cast<double>(trace) / static_cast<double>(cm.total);
  s.weighted_f1 /= static_cast<double>(cm.total);
  s.macro_precision /= static_cast<double>(active);
  s.macro_recall /= static_cast<double>(active);
  s.macro_f1 /= static_cast<double>(active);
  return s;
}

std::string metrics_csv(const Scores& s, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::string(buf);
  };
  os << "class,name,precision,recall,f1,support\n";
  for (std::size_t k = 0; k < s.per_class.size(); ++k) {
    const auto& c = s.per_class[k];
    const std::string name = k < class_names.size() ? class_names[k] : "class" + std::to_string(k);
    os << k << ',' << name << ',' << num(c.precision) << ',' << num(c.recall) << ',';
    os << (c.absent ? std::string("--") : num(c.f1)) << ',' << c.support << '\n';
  }
  os << "macro,,"
     << num(s.macro_precision) << ',' << num(s.macro_recall) << ',' << num(s.macro_f1) << ',' << s.total << '\n';
  os << "weighted,,,," << num(s.weighted_f1) << ',' << s.total << '\n';
  os << "accuracy,,,," << num(s.accuracy) << ',' << s.total << '\n';
  return os.str();
}

std::vector<std::uint8_t> render_classmap(const LabelGrid& labels) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 5> palette{{
      {0xD7, 0x30, 0x27}, {0xFC, 0x8D, 0x59}, {0xFE, 0xE0, 0x8B}, {0x91, 0xBF, 0xDB}, {0x45, 0x75, 0xB4}}};
  if (labels.labels.size() != labels.height * labels.width) throw ConfigError("label buffer does not match its extents");
  const std::string header =
      "P6\n" + std::to_string(labels.width) + " " + std::to_string(labels.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + labels.labels.size() * 3);
  for (const auto v : labels.labels) {
    if (v == 255) {
      out.insert(out.end(), {0xFF, 0xFF, 0xFF});
      continue;
    }
    if (v >= labels.num_classes || v >= palette.size()) {
      throw ConfigError("cannot render class " + std::to_string(v) + " (grid has " +
                        std::to_string(labels.num_classes) + " classes, palette has 5)");
    }
    out.insert(out.end(), palette[v].begin(), palette[v].end());
  }
  return out;
}

}  // namespace rainseg
