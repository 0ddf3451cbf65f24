#include "rainseg/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rainseg/core/error.hpp"
#include "rainseg/tensor/ops.hpp"

namespace rainseg {

void LossConfig::validate() const {
  if (!(gamma >= 0.0f)) throw ConfigError("focal gamma must be >= 0");
  if (!(alpha >= 0.0f)) throw ConfigError("focal alpha must be >= 0");
  if (!(epsilon > 0.0f)) throw ConfigError("dice epsilon must be > 0");
  if (!(lambda_fl >= 0.0f) || !(lambda_dice >= 0.0f)) throw ConfigError("loss weights must be >= 0");
  if (lambda_fl == 0.0f && lambda_dice == 0.0f) throw ConfigError("loss weights cannot both be 0");
}

namespace {

struct Layout {
  std::size_t n, k, plane;
};

template <typename T>
Layout check_inputs(const BasicTensor<T>& probs, const LossTargets& targets, const char* op) {
  if (probs.rank() != 4) throw ShapeError(std::string(op) + " expects [N,K,z,z] probabilities, got " + to_string(probs.shape()));
  const Layout l{probs.dim(0), probs.dim(1), probs.dim(2) * probs.dim(3)};
  if (targets.labels.size() != l.n * l.plane) {
    throw ShapeError(std::string(op) + ": " + std::to_string(targets.labels.size()) + " labels for probabilities " +
                     to_string(probs.shape()));
  }
  if (!targets.mask.empty() && targets.mask.size() != targets.labels.size()) {
    throw ShapeError(std::string(op) + ": mask length " + std::to_string(targets.mask.size()) + " vs " +
                     std::to_string(targets.labels.size()) + " labels");
  }
  std::size_t valid = 0;
  for (std::size_t i = 0; i < targets.labels.size(); ++i) {
    const bool ok = targets.mask.empty() || targets.mask[i] != 0;
    const std::uint8_t y = targets.labels[i];
    if (!ok || y == kInvalidLabel) continue;
    if (y >= l.k) {
      throw ConfigError(std::string(op) + ": label " + std::to_string(y) + " outside 0.." + std::to_string(l.k - 1));
    }
    ++valid;
  }
  if (valid == 0) throw NumericError(std::string(op) + ": no valid cells in batch");
  return l;
}

inline bool is_valid(const LossTargets& t, std::size_t i) {
  return (t.mask.empty() || t.mask[i] != 0) && t.labels[i] != kInvalidLabel;
}

}  // namespace

template <typename T>
BasicTensor<T> focal_loss(BasicTape<T>& tape, const BasicTensor<T>& probs, const LossTargets& targets,
                          const LossConfig& config) {
  config.validate();
  const Layout l = check_inputs(probs, targets, "focal_loss");
  const double alpha = config.alpha;
  const double gamma = config.gamma;
  const double lo = kProbFloor;
  const double hi = 1.0 - kProbFloor;
  const auto pv = probs.data();

  std::vector<std::uint8_t> labels(targets.labels.begin(), targets.labels.end());
  std::vector<std::uint8_t> valid(labels.size());
  std::size_t count = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    valid[i] = is_valid(targets, i) ? 1 : 0;
    count += valid[i];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < l.n; ++b) {
    for (std::size_t p = 0; p < l.plane; ++p) {
      const std::size_t cell = b * l.plane + p;
      if (!valid[cell]) continue;
      const double q = std::clamp(static_cast<double>(pv[(b * l.k + labels[cell]) * l.plane + p]), lo, hi);
      total += alpha * std::pow(1.0 - q, gamma) * -std::log(q);
    }
  }
  const double mean = total / static_cast<double>(count);
  BasicTensor<T> out(Shape{}, {static_cast<T>(mean)});
  require_finite(out, "focal_loss");
  return tape.record(
      OpKind::focal_loss, {&probs}, std::move(out),
      [probs, l, alpha, gamma, lo, hi, count, labels = std::move(labels), valid = std::move(valid)](
          BasicTape<T>& t, std::span<const T> g) {
        auto slot = t.grad_slot(probs);
        const auto pv = probs.data();
        const double scale = static_cast<double>(g[0]) / static_cast<double>(count);
        for (std::size_t b = 0; b < l.n; ++b) {
          for (std::size_t p = 0; p < l.plane; ++p) {
            const std::size_t cell = b * l.plane + p;
            if (!valid[cell]) continue;
            const std::size_t idx = (b * l.k + labels[cell]) * l.plane + p;
            const double raw = pv[idx];
            if (raw < lo || raw > hi) continue;  // clamped: flat
            const double q = raw;
            // d/dq [(1-q)^g * -log q] = g (1-q)^(g-1) log q - (1-q)^g / q
            double d = -std::pow(1.0 - q, gamma) / q;
            if (gamma != 0.0) d += gamma * std::pow(1.0 - q, gamma - 1.0) * std::log(q);
            slot[idx] += static_cast<T>(scale * alpha * d);
          }
        }
      });
}

template <typename T>
BasicTensor<T> dice_loss(BasicTape<T>& tape, const BasicTensor<T>& probs, const LossTargets& targets,
                         const LossConfig& config) {
  config.validate();
  const Layout l = check_inputs(probs, targets, "dice_loss");
  const double eps = config.epsilon;
  const auto pv = probs.data();
  std::vector<double> inter(l.k, 0.0);
  std::vector<double> pred(l.k, 0.0);
  std::vector<double> truth(l.k, 0.0);
  std::vector<std::uint8_t> valid(targets.labels.size());
  for (std::size_t b = 0; b < l.n; ++b) {
    for (std::size_t p = 0; p < l.plane; ++p) {
      const std::size_t cell = b * l.plane + p;
      if (!is_valid(targets, cell)) continue;
      valid[cell] = 1;
      const std::uint8_t y = targets.labels[cell];
      truth[y] += 1.0;
      for (std::size_t c = 0; c < l.k; ++c) {
        const double q = pv[(b * l.k + c) * l.plane + p];
        pred[c] += q;
        if (c == y) inter[c] += q;
      }
    }
  }
  std::vector<std::uint8_t> active(l.k, 0);
  std::size_t n_active = 0;
  double dice_sum = 0.0;
  for (std::size_t c = 0; c < l.k; ++c) {
    if (truth[c] > 0.0 || pred[c] > kDiceMassFloor) {
      active[c] = 1;
      ++n_active;
      dice_sum += (2.0 * inter[c] + eps) / (pred[c] + truth[c] + eps);
    }
  }
  const double loss = n_active ? 1.0 - dice_sum / static_cast<double>(n_active) : 0.0;
  BasicTensor<T> out(Shape{}, {static_cast<T>(loss)});
  require_finite(out, "dice_loss");

  std::vector<std::uint8_t> labels(targets.labels.begin(), targets.labels.end());
  return tape.record(
      OpKind::dice_loss, {&probs}, std::move(out),
      [probs, l, eps, n_active, inter = std::move(inter), pred = std::move(pred), truth = std::move(truth),
       active = std::move(active), labels = std::move(labels),
       valid = std::move(valid)](BasicTape<T>& t, std::span<const T> g) {
        if (n_active == 0) return;
        auto slot = t.grad_slot(probs);
        const double scale = -static_cast<double>(g[0]) / static_cast<double>(n_active);
        // dDice_c/dp = (2 y (P + G + eps) - (2 I + eps)) / (P + G + eps)^2
        std::vector<double> on(l.k, 0.0);
        std::vector<double> off(l.k, 0.0);
        for (std::size_t c = 0; c < l.k; ++c) {
          if (!active[c]) continue;
          const double den = pred[c] + truth[c] + eps;
          const double num = 2.0 * inter[c] + eps;
          on[c] = (2.0 * den - num) / (den * den);
          off[c] = -num / (den * den);
        }
        for (std::size_t b = 0; b < l.n; ++b) {
          for (std::size_t p = 0; p < l.plane; ++p) {
            const std::size_t cell = b * l.plane + p;
            if (!valid[cell]) continue;
            for (std::size_t c = 0; c < l.k; ++c) {
              if (!active[c]) continue;
              const double d = (labels[cell] == c) ? on[c] : off[c];
              slot[(b * l.k + c) * l.plane + p] += static_cast<T>(scale * d);
            }
          }
        }
      });
}

template <typename T>
CombinedLoss<T> combined_loss(BasicTape<T>& tape, const BasicTensor<T>& probs, const LossTargets& targets,
                              const LossConfig& config) {
  auto fl = focal_loss(tape, probs, targets, config);
  auto dl = dice_loss(tape, probs, targets, config);
  CombinedLoss<T> out;
  out.focal = static_cast<double>(fl.item());
  out.dice = static_cast<double>(dl.item());
  out.total = add(tape, mul_scalar(tape, fl, static_cast<T>(config.lambda_fl)),
                  mul_scalar(tape, dl, static_cast<T>(config.lambda_dice)));
  return out;
}

#define RAINSEG_INSTANTIATE_LOSSES(T)                                                                        \
  template BasicTensor<T> focal_loss<T>(BasicTape<T>&, const BasicTensor<T>&, const LossTargets&,            \
                                        const LossConfig&);                                                  \
  template BasicTensor<T> dice_loss<T>(BasicTape<T>&, const BasicTensor<T>&, const LossTargets&,             \
                                       const LossConfig&);                                                   \
  template CombinedLoss<T> combined_loss<T>(BasicTape<T>&, const BasicTensor<T>&, const LossTargets&,        \
                                            const LossConfig&);

RAINSEG_INSTANTIATE_LOSSES(float)
RAINSEG_INSTANTIATE_LOSSES(double)

}  // namespace rainseg
