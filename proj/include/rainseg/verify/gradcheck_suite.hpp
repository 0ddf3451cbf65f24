#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rainseg {

struct GradCheckItem {
  std::string name;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;  // probes straddling a kink
  bool passed = false;
};

/// Finite-difference verification of every differentiable op, both losses,
/// their combination and a reduced attention U-Net ([4,8,16,32] features),
/// all in f64. Thresholds: 1e-4, or 1e-3 for batchnorm and the full network.
/// Network probes that straddle a relu or max-pool kink are skipped; an item
/// fails if more than a tenth of its probes are skipped.
std::vector<GradCheckItem> run_gradcheck_suite(std::uint64_t seed);

}  // namespace rainseg
