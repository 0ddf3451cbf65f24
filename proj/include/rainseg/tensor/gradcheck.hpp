#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rainseg/tensor/tape.hpp"
#include "rainseg/tensor/tensor.hpp"

namespace rainseg {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  std::size_t skipped = 0;  // coordinates dropped as non-differentiable
};

// |a - n| / max(floor, |a| + |n|)
double relative_error(double analytic, double numeric, double floor = 1e-8) noexcept;

// Scalar-valued function of several f64 tensors, built on the given tape.
using GradFn = std::function<Tensor64(Tape64&, std::span<const Tensor64>)>;
using GradFn1 = std::function<Tensor64(Tape64&, const Tensor64&)>;

struct GradCheckOptions {
  double step = 1e-3;
  // When set, only this many coordinates per input are probed, drawn without
  // replacement from CounterRng(sample_seed, input index).
  std::optional<std::size_t> max_coords_per_input;
  std::uint64_t sample_seed = 0;
  // Denominator floor of the relative error; raise it for functions whose
  // true gradient has exact zeros (e.g. conv biases feeding batchnorm).
  double denominator_floor = 1e-8;
  // When set, a coordinate whose one-sided slopes (f(x+h) - f(x)) / h and
  // (f(x) - f(x-h)) / h differ by more than this relative error straddles a
  // kink (relu, max) and is skipped rather than compared.
  std::optional<double> kink_tolerance;
};

/// Compares reverse-mode gradients with central differences
/// (f(x + h e_i) - f(x - h e_i)) / 2h, everything evaluated in f64.
/// `f` must be deterministic; stochastic layers belong in eval mode.
/// Returns one result per input.
std::vector<GradCheckResult> finite_diff_check_each(const GradFn& f, const std::vector<Tensor64>& inputs,
                                                    const GradCheckOptions& options = {});

// Max over inputs of finite_diff_check_each.
GradCheckResult finite_diff_check(const GradFn& f, const std::vector<Tensor64>& inputs,
                                  const GradCheckOptions& options = {});

GradCheckResult finite_diff_check(const GradFn1& f, const Tensor64& x, double step = 1e-3);

}  // namespace rainseg
