#include "rainseg/tensor/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rainseg/core/rng.hpp"

namespace rainseg {

double relative_error(double analytic, double numeric, double floor) noexcept {
  return std::abs(analytic - numeric) / std::max(floor, std::abs(analytic) + std::abs(numeric));
}

namespace {

std::vector<std::size_t> probe_indices(std::size_t numel, const GradCheckOptions& options, std::size_t input) {
  std::vector<std::size_t> idx(numel);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (!options.max_coords_per_input || *options.max_coords_per_input >= numel) return idx;
  CounterRng rng(options.sample_seed, input);
  const std::size_t take = *options.max_coords_per_input;
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + rng.next_below(numel - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(take);
  std::sort(idx.begin(), idx.end());
  return idx;
}

double evaluate(const GradFn& f, const std::vector<Tensor64>& inputs) {
  Tape64 tape(false);
  return f(tape, inputs).item();
}

}  // namespace

std::vector<GradCheckResult> finite_diff_check_each(const GradFn& f, const std::vector<Tensor64>& inputs,
                                                    const GradCheckOptions& options) {
  Tape64 tape;
  std::vector<Tensor64> watched;
  watched.reserve(inputs.size());
  for (const auto& in : inputs) {
    Tensor64 leaf = in.detached();
    leaf.set_requires_grad(true);
    watched.push_back(tape.watch(leaf));
  }
  const Tensor64 loss = f(tape, watched);
  tape.backward(loss);

  std::vector<GradCheckResult> results(inputs.size());
  std::vector<Tensor64> probe = inputs;
  const double center = options.kink_tolerance ? evaluate(f, inputs) : 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor64 analytic = *tape.grad(watched[k]);
    GradCheckResult& r = results[k];
    r.worst_input = k;
    for (const std::size_t i : probe_indices(inputs[k].numel(), options, k)) {
      const double original = inputs[k].data()[i];
      probe[k].mutable_data()[i] = original + options.step;
      const double plus = evaluate(f, probe);
      probe[k].mutable_data()[i] = original - options.step;
      const double minus = evaluate(f, probe);
      probe[k].mutable_data()[i] = original;
      if (options.kink_tolerance) {
        const double right = (plus - center) / options.step;
        const double left = (center - minus) / options.step;
        if (relative_error(right, left, options.denominator_floor) > *options.kink_tolerance) {
          ++r.skipped;
          continue;
        }
      }
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double err = relative_error(analytic.data()[i], numeric, options.denominator_floor);
      ++r.coordinates;
      if (err > r.max_rel_error || r.coordinates == 1) {
        r.max_rel_error = err;
        r.worst_index = i;
        r.analytic = analytic.data()[i];
        r.numeric = numeric;
      }
    }
  }
  return results;
}

GradCheckResult finite_diff_check(const GradFn& f, const std::vector<Tensor64>& inputs,
                                  const GradCheckOptions& options) {
  GradCheckResult worst;
  std::size_t total = 0, skipped = 0;
  for (const auto& r : finite_diff_check_each(f, inputs, options)) {
    total += r.coordinates;
    skipped += r.skipped;
    if (r.max_rel_error >= worst.max_rel_error) worst = r;
  }
  worst.coordinates = total;
  worst.skipped = skipped;
  return worst;
}

GradCheckResult finite_diff_check(const GradFn1& f, const Tensor64& x, double step) {
  GradCheckOptions options;
  options.step = step;
  return finite_diff_check([&f](Tape64& tape, std::span<const Tensor64> in) { return f(tape, in[0]); },
                           std::vector<Tensor64>{x}, options);
}

}  // namespace rainseg
