#pragma once

#include <atomic>
#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#define RAINSEG_PARFOR _Pragma("omp parallel for schedule(static)")
#define RAINSEG_PARFOR_COLLAPSE2 _Pragma("omp parallel for collapse(2) schedule(static)")
#else
#define RAINSEG_PARFOR
#define RAINSEG_PARFOR_COLLAPSE2
#endif

namespace rainseg::kernels {

// Which kernel family the tensor ops dispatch to. Both produce results that
// agree to rounding; the reference family is serial and loop-for-loop simple.
enum class Backend { parallel, reference };

Backend backend() noexcept;
void set_backend(Backend b) noexcept;

// RAII switch used by tests and the benchmark.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) noexcept : previous_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

int max_threads() noexcept;
void set_threads(int n) noexcept;

namespace fault {
// Test hook: when set, conv2d backward scales its weight gradient by 1.01.
void corrupt_conv_backward(bool on) noexcept;
bool conv_backward_corrupted() noexcept;
}  // namespace fault

}  // namespace rainseg::kernels
