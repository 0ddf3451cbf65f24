#include "rainseg/kernels/parallel.hpp"

namespace rainseg::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};
std::atomic<bool> g_corrupt_conv{false};
}  // namespace

Backend backend() noexcept { return g_backend.load(std::memory_order_relaxed); }
void set_backend(Backend b) noexcept { g_backend.store(b, std::memory_order_relaxed); }

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) noexcept {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace fault {
void corrupt_conv_backward(bool on) noexcept { g_corrupt_conv.store(on); }
bool conv_backward_corrupted() noexcept { return g_corrupt_conv.load(); }
}  // namespace fault

}  // namespace rainseg::kernels
