#include "rainseg/kernels/gemm.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

#include "rainseg/kernels/parallel.hpp"

namespace rainseg::kernels {

namespace {

// 64-byte vectors: one zmm register on AVX-512, split by the compiler elsewhere.
template <typename T>
using Vec [[gnu::vector_size(64)]] = T;

template <typename T>
struct Blocking {
  static constexpr std::size_t lanes = 64 / sizeof(T);
  static constexpr std::size_t mr = 8;
  static constexpr std::size_t nr = 2 * lanes;
  static constexpr std::size_t kc = 256;
  static constexpr std::size_t nc = 64 * nr;
};

template <typename T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <typename T>
inline void store(T* p, const Vec<T>& v) {
  std::memcpy(p, &v, sizeof(v));
}

// Packs rows [i0, i0+rows) x cols [p0, p0+kc) of op(A) into mr-row panels,
// k-major within a panel, zero-padding the ragged last panel.
template <typename T>
void pack_a(bool trans, const T* a, std::size_t lda, std::size_t i0, std::size_t rows,
            std::size_t p0, std::size_t kc, T* out) {
  constexpr std::size_t mr = Blocking<T>::mr;
  const std::size_t panels = (rows + mr - 1) / mr;
  RAINSEG_PARFOR
  for (std::size_t panel = 0; panel < panels; ++panel) {
    T* dst = out + panel * mr * kc;
    const std::size_t r0 = panel * mr;
    const std::size_t live = std::min(mr, rows - r0);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < mr; ++r) {
        T v = T(0);
        if (r < live) {
          const std::size_t i = i0 + r0 + r;
          v = trans ? a[(p0 + p) * lda + i] : a[i * lda + p0 + p];
        }
        dst[p * mr + r] = v;
      }
    }
  }
}

// Packs rows [p0, p0+kc) x cols [j0, j0+cols) of op(B) into nr-column panels.
template <typename T>
void pack_b(bool trans, const T* b, std::size_t ldb, std::size_t p0, std::size_t kc,
            std::size_t j0, std::size_t cols, T* out) {
  constexpr std::size_t nr = Blocking<T>::nr;
  const std::size_t panels = (cols + nr - 1) / nr;
  RAINSEG_PARFOR
  for (std::size_t panel = 0; panel < panels; ++panel) {
    T* dst = out + panel * nr * kc;
    const std::size_t c0 = panel * nr;
    const std::size_t live = std::min(nr, cols - c0);
    for (std::size_t p = 0; p < kc; ++p) {
      T* row = dst + p * nr;
      if (!trans && live == nr) {
        std::memcpy(row, b + (p0 + p) * ldb + j0 + c0, nr * sizeof(T));
        continue;
      }
      for (std::size_t c = 0; c < nr; ++c) {
        T v = T(0);
        if (c < live) {
          const std::size_t j = j0 + c0 + c;
          v = trans ? b[j * ldb + p0 + p] : b[(p0 + p) * ldb + j];
        }
        row[c] = v;
      }
    }
  }
}

// C[mr x nr] += Apanel * Bpanel over kc steps; `rows`/`cols` clip the store.
template <typename T>
void micro_kernel(std::size_t kc, const T* a, const T* b, T* c, std::size_t ldc, std::size_t rows,
                  std::size_t cols) {
  constexpr std::size_t mr = Blocking<T>::mr;
  constexpr std::size_t lanes = Blocking<T>::lanes;
  Vec<T> acc0[mr];
  Vec<T> acc1[mr];
#pragma GCC unroll 8
  for (std::size_t r = 0; r < mr; ++r) {
    acc0[r] = Vec<T>{};
    acc1[r] = Vec<T>{};
  }
  for (std::size_t p = 0; p < kc; ++p) {
    const Vec<T> b0 = load<T>(b + p * 2 * lanes);
    const Vec<T> b1 = load<T>(b + p * 2 * lanes + lanes);
    const T* ap = a + p * mr;
#pragma GCC unroll 8
    for (std::size_t r = 0; r < mr; ++r) {
      const T av = ap[r];
      acc0[r] += av * b0;
      acc1[r] += av * b1;
    }
  }
  if (rows == mr && cols == 2 * lanes) {
#pragma GCC unroll 8
    for (std::size_t r = 0; r < mr; ++r) {
      T* row = c + r * ldc;
      store<T>(row, load<T>(row) + acc0[r]);
      store<T>(row + lanes, load<T>(row + lanes) + acc1[r]);
    }
    return;
  }
  alignas(64) T tile[mr][2 * lanes];
  for (std::size_t r = 0; r < mr; ++r) {
    store<T>(&tile[r][0], acc0[r]);
    store<T>(&tile[r][lanes], acc1[r]);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t col = 0; col < cols; ++col) c[r * ldc + col] += tile[r][col];
  }
}

}  // namespace

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  using B = Blocking<T>;
  if (m == 0 || n == 0) return;
  if (!accumulate) {
    RAINSEG_PARFOR
    for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, T(0));
  }
  if (k == 0) return;

  const std::size_t m_panels = (m + B::mr - 1) / B::mr;
  std::vector<T> a_pack(m_panels * B::mr * B::kc);
  std::vector<T> b_pack(((std::min(n, B::nc) + B::nr - 1) / B::nr) * B::nr * B::kc);

  for (std::size_t jc = 0; jc < n; jc += B::nc) {
    const std::size_t cols = std::min(B::nc, n - jc);
    const std::size_t n_panels = (cols + B::nr - 1) / B::nr;
    for (std::size_t pc = 0; pc < k; pc += B::kc) {
      const std::size_t kc = std::min(B::kc, k - pc);
      pack_b(trans_b, b, ldb, pc, kc, jc, cols, b_pack.data());
      pack_a(trans_a, a, lda, 0, m, pc, kc, a_pack.data());
      // Tiles own disjoint C blocks; the pc loop above fixes the summation order.
      RAINSEG_PARFOR_COLLAPSE2
      for (std::size_t jp = 0; jp < n_panels; ++jp) {
        for (std::size_t ip = 0; ip < m_panels; ++ip) {
          const std::size_t i0 = ip * B::mr;
          const std::size_t j0 = jp * B::nr;
          micro_kernel<T>(kc, a_pack.data() + ip * B::mr * kc, b_pack.data() + jp * B::nr * kc,
                          c + i0 * ldc + jc + j0, ldc, std::min(B::mr, m - i0),
                          std::min(B::nr, cols - j0));
        }
      }
    }
  }
}

namespace reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum = T(0);
      for (std::size_t p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * lda + i] : a[i * lda + p];
        const T bv = trans_b ? b[j * ldb + p] : b[p * ldb + j];
        sum += av * bv;
      }
      c[i * ldc + j] = accumulate ? c[i * ldc + j] + sum : sum;
    }
  }
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*, std::size_t,
                          const float*, std::size_t, float*, std::size_t, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                           const double*, std::size_t, double*, std::size_t, bool);

}  // namespace reference

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*, std::size_t,
                          const float*, std::size_t, float*, std::size_t, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*, std::size_t,
                           const double*, std::size_t, double*, std::size_t, bool);

}  // namespace rainseg::kernels
