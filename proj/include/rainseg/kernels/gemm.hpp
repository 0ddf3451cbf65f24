#pragma once

#include <cstddef>

namespace rainseg::kernels {

/// C[M,N] (+)= op(A)[M,K] * op(B)[K,N], row-major with leading dimensions.
///
/// op(A) = A or A^T per `trans_a` (A stored K x M when transposed), same for B.
/// When `accumulate` is false C is overwritten. Every element of C is summed in
/// the same k-order regardless of the thread count, so results are
/// bit-identical across runs and thread settings.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

namespace reference {

// Triple loop, k innermost, serial.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          std::size_t lda, const T* b, std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

}  // namespace reference

}  // namespace rainseg::kernels
