#include <doctest.h>

#include <cmath>
#include <vector>

#include "rainseg/core/rng.hpp"
#include "rainseg/kernels/conv.hpp"
#include "rainseg/kernels/gemm.hpp"
#include "rainseg/kernels/parallel.hpp"

using namespace rainseg;
using namespace rainseg::kernels;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(2.0 * rng.next_uniform() - 1.0);
  return v;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE_TEMPLATE("gemm matches the reference for all transposes and ragged sizes", T, float, double) {
  const std::size_t sizes[][3] = {{1, 1, 1}, {7, 5, 3}, {17, 33, 65}, {64, 48, 300}, {9, 70, 257}};
  const double tol = std::is_same_v<T, float> ? 1e-4 : 1e-12;
  for (const auto& s : sizes) {
    for (int ta = 0; ta < 2; ++ta) {
      for (int tb = 0; tb < 2; ++tb) {
        const std::size_t m = s[0], n = s[1], k = s[2];
        const auto a = random_vec<T>(m * k, 1), b = random_vec<T>(k * n, 2);
        const std::size_t lda = ta ? m : k, ldb = tb ? k : n;
        for (int acc = 0; acc < 2; ++acc) {
          auto c1 = random_vec<T>(m * n, 3), c2 = c1;
          gemm<T>(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c1.data(), n, acc);
          reference::gemm<T>(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c2.data(), n, acc);
          CAPTURE(m);
          CAPTURE(n);
          CAPTURE(k);
          CHECK(max_abs_diff(c1, c2) < tol * std::sqrt(static_cast<double>(k)));
        }
      }
    }
  }
}

TEST_CASE("gemm is bit-identical across thread counts") {
  const std::size_t m = 70, n = 90, k = 130;
  const auto a = random_vec<float>(m * k, 4), b = random_vec<float>(k * n, 5);
  const int saved = max_threads();
  std::vector<float> c1(m * n), c2(m * n);
  set_threads(1);
  gemm<float>(false, false, m, n, k, a.data(), k, b.data(), n, c1.data(), n, false);
  set_threads(4);
  gemm<float>(false, false, m, n, k, a.data(), k, b.data(), n, c2.data(), n, false);
  set_threads(saved);
  CHECK(c1 == c2);
}

TEST_CASE_TEMPLATE("conv forward and backward match the direct reference", T, float, double) {
  const double tol = std::is_same_v<T, float> ? 2e-4 : 1e-11;
  struct G {
    std::size_t n, cin, h, w, cout, k, s, p;
  };
  const G cases[] = {{2, 3, 8, 8, 4, 3, 1, 1}, {1, 5, 7, 9, 2, 1, 1, 0}, {3, 2, 9, 9, 3, 3, 2, 1},
                     {2, 4, 10, 6, 5, 5, 1, 2}, {1, 1, 3, 3, 1, 3, 1, 1}};
  for (const auto& c : cases) {
    const auto g = ConvGeometry::make(c.n, c.cin, c.h, c.w, c.cout, c.k, c.k, c.s, c.p);
    const auto x = random_vec<T>(c.n * c.cin * c.h * c.w, 6);
    const auto w = random_vec<T>(c.cout * c.cin * c.k * c.k, 7);
    const auto b = random_vec<T>(c.cout, 8);
    const std::size_t ny = c.n * c.cout * g.out_h * g.out_w;
    std::vector<T> y1(ny), y2(ny);
    conv2d_forward<T>(g, x.data(), w.data(), b.data(), y1.data());
    reference::conv2d_forward<T>(g, x.data(), w.data(), b.data(), y2.data());
    CHECK(max_abs_diff(y1, y2) < tol * 10);

    const auto dy = random_vec<T>(ny, 9);
    std::vector<T> dx1(x.size(), T(0.5)), dw1(w.size(), T(0.25)), db1(b.size(), T(1));
    auto dx2 = dx1, dw2 = dw1, db2 = db1;
    conv2d_backward<T>(g, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
    reference::conv2d_backward<T>(g, x.data(), w.data(), dy.data(), dx2.data(), dw2.data(), db2.data());
    CHECK(max_abs_diff(dx1, dx2) < tol * 10);
    CHECK(max_abs_diff(dw1, dw2) < tol * 10);
    CHECK(max_abs_diff(db1, db2) < tol * 10);
  }
}

TEST_CASE("conv geometry validation") {
  CHECK_THROWS(ConvGeometry::make(1, 1, 4, 4, 1, 2, 2, 1, 0));
  CHECK_THROWS(ConvGeometry::make(1, 1, 6, 6, 1, 3, 3, 2, 1));
  CHECK_THROWS(ConvGeometry::make(1, 1, 6, 6, 1, 3, 3, 0, 1));
  const auto g = ConvGeometry::make(1, 1, 7, 7, 1, 3, 3, 2, 1);
  CHECK(g.out_h == 4);
}

TEST_CASE("backend switch and fault hook") {
  CHECK(backend() == Backend::parallel);
  {
    ScopedBackend s(Backend::reference);
    CHECK(backend() == Backend::reference);
  }
  CHECK(backend() == Backend::parallel);
  CHECK_FALSE(fault::conv_backward_corrupted());
  fault::corrupt_conv_backward(true);
  CHECK(fault::conv_backward_corrupted());
  fault::corrupt_conv_backward(false);
}

}  // TEST_SUITE
