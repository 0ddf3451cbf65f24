#include "rainseg/kernels/conv.hpp"

#include <string>
#include <vector>

#include "rainseg/core/error.hpp"
#include "rainseg/kernels/gemm.hpp"
#include "rainseg/kernels/parallel.hpp"

namespace rainseg::kernels {

ConvGeometry ConvGeometry::make(std::size_t batch, std::size_t in_channels, std::size_t height,
                                std::size_t width, std::size_t out_channels, std::size_t kernel_h,
                                std::size_t kernel_w, std::size_t stride, std::size_t pad) {
  if (kernel_h % 2 == 0 || kernel_w % 2 == 0) {
    throw ShapeError("conv2d kernel extents must be odd, got " + std::to_string(kernel_h) + "x" +
                     std::to_string(kernel_w));
  }
  if (stride == 0) throw ShapeError("conv2d stride must be >= 1");
  const std::size_t span_h = height + 2 * pad;
  const std::size_t span_w = width + 2 * pad;
  if (span_h < kernel_h || span_w < kernel_w) {
    throw ShapeError("conv2d kernel larger than padded input");
  }
  if ((span_h - kernel_h) % stride != 0 || (span_w - kernel_w) % stride != 0) {
    throw ShapeError("conv2d output extent is not exact: (" + std::to_string(height) + " + 2*" +
                     std::to_string(pad) + " - " + std::to_string(kernel_h) + ") / " +
                     std::to_string(stride));
  }
  ConvGeometry g;
  g.batch = batch;
  g.in_channels = in_channels;
  g.height = height;
  g.width = width;
  g.out_channels = out_channels;
  g.kernel_h = kernel_h;
  g.kernel_w = kernel_w;
  g.stride = stride;
  g.pad = pad;
  g.out_h = (span_h - kernel_h) / stride + 1;
  g.out_w = (span_w - kernel_w) / stride + 1;
  return g;
}

namespace {

// col[(c,ky,kx), n*P + p] for the whole batch; P = out pixels.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t P = g.out_pixels();
  const std::size_t NP = g.batch * P;
  const std::size_t rows = g.patch_len();
  RAINSEG_PARFOR
  for (std::size_t row = 0; row < rows; ++row) {
    const std::size_t c = row / (g.kernel_h * g.kernel_w);
    const std::size_t ky = (row / g.kernel_w) % g.kernel_h;
    const std::size_t kx = row % g.kernel_w;
    T* dst = col + row * NP;
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* plane = x + (n * g.in_channels + c) * g.height * g.width;
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                  static_cast<std::ptrdiff_t>(g.pad);
        T* out = dst + n * P + oy * g.out_w;
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) {
          std::fill_n(out, g.out_w, T(0));
          continue;
        }
        const T* line = plane + static_cast<std::size_t>(iy) * g.width;
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          out[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.width)) ? T(0) : line[ix];
        }
      }
    }
  }
}

// dx += scatter(col); parallel over input channels, which own disjoint dx planes.
template <typename T>
void col2im(const ConvGeometry& g, const T* col, T* dx) {
  const std::size_t P = g.out_pixels();
  const std::size_t NP = g.batch * P;
  const std::size_t kk = g.kernel_h * g.kernel_w;
  RAINSEG_PARFOR
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    for (std::size_t k = 0; k < kk; ++k) {
      const std::size_t ky = k / g.kernel_w;
      const std::size_t kx = k % g.kernel_w;
      const T* src = col + (c * kk + k) * NP;
      for (std::size_t n = 0; n < g.batch; ++n) {
        T* plane = dx + (n * g.in_channels + c) * g.height * g.width;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.height)) continue;
          const T* in = src + n * P + oy * g.out_w;
          T* line = plane + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                      static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.width)) line[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t P = g.out_pixels();
  const std::size_t NP = g.batch * P;
  const std::size_t K = g.patch_len();
  std::vector<T> col(K * NP);
  im2col(g, x, col.data());
  std::vector<T> out(g.out_channels * NP);
  gemm<T>(false, false, g.out_channels, NP, K, w, K, col.data(), NP, out.data(), NP, false);
  RAINSEG_PARFOR_COLLAPSE2
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const T b = bias ? bias[co] : T(0);
      const T* src = out.data() + co * NP + n * P;
      T* dst = y + (n * g.out_channels + co) * P;
      for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + b;
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const std::size_t P = g.out_pixels();
  const std::size_t NP = g.batch * P;
  const std::size_t K = g.patch_len();
  // dY regrouped as [Cout, N*P] to match the im2col column order.
  std::vector<T> dyb(g.out_channels * NP);
  RAINSEG_PARFOR
  for (std::size_t co = 0; co < g.out_channels; ++co) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* src = dy + (n * g.out_channels + co) * P;
      std::copy(src, src + P, dyb.data() + co * NP + n * P);
    }
  }
  if (db) {
    RAINSEG_PARFOR
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      T s = T(0);
      const T* row = dyb.data() + co * NP;
      for (std::size_t j = 0; j < NP; ++j) s += row[j];
      db[co] += s;
    }
  }
  if (dw) {
    std::vector<T> col(K * NP);
    im2col(g, x, col.data());
    std::vector<T> grad_w(g.out_channels * K);
    gemm<T>(false, true, g.out_channels, K, NP, dyb.data(), NP, col.data(), NP, grad_w.data(), K, false);
    const T scale = fault::conv_backward_corrupted() ? T(1.01) : T(1);
    for (std::size_t i = 0; i < grad_w.size(); ++i) dw[i] += scale * grad_w[i];
  }
  if (dx) {
    std::vector<T> dcol(K * NP);
    gemm<T>(true, false, K, NP, g.out_channels, w, K, dyb.data(), NP, dcol.data(), NP, false);
    col2im(g, dcol.data(), dx);
  }
}

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          T sum = T(0);
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                          static_cast<std::ptrdiff_t>(g.pad);
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                          static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.height) ||
                    ix >= static_cast<std::ptrdiff_t>(g.width)) {
                  continue;
                }
                sum += x[((n * g.in_channels + ci) * g.height + iy) * g.width + ix] *
                       w[((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx];
              }
            }
          }
          y[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox] = sum + (bias ? bias[co] : T(0));
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const T scale = fault::conv_backward_corrupted() ? T(1.01) : T(1);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T grad = dy[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
          if (db) db[co] += grad;
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
              for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
                const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                          static_cast<std::ptrdiff_t>(g.pad);
                const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                          static_cast<std::ptrdiff_t>(g.pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(g.height) ||
                    ix >= static_cast<std::ptrdiff_t>(g.width)) {
                  continue;
                }
                const std::size_t xi = ((n * g.in_channels + ci) * g.height + iy) * g.width + ix;
                const std::size_t wi = ((co * g.in_channels + ci) * g.kernel_h + ky) * g.kernel_w + kx;
                if (dw) dw[wi] += scale * grad * x[xi];
                if (dx) dx[xi] += grad * w[wi];
              }
            }
          }
        }
      }
    }
  }
}

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*,
                                     float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*,
                                      double*, double*, double*);

}  // namespace reference

template void conv2d_forward<float>(const ConvGeometry&, const float*, const float*, const float*, float*);
template void conv2d_forward<double>(const ConvGeometry&, const double*, const double*, const double*, double*);
template void conv2d_backward<float>(const ConvGeometry&, const float*, const float*, const float*, float*,
                                     float*, float*);
template void conv2d_backward<double>(const ConvGeometry&, const double*, const double*, const double*,
                                      double*, double*, double*);

}  // namespace rainseg::kernels
