#pragma once

#include <cstddef>

namespace rainseg::kernels {

// Extents of one 2-D convolution over an NCHW batch with zero padding.
struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride = 1;
  std::size_t pad = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  // Validates odd kernels and exact output extents
  // (H + 2p - kh) / stride + 1; throws ShapeError otherwise.
  static ConvGeometry make(std::size_t batch, std::size_t in_channels, std::size_t height,
                           std::size_t width, std::size_t out_channels, std::size_t kernel_h,
                           std::size_t kernel_w, std::size_t stride, std::size_t pad);

  std::size_t patch_len() const noexcept { return in_channels * kernel_h * kernel_w; }
  std::size_t out_pixels() const noexcept { return out_h * out_w; }
};

// y[N,Cout,OH,OW] = conv(x, w) + b. `bias` may be null.
template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);

// Accumulates (+=) into whichever of dx, dw, db is non-null.
template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);

namespace reference {

template <typename T>
void conv2d_forward(const ConvGeometry& g, const T* x, const T* w, const T* bias, T* y);

template <typename T>
void conv2d_backward(const ConvGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);

}  // namespace reference

}  // namespace rainseg::kernels
