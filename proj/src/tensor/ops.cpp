#include "rainseg/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rainseg/core/error.hpp"
#include "rainseg/core/rng.hpp"
#include "rainseg/kernels/conv.hpp"
#include "rainseg/kernels/parallel.hpp"

namespace rainseg {

namespace {

template <typename T>
using Tn = BasicTensor<T>;

void require_rank(const Shape& s, std::size_t rank, const char* op) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + " expects a rank-" + std::to_string(rank) + " tensor, got " +
                     to_string(s));
  }
}

[[noreturn]] void mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
}

template <typename T>
Tn<T> make(const Shape& shape, std::vector<T> values, const char* op) {
  Tn<T> out(shape, std::move(values));
  require_finite(out, op);
  return out;
}

struct Nchw {
  std::size_t n, c, h, w;
  explicit Nchw(const Shape& s) : n(s[0]), c(s[1]), h(s[2]), w(s[3]) {}
  std::size_t plane() const { return h * w; }
};

}  // namespace

bool is_channel_bias_shape(const Shape& bias, const Shape& x) {
  if (x.size() != 4) return false;
  if (bias.size() == 1) return bias[0] == x[1];
  return bias.size() == 4 && bias[0] == 1 && bias[1] == x[1] && bias[2] == 1 && bias[3] == 1;
}

template <typename T>
void require_finite(const BasicTensor<T>& t, const char* op) {
  for (const T v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

template <typename T>
Tn<T> add(BasicTape<T>& tape, const Tn<T>& a, const Tn<T>& b) {
  if (a.shape() == b.shape()) {
    std::vector<T> out(a.numel());
    const auto av = a.data();
    const auto bv = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
    return tape.record(OpKind::add, {&a, &b}, make<T>(a.shape(), std::move(out), "add"),
                       [a, b](BasicTape<T>& t, std::span<const T> g) {
                         for (const Tn<T>* in : {&a, &b}) {
                           if (!t.tracks(*in)) continue;
                           auto slot = t.grad_slot(*in);
                           for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
                         }
                       });
  }
  if (!is_channel_bias_shape(b.shape(), a.shape())) mismatch("add", a.shape(), b.shape());
  const Nchw d(a.shape());
  std::vector<T> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t base = (n * d.c + c) * d.plane();
      for (std::size_t p = 0; p < d.plane(); ++p) out[base + p] = av[base + p] + bv[c];
    }
  }
  return tape.record(OpKind::add_bias, {&a, &b}, make<T>(a.shape(), std::move(out), "add"),
                     [a, b, d](BasicTape<T>& t, std::span<const T> g) {
                       if (t.tracks(a)) {
                         auto slot = t.grad_slot(a);
                         for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
                       }
                       if (t.tracks(b)) {
                         auto slot = t.grad_slot(b);
                         for (std::size_t n = 0; n < d.n; ++n) {
                           for (std::size_t c = 0; c < d.c; ++c) {
                             const std::size_t base = (n * d.c + c) * d.plane();
                             T s = T(0);
                             for (std::size_t p = 0; p < d.plane(); ++p) s += g[base + p];
                             slot[c] += s;
                           }
                         }
                       }
                     });
}

template <typename T>
Tn<T> mul(BasicTape<T>& tape, const Tn<T>& a, const Tn<T>& b) {
  if (a.shape() != b.shape()) mismatch("mul", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  const auto av = a.data();
  const auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tape.record(OpKind::mul, {&a, &b}, make<T>(a.shape(), std::move(out), "mul"),
                     [a, b](BasicTape<T>& t, std::span<const T> g) {
                       if (t.tracks(a)) {
                         auto slot = t.grad_slot(a);
                         const auto bv = b.data();
                         for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * bv[i];
                       }
                       if (t.tracks(b)) {
                         auto slot = t.grad_slot(b);
                         const auto av = a.data();
                         for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * av[i];
                       }
                     });
}

template <typename T>
Tn<T> mul_scalar(BasicTape<T>& tape, const Tn<T>& a, T s) {
  std::vector<T> out(a.numel());
  const auto av = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * s;
  return tape.record(OpKind::mul_scalar, {&a}, make<T>(a.shape(), std::move(out), "mul_scalar"),
                     [a, s](BasicTape<T>& t, std::span<const T> g) {
                       auto slot = t.grad_slot(a);
                       for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * s;
                     });
}

template <typename T>
Tn<T> concat_channels(BasicTape<T>& tape, const Tn<T>& a, const Tn<T>& b) {
  require_rank(a.shape(), 4, "concat_channels");
  require_rank(b.shape(), 4, "concat_channels");
  const Nchw da(a.shape());
  const Nchw db(b.shape());
  if (da.n != db.n || da.h != db.h || da.w != db.w) mismatch("concat_channels", a.shape(), b.shape());
  const std::size_t plane = da.plane();
  const std::size_t c_out = da.c + db.c;
  std::vector<T> out(da.n * c_out * plane);
  for (std::size_t n = 0; n < da.n; ++n) {
    std::copy_n(a.data().data() + n * da.c * plane, da.c * plane, out.data() + n * c_out * plane);
    std::copy_n(b.data().data() + n * db.c * plane, db.c * plane,
                out.data() + (n * c_out + da.c) * plane);
  }
  return tape.record(OpKind::concat_channels, {&a, &b},
                     make<T>({da.n, c_out, da.h, da.w}, std::move(out), "concat_channels"),
                     [a, b, da, db, plane, c_out](BasicTape<T>& t, std::span<const T> g) {
                       if (t.tracks(a)) {
                         auto slot = t.grad_slot(a);
                         for (std::size_t n = 0; n < da.n; ++n) {
                           const T* src = g.data() + n * c_out * plane;
                           T* dst = slot.data() + n * da.c * plane;
                           for (std::size_t i = 0; i < da.c * plane; ++i) dst[i] += src[i];
                         }
                       }
                       if (t.tracks(b)) {
                         auto slot = t.grad_slot(b);
                         for (std::size_t n = 0; n < db.n; ++n) {
                           const T* src = g.data() + (n * c_out + da.c) * plane;
                           T* dst = slot.data() + n * db.c * plane;
                           for (std::size_t i = 0; i < db.c * plane; ++i) dst[i] += src[i];
                         }
                       }
                     });
}

template <typename T>
Tn<T> conv2d(BasicTape<T>& tape, const Tn<T>& x, const Tn<T>& w, const Tn<T>& bias,
             Conv2dOptions options) {
  require_rank(x.shape(), 4, "conv2d input");
  require_rank(w.shape(), 4, "conv2d weight");
  const Nchw dx(x.shape());
  const std::size_t c_out = w.dim(0);
  if (w.dim(1) != dx.c) {
    throw ShapeError("conv2d: channel mismatch, input " + to_string(x.shape()) + " vs weight " +
                     to_string(w.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != c_out) mismatch("conv2d bias", bias.shape(), Shape{c_out});
  const std::size_t pad = options.padding.value_or((w.dim(2) - 1) / 2);
  if (!options.padding && w.dim(2) != w.dim(3)) {
    throw ShapeError("conv2d: same padding needs a square kernel, got " + to_string(w.shape()));
  }
  const auto g = kernels::ConvGeometry::make(dx.n, dx.c, dx.h, dx.w, c_out, w.dim(2), w.dim(3),
                                             options.stride, pad);
  std::vector<T> out(dx.n * c_out * g.out_pixels());
  if (kernels::backend() == kernels::Backend::reference) {
    kernels::reference::conv2d_forward<T>(g, x.data().data(), w.data().data(), bias.data().data(),
                                          out.data());
  } else {
    kernels::conv2d_forward<T>(g, x.data().data(), w.data().data(), bias.data().data(), out.data());
  }
  return tape.record(
      OpKind::conv2d, {&x, &w, &bias}, make<T>({dx.n, c_out, g.out_h, g.out_w}, std::move(out), "conv2d"),
      [x, w, bias, g](BasicTape<T>& t, std::span<const T> grad) {
        T* gx = t.tracks(x) ? t.grad_slot(x).data() : nullptr;
        T* gw = t.tracks(w) ? t.grad_slot(w).data() : nullptr;
        T* gb = t.tracks(bias) ? t.grad_slot(bias).data() : nullptr;
        if (kernels::backend() == kernels::Backend::reference) {
          kernels::reference::conv2d_backward<T>(g, x.data().data(), w.data().data(), grad.data(), gx, gw, gb);
        } else {
          kernels::conv2d_backward<T>(g, x.data().data(), w.data().data(), grad.data(), gx, gw, gb);
        }
      });
}

template <typename T>
Tn<T> relu(BasicTape<T>& tape, const Tn<T>& x) {
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
  return tape.record(OpKind::relu, {&x}, make<T>(x.shape(), std::move(out), "relu"),
                     [x](BasicTape<T>& t, std::span<const T> g) {
                       auto slot = t.grad_slot(x);
                       const auto xv = x.data();
                       for (std::size_t i = 0; i < g.size(); ++i) {
                         if (xv[i] > T(0)) slot[i] += g[i];
                       }
                     });
}

template <typename T>
Tn<T> sigmoid(BasicTape<T>& tape, const Tn<T>& x) {
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const T v = xv[i];
    // Branches keep exp() from overflowing for large |v|.
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  Tn<T> y = make<T>(x.shape(), std::move(out), "sigmoid");
  const Tn<T> saved = y;
  return tape.record(OpKind::sigmoid, {&x}, std::move(y), [x, saved](BasicTape<T>& t, std::span<const T> g) {
    auto slot = t.grad_slot(x);
    const auto yv = saved.data();
    for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * yv[i] * (T(1) - yv[i]);
  });
}

template <typename T>
Tn<T> softmax_channel(BasicTape<T>& tape, const Tn<T>& x) {
  require_rank(x.shape(), 4, "softmax_channel");
  const Nchw d(x.shape());
  const std::size_t plane = d.plane();
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  RAINSEG_PARFOR
  for (std::size_t n = 0; n < d.n; ++n) {
    const T* in = xv.data() + n * d.c * plane;
    T* o = out.data() + n * d.c * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      T mx = in[p];
      for (std::size_t c = 1; c < d.c; ++c) mx = std::max(mx, in[c * plane + p]);
      T s = T(0);
      for (std::size_t c = 0; c < d.c; ++c) {
        const T e = std::exp(in[c * plane + p] - mx);
        o[c * plane + p] = e;
        s += e;
      }
      const T inv = T(1) / s;
      for (std::size_t c = 0; c < d.c; ++c) o[c * plane + p] *= inv;
    }
  }
  Tn<T> y = make<T>(x.shape(), std::move(out), "softmax_channel");
  const Tn<T> saved = y;
  return tape.record(OpKind::softmax_channel, {&x}, std::move(y),
                     [x, saved, d, plane](BasicTape<T>& t, std::span<const T> g) {
                       auto slot = t.grad_slot(x);
                       const auto yv = saved.data();
                       for (std::size_t n = 0; n < d.n; ++n) {
                         const std::size_t base = n * d.c * plane;
                         for (std::size_t p = 0; p < plane; ++p) {
                           T dot = T(0);
                           for (std::size_t c = 0; c < d.c; ++c) {
                             dot += g[base + c * plane + p] * yv[base + c * plane + p];
                           }
                           for (std::size_t c = 0; c < d.c; ++c) {
                             const std::size_t i = base + c * plane + p;
                             slot[i] += yv[i] * (g[i] - dot);
                           }
                         }
                       }
                     });
}

template <typename T>
Tn<T> maxpool2d(BasicTape<T>& tape, const Tn<T>& x) {
  require_rank(x.shape(), 4, "maxpool2d");
  const Nchw d(x.shape());
  if (d.h % 2 != 0 || d.w % 2 != 0) {
    throw ShapeError("maxpool2d needs even spatial extents, got " + to_string(x.shape()));
  }
  const std::size_t oh = d.h / 2;
  const std::size_t ow = d.w / 2;
  std::vector<T> out(d.n * d.c * oh * ow);
  std::vector<std::uint32_t> arg(out.size());
  const auto xv = x.data();
  const std::size_t planes = d.n * d.c;
  RAINSEG_PARFOR
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const T* in = xv.data() + pl * d.plane();
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = (2 * oy) * d.w + 2 * ox;
        // Row-major scan with strict '>' keeps the first maximum.
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dxo = 0; dxo < 2; ++dxo) {
            const std::size_t idx = (2 * oy + dy) * d.w + 2 * ox + dxo;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = pl * oh * ow + oy * ow + ox;
        out[o] = in[best];
        arg[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return tape.record(OpKind::maxpool2d, {&x}, make<T>({d.n, d.c, oh, ow}, std::move(out), "maxpool2d"),
                     [x, d, oh, ow, arg = std::move(arg)](BasicTape<T>& t, std::span<const T> g) {
                       auto slot = t.grad_slot(x);
                       const std::size_t per = oh * ow;
                       for (std::size_t o = 0; o < g.size(); ++o) {
                         slot[(o / per) * d.plane() + arg[o]] += g[o];
                       }
                     });
}

template <typename T>
Tn<T> upsample_nearest2(BasicTape<T>& tape, const Tn<T>& x) {
  require_rank(x.shape(), 4, "upsample_nearest2");
  const Nchw d(x.shape());
  const std::size_t oh = 2 * d.h;
  const std::size_t ow = 2 * d.w;
  std::vector<T> out(d.n * d.c * oh * ow);
  const auto xv = x.data();
  const std::size_t planes = d.n * d.c;
  RAINSEG_PARFOR
  for (std::size_t pl = 0; pl < planes; ++pl) {
    const T* in = xv.data() + pl * d.plane();
    T* o = out.data() + pl * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xx = 0; xx < ow; ++xx) o[y * ow + xx] = in[(y / 2) * d.w + xx / 2];
    }
  }
  return tape.record(OpKind::upsample_nearest2, {&x},
                     make<T>({d.n, d.c, oh, ow}, std::move(out), "upsample_nearest2"),
                     [x, d, oh, ow](BasicTape<T>& t, std::span<const T> g) {
                       auto slot = t.grad_slot(x);
                       const std::size_t planes = d.n * d.c;
                       for (std::size_t pl = 0; pl < planes; ++pl) {
                         const T* go = g.data() + pl * oh * ow;
                         T* gi = slot.data() + pl * d.plane();
                         for (std::size_t y = 0; y < oh; ++y) {
                           for (std::size_t xx = 0; xx < ow; ++xx) gi[(y / 2) * d.w + xx / 2] += go[y * ow + xx];
                         }
                       }
                     });
}

template <typename T>
Tn<T> batchnorm2d(BasicTape<T>& tape, const Tn<T>& x, const Tn<T>& gamma, const Tn<T>& beta,
                  BatchNormState<T>& state, Mode mode) {
  require_rank(x.shape(), 4, "batchnorm2d");
  const Nchw d(x.shape());
  if (d.n == 0) throw ShapeError("batchnorm2d on an empty batch");
  if (gamma.numel() != d.c || beta.numel() != d.c) {
    mismatch("batchnorm2d affine parameters", gamma.shape(), Shape{d.c});
  }
  if (state.running_mean.size() != d.c || state.running_var.size() != d.c) {
    throw ShapeError("batchnorm2d running statistics hold " + std::to_string(state.running_mean.size()) +
                     " channels, input has " + std::to_string(d.c));
  }
  const std::size_t plane = d.plane();
  const std::size_t m = d.n * plane;
  if (mode == Mode::train && m < 2) {
    throw ShapeError("batchnorm2d in train mode needs more than one value per channel, got " +
                     to_string(x.shape()));
  }
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<T> mean(d.c);
  std::vector<T> inv_std(d.c);
  std::vector<T> out(x.numel());
  std::vector<T> xhat(x.numel());
  RAINSEG_PARFOR
  for (std::size_t c = 0; c < d.c; ++c) {
    T mu;
    T var;
    if (mode == Mode::train) {
      T s = T(0);
      for (std::size_t n = 0; n < d.n; ++n) {
        const T* in = xv.data() + (n * d.c + c) * plane;
        for (std::size_t p = 0; p < plane; ++p) s += in[p];
      }
      mu = s / static_cast<T>(m);
      T sq = T(0);
      for (std::size_t n = 0; n < d.n; ++n) {
        const T* in = xv.data() + (n * d.c + c) * plane;
        for (std::size_t p = 0; p < plane; ++p) sq += (in[p] - mu) * (in[p] - mu);
      }
      var = sq / static_cast<T>(m);
      const T momentum = static_cast<T>(kBatchNormMomentum);
      state.running_mean[c] = (T(1) - momentum) * state.running_mean[c] + momentum * mu;
      state.running_var[c] = (T(1) - momentum) * state.running_var[c] +
                             momentum * (sq / static_cast<T>(m - 1));
    } else {
      mu = state.running_mean[c];
      var = state.running_var[c];
    }
    const T istd = T(1) / std::sqrt(var + static_cast<T>(kBatchNormEps));
    mean[c] = mu;
    inv_std[c] = istd;
    for (std::size_t n = 0; n < d.n; ++n) {
      const std::size_t base = (n * d.c + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const T h = (xv[base + p] - mu) * istd;
        xhat[base + p] = h;
        out[base + p] = gv[c] * h + bv[c];
      }
    }
  }
  return tape.record(
      OpKind::batchnorm2d, {&x, &gamma, &beta}, make<T>(x.shape(), std::move(out), "batchnorm2d"),
      [x, gamma, beta, d, plane, m, mode, inv_std = std::move(inv_std), xhat = std::move(xhat)](
          BasicTape<T>& t, std::span<const T> g) {
        T* gx = t.tracks(x) ? t.grad_slot(x).data() : nullptr;
        T* gg = t.tracks(gamma) ? t.grad_slot(gamma).data() : nullptr;
        T* gb = t.tracks(beta) ? t.grad_slot(beta).data() : nullptr;
        const auto gv = gamma.data();
        RAINSEG_PARFOR
        for (std::size_t c = 0; c < d.c; ++c) {
          T sum_g = T(0);
          T sum_gx = T(0);
          for (std::size_t n = 0; n < d.n; ++n) {
            const std::size_t base = (n * d.c + c) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
              sum_g += g[base + p];
              sum_gx += g[base + p] * xhat[base + p];
            }
          }
          if (gg) gg[c] += sum_gx;
          if (gb) gb[c] += sum_g;
          if (!gx) continue;
          const T scale = gv[c] * inv_std[c];
          for (std::size_t n = 0; n < d.n; ++n) {
            const std::size_t base = (n * d.c + c) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
              if (mode == Mode::train) {
                const T mt = static_cast<T>(m);
                gx[base + p] += scale / mt * (mt * g[base + p] - sum_g - xhat[base + p] * sum_gx);
              } else {
                gx[base + p] += scale * g[base + p];
              }
            }
          }
        }
      });
}

template <typename T>
Tn<T> dropout(BasicTape<T>& tape, const Tn<T>& x, double p, DropoutStream& stream, Mode mode) {
  if (!(p >= 0.0) || p >= 1.0) throw ConfigError("dropout probability must lie in [0, 1), got " + std::to_string(p));
  if (mode == Mode::eval || p == 0.0) return x;
  const CounterRng rng(stream.seed, stream.counter++);
  std::vector<T> mask(x.numel());
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = rng.uniform_at(i) < p ? T(0) : keep_scale;
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i];
  return tape.record(OpKind::dropout, {&x}, make<T>(x.shape(), std::move(out), "dropout"),
                     [x, mask = std::move(mask)](BasicTape<T>& t, std::span<const T> g) {
                       auto slot = t.grad_slot(x);
                       for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i] * mask[i];
                     });
}

template <typename T>
Tn<T> channel_gate(BasicTape<T>& tape, const Tn<T>& x, const Tn<T>& gate) {
  require_rank(x.shape(), 4, "channel_gate");
  require_rank(gate.shape(), 4, "channel_gate");
  const Nchw d(x.shape());
  if (gate.dim(0) != d.n || gate.dim(1) != 1 || gate.dim(2) != d.h || gate.dim(3) != d.w) {
    mismatch("channel_gate", x.shape(), gate.shape());
  }
  const std::size_t plane = d.plane();
  std::vector<T> out(x.numel());
  const auto xv = x.data();
  const auto av = gate.data();
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t c = 0; c < d.c; ++c) {
      const std::size_t base = (n * d.c + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) out[base + p] = xv[base + p] * av[n * plane + p];
    }
  }
  return tape.record(OpKind::channel_gate, {&x, &gate}, make<T>(x.shape(), std::move(out), "channel_gate"),
                     [x, gate, d, plane](BasicTape<T>& t, std::span<const T> g) {
                       const auto xv = x.data();
                       const auto av = gate.data();
                       T* gx = t.tracks(x) ? t.grad_slot(x).data() : nullptr;
                       T* ga = t.tracks(gate) ? t.grad_slot(gate).data() : nullptr;
                       for (std::size_t n = 0; n < d.n; ++n) {
                         for (std::size_t c = 0; c < d.c; ++c) {
                           const std::size_t base = (n * d.c + c) * plane;
                           for (std::size_t p = 0; p < plane; ++p) {
                             if (gx) gx[base + p] += g[base + p] * av[n * plane + p];
                             if (ga) ga[n * plane + p] += g[base + p] * xv[base + p];
                           }
                         }
                       }
                     });
}

template <typename T>
Tn<T> sum(BasicTape<T>& tape, const Tn<T>& x) {
  T s = T(0);
  for (const T v : x.data()) s += v;
  return tape.record(OpKind::sum, {&x}, make<T>(Shape{}, std::vector<T>{s}, "sum"),
                     [x](BasicTape<T>& t, std::span<const T> g) {
                       auto slot = t.grad_slot(x);
                       for (auto& v : slot) v += g[0];
                     });
}

#define RAINSEG_INSTANTIATE_OPS(T)                                                                   \
  template void require_finite<T>(const Tn<T>&, const char*);                                        \
  template Tn<T> add<T>(BasicTape<T>&, const Tn<T>&, const Tn<T>&);                                 \
  template Tn<T> mul<T>(BasicTape<T>&, const Tn<T>&, const Tn<T>&);                                 \
  template Tn<T> mul_scalar<T>(BasicTape<T>&, const Tn<T>&, T);                                     \
  template Tn<T> concat_channels<T>(BasicTape<T>&, const Tn<T>&, const Tn<T>&);                     \
  template Tn<T> conv2d<T>(BasicTape<T>&, const Tn<T>&, const Tn<T>&, const Tn<T>&, Conv2dOptions); \
  template Tn<T> relu<T>(BasicTape<T>&, const Tn<T>&);                                              \
  template Tn<T> sigmoid<T>(BasicTape<T>&, const Tn<T>&);                                           \
  template Tn<T> softmax_channel<T>(BasicTape<T>&, const Tn<T>&);                                   \
  template Tn<T> maxpool2d<T>(BasicTape<T>&, const Tn<T>&);                                         \
  template Tn<T> upsample_nearest2<T>(BasicTape<T>&, const Tn<T>&);                                 \
  template Tn<T> batchnorm2d<T>(BasicTape<T>&, const Tn<T>&, const Tn<T>&, const Tn<T>&,            \
                                BatchNormState<T>&, Mode);                                           \
  template Tn<T> dropout<T>(BasicTape<T>&, const Tn<T>&, double, DropoutStream&, Mode);             \
  template Tn<T> channel_gate<T>(BasicTape<T>&, const Tn<T>&, const Tn<T>&);                        \
  template Tn<T> sum<T>(BasicTape<T>&, const Tn<T>&);

RAINSEG_INSTANTIATE_OPS(float)
RAINSEG_INSTANTIATE_OPS(double)

}  // namespace rainseg
