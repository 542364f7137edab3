#include "gpr3d/reference_ops.hpp"

#include <cmath>
#include <limits>

namespace gpr3d::refops {

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 const ops::ConvGeom& g) {
  const long N = static_cast<long>(x.dim(0)), Cin = static_cast<long>(x.dim(1));
  const long D = static_cast<long>(x.dim(2)), H = static_cast<long>(x.dim(3)), W = static_cast<long>(x.dim(4));
  const long Cout = static_cast<long>(kernel.dim(0)), k = g.kernel, s = g.stride, p = g.pad;
  const long OD = (D + 2 * p - k) / s + 1, OH = (H + 2 * p - k) / s + 1, OW = (W + 2 * p - k) / s + 1;
  Tensor<T> out({static_cast<std::size_t>(N), static_cast<std::size_t>(Cout),
                 static_cast<std::size_t>(OD), static_cast<std::size_t>(OH), static_cast<std::size_t>(OW)});
  auto xat = [&](long n, long c, long d, long h, long w) {
    return x.data[((((static_cast<std::size_t>(n) * x.dim(1) + static_cast<std::size_t>(c)) * x.dim(2) +
                     static_cast<std::size_t>(d)) * x.dim(3) + static_cast<std::size_t>(h)) * x.dim(4) +
                   static_cast<std::size_t>(w))];
  };
  std::size_t o = 0;
  for (long n = 0; n < N; ++n)
    for (long co = 0; co < Cout; ++co)
      for (long od = 0; od < OD; ++od)
        for (long oh = 0; oh < OH; ++oh)
          for (long ow = 0; ow < OW; ++ow, ++o) {
            T acc = bias.data[static_cast<std::size_t>(co)];
            for (long ci = 0; ci < Cin; ++ci)
              for (long kz = 0; kz < k; ++kz)
                for (long ky = 0; ky < k; ++ky)
                  for (long kx = 0; kx < k; ++kx) {
                    const long id = od * s - p + kz, ih = oh * s - p + ky, iw = ow * s - p + kx;
                    if (id < 0 || id >= D || ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                    acc += xat(n, ci, id, ih, iw) *
                           kernel.data[((((static_cast<std::size_t>(co) * kernel.dim(1) + static_cast<std::size_t>(ci)) *
                                          kernel.dim(2) + static_cast<std::size_t>(kz)) * kernel.dim(3) +
                                         static_cast<std::size_t>(ky)) * kernel.dim(4) + static_cast<std::size_t>(kx))];
                  }
            out.data[o] = acc;
          }
  return out;
}

template <typename T>
Tensor<T> tconv3d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                  const ops::ConvGeom& g) {
  const long N = static_cast<long>(x.dim(0)), Cin = static_cast<long>(x.dim(1));
  const long D = static_cast<long>(x.dim(2)), H = static_cast<long>(x.dim(3)), W = static_cast<long>(x.dim(4));
  const long Cout = static_cast<long>(kernel.dim(0)), k = g.kernel, s = g.stride;
  const long OD = (D - 1) * s + k, OH = (H - 1) * s + k, OW = (W - 1) * s + k;
  Tensor<T> out({static_cast<std::size_t>(N), static_cast<std::size_t>(Cout),
                 static_cast<std::size_t>(OD), static_cast<std::size_t>(OH), static_cast<std::size_t>(OW)});
  for (std::size_t i = 0; i < out.numel(); ++i) {
    const std::size_t co = (i / (static_cast<std::size_t>(OD * OH * OW))) % static_cast<std::size_t>(Cout);
    out.data[i] = bias.data[co];
  }
  // Scatter-add rule: every input voxel adds its kernel-weighted footprint.
  for (long n = 0; n < N; ++n)
    for (long co = 0; co < Cout; ++co)
      for (long ci = 0; ci < Cin; ++ci)
        for (long d = 0; d < D; ++d)
          for (long h = 0; h < H; ++h)
            for (long w = 0; w < W; ++w)
              for (long kz = 0; kz < k; ++kz)
                for (long ky = 0; ky < k; ++ky)
                  for (long kx = 0; kx < k; ++kx) {
                    const std::size_t oi =
                        ((((static_cast<std::size_t>(n) * static_cast<std::size_t>(Cout) + static_cast<std::size_t>(co)) *
                           static_cast<std::size_t>(OD) + static_cast<std::size_t>(d * s + kz)) * static_cast<std::size_t>(OH) +
                          static_cast<std::size_t>(h * s + ky)) * static_cast<std::size_t>(OW) + static_cast<std::size_t>(w * s + kx));
                    out.data[oi] +=
                        x.data[((((static_cast<std::size_t>(n) * x.dim(1) + static_cast<std::size_t>(ci)) * x.dim(2) +
                                  static_cast<std::size_t>(d)) * x.dim(3) + static_cast<std::size_t>(h)) * x.dim(4) +
                                static_cast<std::size_t>(w))] *
                        kernel.data[((((static_cast<std::size_t>(co) * kernel.dim(1) + static_cast<std::size_t>(ci)) *
                                       kernel.dim(2) + static_cast<std::size_t>(kz)) * kernel.dim(3) +
                                      static_cast<std::size_t>(ky)) * kernel.dim(4) + static_cast<std::size_t>(kx))];
                  }
  return out;
}

template <typename T>
Tensor<T> maxpool3d(const Tensor<T>& x) {
  const std::size_t N = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  Tensor<T> out({N, C, D / 2, H / 2, W / 2});
  std::size_t o = 0;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t od = 0; od < D / 2; ++od)
        for (std::size_t oh = 0; oh < H / 2; ++oh)
          for (std::size_t ow = 0; ow < W / 2; ++ow, ++o) {
            T best = -std::numeric_limits<T>::infinity();
            for (std::size_t dz = 0; dz < 2; ++dz)
              for (std::size_t dy = 0; dy < 2; ++dy)
                for (std::size_t dx = 0; dx < 2; ++dx) {
                  const T v = x.data[(((n * C + c) * D + 2 * od + dz) * H + 2 * oh + dy) * W + 2 * ow + dx];
                  if (v > best) best = v;
                }
            out.data[o] = best;
          }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const std::size_t N = x.dim(0), C = x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
  Tensor<T> out({N, C});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c) {
      T sum = T(0);
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w) sum += x.data[(((n * C + c) * D + d) * H + h) * W + w];
      out.data[n * C + c] = sum / static_cast<T>(D * H * W);
    }
  return out;
}

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  const std::size_t N = x.dim(0), Cin = x.dim(1), Cout = w.dim(0);
  Tensor<T> out({N, Cout});
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t co = 0; co < Cout; ++co) {
      T acc = b.data[co];
      for (std::size_t ci = 0; ci < Cin; ++ci) acc += w.data[co * Cin + ci] * x.data[n * Cin + ci];
      out.data[n * Cout + co] = acc;
    }
  return out;
}

template <typename T>
T mse(const Tensor<T>& pred, const Tensor<T>& truth) {
  T acc = T(0);
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const T d = pred.data[i] - truth.data[i];
    acc += d * d;
  }
  return acc / static_cast<T>(pred.numel());
}

template <typename T>
T mae(const Tensor<T>& pred, const Tensor<T>& truth) {
  T acc = T(0);
  for (std::size_t i = 0; i < pred.numel(); ++i) acc += std::abs(pred.data[i] - truth.data[i]);
  return acc / static_cast<T>(pred.numel());
}

#define GPR3D_INSTANTIATE_REF(T)                                                                   \
  template Tensor<T> conv3d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                               const ops::ConvGeom&);                                              \
  template Tensor<T> tconv3d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                const ops::ConvGeom&);                                             \
  template Tensor<T> maxpool3d<T>(const Tensor<T>&);                                              \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                        \
  template Tensor<T> fully_connected<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);    \
  template T mse<T>(const Tensor<T>&, const Tensor<T>&);                                          \
  template T mae<T>(const Tensor<T>&, const Tensor<T>&);

GPR3D_INSTANTIATE_REF(float)
GPR3D_INSTANTIATE_REF(double)

}  // namespace gpr3d::refops
