#include "gpr3d/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpr3d::ops {

namespace {

struct Dims5 {
  std::size_t n, c, d, h, w;
};

Dims5 dims5(const Shape& s, const char* what) {
  require(s.size() == 5, std::string(what) + ": expected a 5-d N x C x D x H x W tensor, got " +
                             shape_str(s));
  return {s[0], s[1], s[2], s[3], s[4]};
}

inline std::size_t plane(std::size_t d, std::size_t h, std::size_t w) { return d * h * w; }

}  // namespace

std::size_t conv_out_extent(std::size_t in, const ConvGeom& g, const char* axis) {
  std::size_t padded = in + 2 * static_cast<std::size_t>(g.pad);
  require(padded >= static_cast<std::size_t>(g.kernel),
          std::string("conv3d: axis ") + axis + " extent " + std::to_string(in) +
              " smaller than kernel " + std::to_string(g.kernel));
  std::size_t span = padded - static_cast<std::size_t>(g.kernel);
  require(span % static_cast<std::size_t>(g.stride) == 0,
          std::string("conv3d: axis ") + axis + " extent " + std::to_string(in) +
              " not compatible with stride " + std::to_string(g.stride));
  return span / static_cast<std::size_t>(g.stride) + 1;
}

// ---------------------------------------------------------------- conv3d

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                         const ConvGeom& g) {
  const Dims5 xd = dims5(x.shape, "conv3d input");
  const Dims5 kd = dims5(kernel.shape, "conv3d kernel");
  const std::size_t k = static_cast<std::size_t>(g.kernel);
  require(kd.d == k && kd.h == k && kd.w == k, "conv3d: kernel tensor extents do not match geometry");
  require(xd.c == kd.c, "conv3d: input channel axis C=" + std::to_string(xd.c) +
                            " does not match kernel C_in=" + std::to_string(kd.c));
  require(bias.numel() == kd.n, "conv3d: bias length does not match C_out");

  const std::size_t OD = conv_out_extent(xd.d, g, "D");
  const std::size_t OH = conv_out_extent(xd.h, g, "H");
  const std::size_t OW = conv_out_extent(xd.w, g, "W");
  Tensor<T> out({xd.n, kd.n, OD, OH, OW});

  const long p = g.pad;
  const long D = static_cast<long>(xd.d), H = static_cast<long>(xd.h), W = static_cast<long>(xd.w);
  const long lOD = static_cast<long>(OD), lOH = static_cast<long>(OH), lOW = static_cast<long>(OW);
  const std::size_t in_plane = plane(xd.d, xd.h, xd.w);
  const std::size_t out_plane = plane(OD, OH, OW);
  const T* xp = x.ptr();
  const T* kp = kernel.ptr();
  const T* bp = bias.ptr();
  T* op = out.ptr();
  const long N = static_cast<long>(xd.n), Cout = static_cast<long>(kd.n),
             Cin = static_cast<long>(xd.c), lk = static_cast<long>(k);

  if (g.stride == 1 && g.kernel == 3 && g.pad == 1 && xd.w >= 2) {
    // Fused 3-tap stencil for the shape-preserving 3x3x3 convolution that
    // dominates both networks: one pass per (kz, ky) row pair applies all
    // three kx taps.
#pragma omp parallel for collapse(2) schedule(static)
    for (long n = 0; n < N; ++n) {
      for (long co = 0; co < Cout; ++co) {
        T* outc = op + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
        std::fill(outc, outc + out_plane, bp[co]);
        for (long ci = 0; ci < Cin; ++ci) {
          const T* inc = xp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
          const T* kc = kp + (static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * 27;
          for (long kz = 0; kz < 3; ++kz) {
            const long od_lo = std::max(0L, 1 - kz), od_hi = std::min(lOD, D + 1 - kz);
            for (long ky = 0; ky < 3; ++ky) {
              const long oh_lo = std::max(0L, 1 - ky), oh_hi = std::min(lOH, H + 1 - ky);
              const T w0 = kc[kz * 9 + ky * 3 + 0], w1 = kc[kz * 9 + ky * 3 + 1],
                      w2 = kc[kz * 9 + ky * 3 + 2];
              for (long od = od_lo; od < od_hi; ++od) {
                const long id = od + kz - 1;
                for (long oh = oh_lo; oh < oh_hi; ++oh) {
                  const long ih = oh + ky - 1;
                  const T* irow = inc + (static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w;
                  T* orow = outc + (static_cast<std::size_t>(od) * OH + static_cast<std::size_t>(oh)) * OW;
                  orow[0] += w1 * irow[0] + w2 * irow[1];
#pragma omp simd
                  for (long ow = 1; ow < W - 1; ++ow)
                    orow[ow] += w0 * irow[ow - 1] + w1 * irow[ow] + w2 * irow[ow + 1];
                  orow[W - 1] += w0 * irow[W - 2] + w1 * irow[W - 1];
                }
              }
            }
          }
        }
      }
    }
    return out;
  }

  if (g.stride == 1) {
    // Row-accumulation form: for each kernel tap, add a scaled shifted input
    // row into the output row. Accumulation order is fixed per output plane.
#pragma omp parallel for collapse(2) schedule(static)
    for (long n = 0; n < N; ++n) {
      for (long co = 0; co < Cout; ++co) {
        T* outc = op + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
        std::fill(outc, outc + out_plane, bp[co]);
        for (long ci = 0; ci < Cin; ++ci) {
          const T* inc = xp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
          for (long kz = 0; kz < lk; ++kz) {
            const long od_lo = std::max(0L, p - kz), od_hi = std::min(lOD, D + p - kz);
            for (long ky = 0; ky < lk; ++ky) {
              const long oh_lo = std::max(0L, p - ky), oh_hi = std::min(lOH, H + p - ky);
              for (long kx = 0; kx < lk; ++kx) {
                const T wgt = kp[(((static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * k +
                                   static_cast<std::size_t>(kz)) * k + static_cast<std::size_t>(ky)) * k +
                                 static_cast<std::size_t>(kx)];
                const long ow_lo = std::max(0L, p - kx), ow_hi = std::min(lOW, W + p - kx);
                const long ishift = kx - p;
                for (long od = od_lo; od < od_hi; ++od) {
                  const long id = od - p + kz;
                  for (long oh = oh_lo; oh < oh_hi; ++oh) {
                    const long ih = oh - p + ky;
                    const T* irow = inc + (static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w;
                    T* orow = outc + (static_cast<std::size_t>(od) * OH + static_cast<std::size_t>(oh)) * OW;
#pragma omp simd
                    for (long ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wgt * irow[ow + ishift];
                  }
                }
              }
            }
          }
        }
      }
    }
    return out;
  }

  // General strided path (gather per output element).
  const long s = g.stride;
#pragma omp parallel for collapse(2) schedule(static)
  for (long n = 0; n < N; ++n) {
    for (long co = 0; co < Cout; ++co) {
      T* outc = op + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
      for (long od = 0; od < lOD; ++od)
        for (long oh = 0; oh < lOH; ++oh)
          for (long ow = 0; ow < lOW; ++ow) {
            T acc = bp[co];
            for (long ci = 0; ci < Cin; ++ci) {
              const T* inc = xp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
              for (long kz = 0; kz < lk; ++kz) {
                const long id = od * s - p + kz;
                if (id < 0 || id >= D) continue;
                for (long ky = 0; ky < lk; ++ky) {
                  const long ih = oh * s - p + ky;
                  if (ih < 0 || ih >= H) continue;
                  for (long kx = 0; kx < lk; ++kx) {
                    const long iw = ow * s - p + kx;
                    if (iw < 0 || iw >= W) continue;
                    acc += inc[(static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w +
                               static_cast<std::size_t>(iw)] *
                           kp[(((static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * k +
                                static_cast<std::size_t>(kz)) * k + static_cast<std::size_t>(ky)) * k +
                              static_cast<std::size_t>(kx)];
                  }
                }
              }
            }
            outc[(static_cast<std::size_t>(od) * OH + static_cast<std::size_t>(oh)) * OW + static_cast<std::size_t>(ow)] = acc;
          }
    }
  }
  return out;
}

template <typename T>
void conv3d_backward(const Tensor<T>& x, const Tensor<T>& kernel, const ConvGeom& g,
                     const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dkernel, Tensor<T>* dbias) {
  const Dims5 xd = dims5(x.shape, "conv3d input");
  const Dims5 kd = dims5(kernel.shape, "conv3d kernel");
  const Dims5 yd = dims5(dy.shape, "conv3d output grad");
  const std::size_t k = static_cast<std::size_t>(g.kernel);
  const long p = g.pad, s = g.stride;
  const long D = static_cast<long>(xd.d), H = static_cast<long>(xd.h), W = static_cast<long>(xd.w);
  const long OD = static_cast<long>(yd.d), OH = static_cast<long>(yd.h), OW = static_cast<long>(yd.w);
  const long N = static_cast<long>(xd.n), Cout = static_cast<long>(kd.n), Cin = static_cast<long>(xd.c);
  const long lk = static_cast<long>(k);
  const std::size_t in_plane = plane(xd.d, xd.h, xd.w);
  const std::size_t out_plane = plane(yd.d, yd.h, yd.w);
  const T* xp = x.ptr();
  const T* kp = kernel.ptr();
  const T* dyp = dy.ptr();

  if (dbias) {
    require(dbias->numel() == kd.n, "conv3d: dbias size mismatch");
    T* dbp = dbias->ptr();
#pragma omp parallel for schedule(static)
    for (long co = 0; co < Cout; ++co) {
      T acc = T(0);
      for (long n = 0; n < N; ++n) {
        const T* row = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < out_plane; ++i) acc += row[i];
      }
      dbp[co] += acc;
    }
  }

  if (dkernel && s == 1 && lk == 3 && p == 1 && W >= 2) {
    require(dkernel->shape == kernel.shape, "conv3d: dkernel shape mismatch");
    T* dkp = dkernel->ptr();
    // One pass over the volume per (co, ci) accumulates all 27 taps.
#pragma omp parallel for collapse(2) schedule(static)
    for (long co = 0; co < Cout; ++co) {
      for (long ci = 0; ci < Cin; ++ci) {
        T acc[27] = {};
        for (long n = 0; n < N; ++n) {
          const T* dyc = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
          const T* inc = xp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
          for (long od = 0; od < OD; ++od) {
            for (long kz = 0; kz < 3; ++kz) {
              const long id = od + kz - 1;
              if (id < 0 || id >= D) continue;
              for (long oh = 0; oh < OH; ++oh) {
                const T* dyrow = dyc + (static_cast<std::size_t>(od) * yd.h + static_cast<std::size_t>(oh)) * yd.w;
                for (long ky = 0; ky < 3; ++ky) {
                  const long ih = oh + ky - 1;
                  if (ih < 0 || ih >= H) continue;
                  const T* irow = inc + (static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w;
                  T s0 = dyrow[OW - 1] * irow[OW - 2];
                  T s1 = dyrow[0] * irow[0] + dyrow[OW - 1] * irow[OW - 1];
                  T s2 = dyrow[0] * irow[1];
#pragma omp simd reduction(+ : s0, s1, s2)
                  for (long ow = 1; ow < OW - 1; ++ow) {
                    const T d = dyrow[ow];
                    s0 += d * irow[ow - 1];
                    s1 += d * irow[ow];
                    s2 += d * irow[ow + 1];
                  }
                  acc[kz * 9 + ky * 3 + 0] += s0;
                  acc[kz * 9 + ky * 3 + 1] += s1;
                  acc[kz * 9 + ky * 3 + 2] += s2;
                }
              }
            }
          }
        }
        T* dst = dkp + (static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * 27;
        for (int t = 0; t < 27; ++t) dst[t] += acc[t];
      }
    }
  } else if (dkernel) {
    require(dkernel->shape == kernel.shape, "conv3d: dkernel shape mismatch");
    T* dkp = dkernel->ptr();
#pragma omp parallel for collapse(2) schedule(static)
    for (long co = 0; co < Cout; ++co) {
      for (long ci = 0; ci < Cin; ++ci) {
        for (long kz = 0; kz < lk; ++kz)
          for (long ky = 0; ky < lk; ++ky)
            for (long kx = 0; kx < lk; ++kx) {
              T acc = T(0);
              for (long n = 0; n < N; ++n) {
                const T* dyc = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
                const T* inc = xp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
                for (long od = 0; od < OD; ++od) {
                  const long id = od * s - p + kz;
                  if (id < 0 || id >= D) continue;
                  for (long oh = 0; oh < OH; ++oh) {
                    const long ih = oh * s - p + ky;
                    if (ih < 0 || ih >= H) continue;
                    const T* dyrow = dyc + (static_cast<std::size_t>(od) * yd.h + static_cast<std::size_t>(oh)) * yd.w;
                    if (s == 1) {
                      const long ow_lo = std::max(0L, p - kx), ow_hi = std::min(OW, W + p - kx);
                      const long ishift = kx - p;
                      const T* irow = inc + (static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w;
#pragma omp simd reduction(+ : acc)
                      for (long ow = ow_lo; ow < ow_hi; ++ow) acc += dyrow[ow] * irow[ow + ishift];
                    } else {
                      for (long ow = 0; ow < OW; ++ow) {
                        const long iw = ow * s - p + kx;
                        if (iw < 0 || iw >= W) continue;
                        acc += dyrow[ow] * inc[(static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w +
                                               static_cast<std::size_t>(iw)];
                      }
                    }
                  }
                }
              }
              dkp[(((static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * k + static_cast<std::size_t>(kz)) * k +
                   static_cast<std::size_t>(ky)) * k + static_cast<std::size_t>(kx)] += acc;
            }
      }
    }
  }

  if (dx) {
    require(dx->shape == x.shape, "conv3d: dx shape mismatch");
    T* dxp = dx->ptr();
    if (s == 1 && lk == 3 && p == 1 && W >= 2) {
      // Mirrored fused stencil: dx[iw] += w0*dy[iw+1] + w1*dy[iw] + w2*dy[iw-1].
#pragma omp parallel for collapse(2) schedule(static)
      for (long n = 0; n < N; ++n) {
        for (long ci = 0; ci < Cin; ++ci) {
          T* dxc = dxp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
          for (long co = 0; co < Cout; ++co) {
            const T* dyc = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
            const T* kc = kp + (static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * 27;
            for (long kz = 0; kz < 3; ++kz) {
              const long id_lo = std::max(0L, kz - 1), id_hi = std::min(D, OD + kz - 1);
              for (long ky = 0; ky < 3; ++ky) {
                const long ih_lo = std::max(0L, ky - 1), ih_hi = std::min(H, OH + ky - 1);
                const T w0 = kc[kz * 9 + ky * 3 + 0], w1 = kc[kz * 9 + ky * 3 + 1],
                        w2 = kc[kz * 9 + ky * 3 + 2];
                for (long id = id_lo; id < id_hi; ++id) {
                  const long od = id + 1 - kz;
                  for (long ih = ih_lo; ih < ih_hi; ++ih) {
                    const long oh = ih + 1 - ky;
                    const T* dyrow = dyc + (static_cast<std::size_t>(od) * yd.h + static_cast<std::size_t>(oh)) * yd.w;
                    T* dxrow = dxc + (static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w;
                    dxrow[0] += w0 * dyrow[1] + w1 * dyrow[0];
#pragma omp simd
                    for (long iw = 1; iw < W - 1; ++iw)
                      dxrow[iw] += w0 * dyrow[iw + 1] + w1 * dyrow[iw] + w2 * dyrow[iw - 1];
                    dxrow[W - 1] += w1 * dyrow[W - 1] + w2 * dyrow[W - 2];
                  }
                }
              }
            }
          }
        }
      }
    } else if (s == 1) {
#pragma omp parallel for collapse(2) schedule(static)
      for (long n = 0; n < N; ++n) {
        for (long ci = 0; ci < Cin; ++ci) {
          T* dxc = dxp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
          for (long co = 0; co < Cout; ++co) {
            const T* dyc = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
            for (long kz = 0; kz < lk; ++kz) {
              const long id_lo = std::max(0L, kz - p), id_hi = std::min(D, OD + kz - p);
              for (long ky = 0; ky < lk; ++ky) {
                const long ih_lo = std::max(0L, ky - p), ih_hi = std::min(H, OH + ky - p);
                for (long kx = 0; kx < lk; ++kx) {
                  const T wgt = kp[(((static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * k +
                                     static_cast<std::size_t>(kz)) * k + static_cast<std::size_t>(ky)) * k +
                                   static_cast<std::size_t>(kx)];
                  const long iw_lo = std::max(0L, kx - p), iw_hi = std::min(W, OW + kx - p);
                  const long oshift = p - kx;
                  for (long id = id_lo; id < id_hi; ++id) {
                    const long od = id + p - kz;
                    for (long ih = ih_lo; ih < ih_hi; ++ih) {
                      const long oh = ih + p - ky;
                      const T* dyrow = dyc + (static_cast<std::size_t>(od) * yd.h + static_cast<std::size_t>(oh)) * yd.w;
                      T* dxrow = dxc + (static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w;
#pragma omp simd
                      for (long iw = iw_lo; iw < iw_hi; ++iw) dxrow[iw] += wgt * dyrow[iw + oshift];
                    }
                  }
                }
              }
            }
          }
        }
      }
    } else {
#pragma omp parallel for collapse(2) schedule(static)
      for (long n = 0; n < N; ++n) {
        for (long ci = 0; ci < Cin; ++ci) {
          T* dxc = dxp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
          for (long id = 0; id < D; ++id)
            for (long ih = 0; ih < H; ++ih)
              for (long iw = 0; iw < W; ++iw) {
                T acc = T(0);
                for (long co = 0; co < Cout; ++co) {
                  const T* dyc = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
                  for (long kz = 0; kz < lk; ++kz) {
                    const long num_d = id + p - kz;
                    if (num_d < 0 || num_d % s) continue;
                    const long od = num_d / s;
                    if (od >= OD) continue;
                    for (long ky = 0; ky < lk; ++ky) {
                      const long num_h = ih + p - ky;
                      if (num_h < 0 || num_h % s) continue;
                      const long oh = num_h / s;
                      if (oh >= OH) continue;
                      for (long kx = 0; kx < lk; ++kx) {
                        const long num_w = iw + p - kx;
                        if (num_w < 0 || num_w % s) continue;
                        const long ow = num_w / s;
                        if (ow >= OW) continue;
                        acc += dyc[(static_cast<std::size_t>(od) * yd.h + static_cast<std::size_t>(oh)) * yd.w +
                                   static_cast<std::size_t>(ow)] *
                               kp[(((static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * k +
                                    static_cast<std::size_t>(kz)) * k + static_cast<std::size_t>(ky)) * k +
                                  static_cast<std::size_t>(kx)];
                      }
                    }
                  }
                }
                dxc[(static_cast<std::size_t>(id) * xd.h + static_cast<std::size_t>(ih)) * xd.w + static_cast<std::size_t>(iw)] += acc;
              }
        }
      }
    }
  }
}

// ------------------------------------------------------------ tconv3d

template <typename T>
Tensor<T> tconv3d_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                          const ConvGeom& g) {
  const Dims5 xd = dims5(x.shape, "tconv3d input");
  const Dims5 kd = dims5(kernel.shape, "tconv3d kernel");
  const std::size_t k = static_cast<std::size_t>(g.kernel);
  require(kd.d == k && kd.h == k && kd.w == k, "tconv3d: kernel tensor extents do not match geometry");
  require(xd.c == kd.c, "tconv3d: input channel axis C=" + std::to_string(xd.c) +
                            " does not match kernel C_in=" + std::to_string(kd.c));
  require(bias.numel() == kd.n, "tconv3d: bias length does not match C_out");
  require(g.pad == 0, "tconv3d: only pad=0 is supported");
  require(g.kernel >= g.stride, "tconv3d: kernel must be >= stride");

  const long s = g.stride, lk = static_cast<long>(k);
  const long D = static_cast<long>(xd.d), H = static_cast<long>(xd.h), W = static_cast<long>(xd.w);
  const long OD = (D - 1) * s + lk, OH = (H - 1) * s + lk, OW = (W - 1) * s + lk;
  Tensor<T> out({xd.n, kd.n, static_cast<std::size_t>(OD), static_cast<std::size_t>(OH),
                 static_cast<std::size_t>(OW)});
  const std::size_t in_plane = plane(xd.d, xd.h, xd.w);
  const std::size_t out_plane = static_cast<std::size_t>(OD * OH * OW);
  const T* xp = x.ptr();
  const T* kp = kernel.ptr();
  const T* bp = bias.ptr();
  T* op = out.ptr();
  const long N = static_cast<long>(xd.n), Cout = static_cast<long>(kd.n), Cin = static_cast<long>(xd.c);

#pragma omp parallel for collapse(2) schedule(static)
  for (long n = 0; n < N; ++n) {
    for (long co = 0; co < Cout; ++co) {
      T* outc = op + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
      std::fill(outc, outc + out_plane, bp[co]);
      for (long ci = 0; ci < Cin; ++ci) {
        const T* inc = xp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
        const T* kc = kp + (static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * k * k * k;
        for (long d = 0; d < D; ++d)
          for (long kz = 0; kz < lk; ++kz) {
            const long od = d * s + kz;
            for (long h = 0; h < H; ++h)
              for (long ky = 0; ky < lk; ++ky) {
                const long oh = h * s + ky;
                const T* irow = inc + (static_cast<std::size_t>(d) * xd.h + static_cast<std::size_t>(h)) * xd.w;
                T* orow = outc + (static_cast<std::size_t>(od) * static_cast<std::size_t>(OH) + static_cast<std::size_t>(oh)) * static_cast<std::size_t>(OW);
                const T* krow = kc + (static_cast<std::size_t>(kz) * k + static_cast<std::size_t>(ky)) * k;
                for (long w = 0; w < W; ++w) {
                  const T xv = irow[w];
                  T* obase = orow + w * s;
                  for (long kx = 0; kx < lk; ++kx) obase[kx] += xv * krow[kx];
                }
              }
          }
      }
    }
  }
  return out;
}

template <typename T>
void tconv3d_backward(const Tensor<T>& x, const Tensor<T>& kernel, const ConvGeom& g,
                      const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dkernel, Tensor<T>* dbias) {
  const Dims5 xd = dims5(x.shape, "tconv3d input");
  const Dims5 kd = dims5(kernel.shape, "tconv3d kernel");
  const Dims5 yd = dims5(dy.shape, "tconv3d output grad");
  const std::size_t k = static_cast<std::size_t>(g.kernel);
  const long s = g.stride, lk = static_cast<long>(k);
  const long N = static_cast<long>(xd.n), Cout = static_cast<long>(kd.n), Cin = static_cast<long>(xd.c);
  const long D = static_cast<long>(xd.d), H = static_cast<long>(xd.h), W = static_cast<long>(xd.w);
  const std::size_t in_plane = plane(xd.d, xd.h, xd.w);
  const std::size_t out_plane = plane(yd.d, yd.h, yd.w);
  const T* xp = x.ptr();
  const T* kp = kernel.ptr();
  const T* dyp = dy.ptr();

  if (dbias) {
    T* dbp = dbias->ptr();
#pragma omp parallel for schedule(static)
    for (long co = 0; co < Cout; ++co) {
      T acc = T(0);
      for (long n = 0; n < N; ++n) {
        const T* row = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
#pragma omp simd reduction(+ : acc)
        for (std::size_t i = 0; i < out_plane; ++i) acc += row[i];
      }
      dbp[co] += acc;
    }
  }

  if (dkernel) {
    T* dkp = dkernel->ptr();
#pragma omp parallel for collapse(2) schedule(static)
    for (long co = 0; co < Cout; ++co) {
      for (long ci = 0; ci < Cin; ++ci) {
        for (long kz = 0; kz < lk; ++kz)
          for (long ky = 0; ky < lk; ++ky)
            for (long kx = 0; kx < lk; ++kx) {
              T acc = T(0);
              for (long n = 0; n < N; ++n) {
                const T* inc = xp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
                const T* dyc = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
                for (long d = 0; d < D; ++d)
                  for (long h = 0; h < H; ++h) {
                    const T* irow = inc + (static_cast<std::size_t>(d) * xd.h + static_cast<std::size_t>(h)) * xd.w;
                    const T* dyrow = dyc + (static_cast<std::size_t>(d * s + kz) * yd.h + static_cast<std::size_t>(h * s + ky)) * yd.w + kx;
#pragma omp simd reduction(+ : acc)
                    for (long w = 0; w < W; ++w) acc += irow[w] * dyrow[w * s];
                  }
              }
              dkp[(((static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * k + static_cast<std::size_t>(kz)) * k +
                   static_cast<std::size_t>(ky)) * k + static_cast<std::size_t>(kx)] += acc;
            }
      }
    }
  }

  if (dx) {
    T* dxp = dx->ptr();
#pragma omp parallel for collapse(2) schedule(static)
    for (long n = 0; n < N; ++n) {
      for (long ci = 0; ci < Cin; ++ci) {
        T* dxc = dxp + (static_cast<std::size_t>(n) * xd.c + static_cast<std::size_t>(ci)) * in_plane;
        for (long d = 0; d < D; ++d)
          for (long h = 0; h < H; ++h)
            for (long w = 0; w < W; ++w) {
              T acc = T(0);
              for (long co = 0; co < Cout; ++co) {
                const T* dyc = dyp + (static_cast<std::size_t>(n) * kd.n + static_cast<std::size_t>(co)) * out_plane;
                const T* kc = kp + (static_cast<std::size_t>(co) * kd.c + static_cast<std::size_t>(ci)) * k * k * k;
                for (long kz = 0; kz < lk; ++kz)
                  for (long ky = 0; ky < lk; ++ky) {
                    const T* dyrow = dyc + (static_cast<std::size_t>(d * s + kz) * yd.h + static_cast<std::size_t>(h * s + ky)) * yd.w +
                                     (w * s);
                    const T* krow = kc + (static_cast<std::size_t>(kz) * k + static_cast<std::size_t>(ky)) * k;
#pragma omp simd reduction(+ : acc)
                    for (long kx = 0; kx < lk; ++kx) acc += dyrow[kx] * krow[kx];
                  }
              }
              dxc[(static_cast<std::size_t>(d) * xd.h + static_cast<std::size_t>(h)) * xd.w + static_cast<std::size_t>(w)] += acc;
            }
      }
    }
  }
}

// ------------------------------------------------------------- pooling

template <typename T>
Tensor<T> maxpool3d_forward(const Tensor<T>& x, std::vector<std::int64_t>& argmax) {
  const Dims5 xd = dims5(x.shape, "max_pool3d input");
  require(xd.d % 2 == 0, "max_pool3d: axis D extent " + std::to_string(xd.d) + " is odd");
  require(xd.h % 2 == 0, "max_pool3d: axis H extent " + std::to_string(xd.h) + " is odd");
  require(xd.w % 2 == 0, "max_pool3d: axis W extent " + std::to_string(xd.w) + " is odd");
  const std::size_t OD = xd.d / 2, OH = xd.h / 2, OW = xd.w / 2;
  Tensor<T> out({xd.n, xd.c, OD, OH, OW});
  argmax.assign(out.numel(), 0);
  const T* xp = x.ptr();
  T* op = out.ptr();
  std::int64_t* ap = argmax.data();
  const long NC = static_cast<long>(xd.n * xd.c);
  const std::size_t in_plane = plane(xd.d, xd.h, xd.w);
  const std::size_t out_plane = plane(OD, OH, OW);

#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) {
    const T* inc = xp + static_cast<std::size_t>(nc) * in_plane;
    T* outc = op + static_cast<std::size_t>(nc) * out_plane;
    std::int64_t* ac = ap + static_cast<std::size_t>(nc) * out_plane;
    for (std::size_t od = 0; od < OD; ++od)
      for (std::size_t oh = 0; oh < OH; ++oh)
        for (std::size_t ow = 0; ow < OW; ++ow) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t dz = 0; dz < 2; ++dz)
            for (std::size_t dyy = 0; dyy < 2; ++dyy)
              for (std::size_t dxx = 0; dxx < 2; ++dxx) {
                const std::size_t idx = ((2 * od + dz) * xd.h + (2 * oh + dyy)) * xd.w + (2 * ow + dxx);
                if (inc[idx] > best) {  // first occurrence wins ties
                  best = inc[idx];
                  best_idx = idx;
                }
              }
          const std::size_t o = (od * OH + oh) * OW + ow;
          outc[o] = best;
          ac[o] = static_cast<std::int64_t>(static_cast<std::size_t>(nc) * in_plane + best_idx);
        }
  }
  return out;
}

template <typename T>
void maxpool3d_backward(const std::vector<std::int64_t>& argmax, const Tensor<T>& dy, Tensor<T>* dx) {
  require(argmax.size() == dy.numel(), "max_pool3d: argmax/grad size mismatch");
  T* dxp = dx->ptr();
  const T* dyp = dy.ptr();
  const long n = static_cast<long>(dy.numel());
  // Pool blocks are disjoint, so distinct outputs never write the same slot.
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) dxp[argmax[static_cast<std::size_t>(i)]] += dyp[i];
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  const Dims5 xd = dims5(x.shape, "global_avg_pool input");
  const std::size_t vol = plane(xd.d, xd.h, xd.w);
  require(vol > 0, "global_avg_pool: empty spatial extents");
  Tensor<T> out({xd.n, xd.c});
  const T* xp = x.ptr();
  T* op = out.ptr();
  const long NC = static_cast<long>(xd.n * xd.c);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) {
    const T* inc = xp + static_cast<std::size_t>(nc) * vol;
    T acc = T(0);
#pragma omp simd reduction(+ : acc)
    for (std::size_t i = 0; i < vol; ++i) acc += inc[i];
    op[nc] = acc / static_cast<T>(vol);
  }
  return out;
}

template <typename T>
void global_avg_pool_backward(const Shape& in_shape, const Tensor<T>& dy, Tensor<T>* dx) {
  const Dims5 xd = dims5(in_shape, "global_avg_pool input");
  const std::size_t vol = plane(xd.d, xd.h, xd.w);
  const T* dyp = dy.ptr();
  T* dxp = dx->ptr();
  const long NC = static_cast<long>(xd.n * xd.c);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) {
    const T g = dyp[nc] / static_cast<T>(vol);
    T* dxc = dxp + static_cast<std::size_t>(nc) * vol;
#pragma omp simd
    for (std::size_t i = 0; i < vol; ++i) dxc[i] += g;
  }
}

// ------------------------------------------------------ fully connected

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  require(x.ndim() == 2, "fully_connected: expected N x C input, got " + shape_str(x.shape));
  require(w.ndim() == 2, "fully_connected: expected C_out x C_in weights");
  const std::size_t N = x.dim(0), Cin = x.dim(1), Cout = w.dim(0);
  require(w.dim(1) == Cin, "fully_connected: input dim " + std::to_string(Cin) +
                               " does not match weight C_in " + std::to_string(w.dim(1)));
  require(b.numel() == Cout, "fully_connected: bias length does not match C_out");
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
void fully_connected_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                              Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db) {
  const std::size_t N = x.dim(0), Cin = x.dim(1), Cout = w.dim(0);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t co = 0; co < Cout; ++co) {
      const T g = dy.data[n * Cout + co];
      if (db) db->data[co] += g;
      for (std::size_t ci = 0; ci < Cin; ++ci) {
        if (dw) dw->data[co * Cin + ci] += g * x.data[n * Cin + ci];
        if (dx) dx->data[n * Cin + ci] += g * w.data[co * Cin + ci];
      }
    }
}

// ---------------------------------------------------- batch normalization

template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          T eps, T momentum, Tensor<T>& running_mean, Tensor<T>& running_var,
                          BnCache<T>* cache) {
  const Dims5 xd = dims5(x.shape, "batch_norm input");
  const std::size_t C = xd.c, vol = plane(xd.d, xd.h, xd.w);
  require(gamma.numel() == C && beta.numel() == C, "batch_norm: affine parameter size mismatch");
  const std::size_t M = xd.n * vol;
  Tensor<T> out(x.shape);
  Tensor<T> mean({C}), invstd({C});
  const T* xp = x.ptr();
  T* op = out.ptr();

#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(C); ++c) {
    T sum = T(0);
    for (std::size_t n = 0; n < xd.n; ++n) {
      const T* xc = xp + (n * C + static_cast<std::size_t>(c)) * vol;
#pragma omp simd reduction(+ : sum)
      for (std::size_t i = 0; i < vol; ++i) sum += xc[i];
    }
    const T mu = sum / static_cast<T>(M);
    T var_sum = T(0);
    for (std::size_t n = 0; n < xd.n; ++n) {
      const T* xc = xp + (n * C + static_cast<std::size_t>(c)) * vol;
#pragma omp simd reduction(+ : var_sum)
      for (std::size_t i = 0; i < vol; ++i) var_sum += (xc[i] - mu) * (xc[i] - mu);
    }
    const T var = var_sum / static_cast<T>(M);
    const T inv = T(1) / std::sqrt(var + eps);
    mean.data[static_cast<std::size_t>(c)] = mu;
    invstd.data[static_cast<std::size_t>(c)] = inv;
    const T g = gamma.data[static_cast<std::size_t>(c)], bta = beta.data[static_cast<std::size_t>(c)];
    for (std::size_t n = 0; n < xd.n; ++n) {
      const T* xc = xp + (n * C + static_cast<std::size_t>(c)) * vol;
      T* oc = op + (n * C + static_cast<std::size_t>(c)) * vol;
#pragma omp simd
      for (std::size_t i = 0; i < vol; ++i) oc[i] = g * (xc[i] - mu) * inv + bta;
    }
    running_mean.data[static_cast<std::size_t>(c)] =
        (T(1) - momentum) * running_mean.data[static_cast<std::size_t>(c)] + momentum * mu;
    running_var.data[static_cast<std::size_t>(c)] =
        (T(1) - momentum) * running_var.data[static_cast<std::size_t>(c)] + momentum * var;
  }
  if (cache) {
    cache->mean = std::move(mean);
    cache->invstd = std::move(invstd);
  }
  return out;
}

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          T eps, const Tensor<T>& running_mean, const Tensor<T>& running_var) {
  const Dims5 xd = dims5(x.shape, "batch_norm input");
  const std::size_t C = xd.c, vol = plane(xd.d, xd.h, xd.w);
  Tensor<T> out(x.shape);
  const T* xp = x.ptr();
  T* op = out.ptr();
#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(C); ++c) {
    const T mu = running_mean.data[static_cast<std::size_t>(c)];
    const T inv = T(1) / std::sqrt(running_var.data[static_cast<std::size_t>(c)] + eps);
    const T g = gamma.data[static_cast<std::size_t>(c)], bta = beta.data[static_cast<std::size_t>(c)];
    for (std::size_t n = 0; n < xd.n; ++n) {
      const T* xc = xp + (n * C + static_cast<std::size_t>(c)) * vol;
      T* oc = op + (n * C + static_cast<std::size_t>(c)) * vol;
#pragma omp simd
      for (std::size_t i = 0; i < vol; ++i) oc[i] = g * (xc[i] - mu) * inv + bta;
    }
  }
  return out;
}

template <typename T>
void batchnorm_backward_train(const Tensor<T>& x, const Tensor<T>& gamma, const BnCache<T>& cache,
                              const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dgamma,
                              Tensor<T>* dbeta) {
  const Dims5 xd = dims5(x.shape, "batch_norm input");
  const std::size_t C = xd.c, vol = plane(xd.d, xd.h, xd.w);
  const std::size_t M = xd.n * vol;
  const T* xp = x.ptr();
  const T* dyp = dy.ptr();

#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(C); ++c) {
    const std::size_t cs = static_cast<std::size_t>(c);
    const T mu = cache.mean.data[cs];
    const T inv = cache.invstd.data[cs];
    T s1 = T(0), s2 = T(0);  // sum(dy), sum(dy * xhat)
    for (std::size_t n = 0; n < xd.n; ++n) {
      const T* xc = xp + (n * C + cs) * vol;
      const T* dyc = dyp + (n * C + cs) * vol;
#pragma omp simd reduction(+ : s1, s2)
      for (std::size_t i = 0; i < vol; ++i) {
        s1 += dyc[i];
        s2 += dyc[i] * (xc[i] - mu) * inv;
      }
    }
    if (dgamma) dgamma->data[cs] += s2;
    if (dbeta) dbeta->data[cs] += s1;
    if (dx) {
      const T g = gamma.data[cs];
      const T m1 = s1 / static_cast<T>(M), m2 = s2 / static_cast<T>(M);
      for (std::size_t n = 0; n < xd.n; ++n) {
        const T* xc = xp + (n * C + cs) * vol;
        const T* dyc = dyp + (n * C + cs) * vol;
        T* dxc = dx->ptr() + (n * C + cs) * vol;
#pragma omp simd
        for (std::size_t i = 0; i < vol; ++i)
          dxc[i] += g * inv * (dyc[i] - m1 - (xc[i] - mu) * inv * m2);
      }
    }
  }
}

template <typename T>
void batchnorm_backward_infer(const Tensor<T>& gamma, const Tensor<T>& invstd_infer,
                              const Tensor<T>& dy, Tensor<T>* dx) {
  const Dims5 xd = dims5(dy.shape, "batch_norm grad");
  const std::size_t C = xd.c, vol = plane(xd.d, xd.h, xd.w);
  const T* dyp = dy.ptr();
#pragma omp parallel for schedule(static)
  for (long c = 0; c < static_cast<long>(C); ++c) {
    const std::size_t cs = static_cast<std::size_t>(c);
    const T scale = gamma.data[cs] * invstd_infer.data[cs];
    for (std::size_t n = 0; n < xd.n; ++n) {
      const T* dyc = dyp + (n * C + cs) * vol;
      T* dxc = dx->ptr() + (n * C + cs) * vol;
#pragma omp simd
      for (std::size_t i = 0; i < vol; ++i) dxc[i] += scale * dyc[i];
    }
  }
}

// ----------------------------------------------------------- elementwise

template <typename T>
Tensor<T> activation(ActKind kind, const Tensor<T>& x) {
  Tensor<T> out(x.shape);
  const T* xp = x.ptr();
  T* op = out.ptr();
  const long n = static_cast<long>(x.numel());
  switch (kind) {
    case ActKind::ReLU:
#pragma omp parallel for simd schedule(static)
      for (long i = 0; i < n; ++i) op[i] = xp[i] > T(0) ? xp[i] : T(0);
      break;
    case ActKind::Sigmoid:
#pragma omp parallel for schedule(static)
      for (long i = 0; i < n; ++i) op[i] = T(1) / (T(1) + std::exp(-xp[i]));
      break;
    case ActKind::Linear:
      out.data = x.data;
      break;
  }
  return out;
}

template <typename T>
void activation_backward(ActKind kind, const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                         Tensor<T>* dx) {
  const T* xp = x.ptr();
  const T* yp = y.ptr();
  const T* dyp = dy.ptr();
  T* dxp = dx->ptr();
  const long n = static_cast<long>(dy.numel());
  switch (kind) {
    case ActKind::ReLU:
#pragma omp parallel for simd schedule(static)
      for (long i = 0; i < n; ++i) dxp[i] += xp[i] > T(0) ? dyp[i] : T(0);
      break;
    case ActKind::Sigmoid:
#pragma omp parallel for simd schedule(static)
      for (long i = 0; i < n; ++i) dxp[i] += dyp[i] * yp[i] * (T(1) - yp[i]);
      break;
    case ActKind::Linear:
#pragma omp parallel for simd schedule(static)
      for (long i = 0; i < n; ++i) dxp[i] += dyp[i];
      break;
  }
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(same_shape(a, b), "add: shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  Tensor<T> out(a.shape);
  const T* ap = a.ptr();
  const T* bp = b.ptr();
  T* op = out.ptr();
  const long n = static_cast<long>(a.numel());
#pragma omp parallel for simd schedule(static)
  for (long i = 0; i < n; ++i) op[i] = ap[i] + bp[i];
  return out;
}

// --------------------------------------------------- concat / rescale

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& xs) {
  require(!xs.empty(), "concat_channels: no inputs");
  const Dims5 first = dims5(xs[0]->shape, "concat_channels input");
  std::size_t total_c = 0;
  for (const Tensor<T>* t : xs) {
    const Dims5 d = dims5(t->shape, "concat_channels input");
    require(d.n == first.n && d.d == first.d && d.h == first.h && d.w == first.w,
            "concat_channels: spatial extents differ: " + shape_str(xs[0]->shape) + " vs " +
                shape_str(t->shape));
    total_c += d.c;
  }
  Tensor<T> out({first.n, total_c, first.d, first.h, first.w});
  const std::size_t vol = plane(first.d, first.h, first.w);
  for (std::size_t n = 0; n < first.n; ++n) {
    std::size_t c0 = 0;
    for (const Tensor<T>* t : xs) {
      const std::size_t tc = t->dim(1);
      std::copy(t->ptr() + n * tc * vol, t->ptr() + (n + 1) * tc * vol,
                out.ptr() + (n * total_c + c0) * vol);
      c0 += tc;
    }
  }
  return out;
}

template <typename T>
void concat_channels_backward(const std::vector<Shape>& in_shapes, const Tensor<T>& dy,
                              std::vector<Tensor<T>*> dxs) {
  const Dims5 yd = dims5(dy.shape, "concat_channels grad");
  const std::size_t vol = plane(yd.d, yd.h, yd.w);
  for (std::size_t n = 0; n < yd.n; ++n) {
    std::size_t c0 = 0;
    for (std::size_t b = 0; b < in_shapes.size(); ++b) {
      const std::size_t tc = in_shapes[b][1];
      if (dxs[b]) {
        const T* src = dy.ptr() + (n * yd.c + c0) * vol;
        T* dst = dxs[b]->ptr() + n * tc * vol;
        const long cnt = static_cast<long>(tc * vol);
#pragma omp parallel for simd schedule(static)
        for (long i = 0; i < cnt; ++i) dst[i] += src[i];
      }
      c0 += tc;
    }
  }
}

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<std::size_t>& widths) {
  const Dims5 xd = dims5(x.shape, "split_channels input");
  std::size_t total = 0;
  for (std::size_t w : widths) total += w;
  require(total == xd.c, "split_channels: widths do not sum to channel count");
  const std::size_t vol = plane(xd.d, xd.h, xd.w);
  std::vector<Tensor<T>> out;
  std::size_t c0 = 0;
  for (std::size_t w : widths) {
    Tensor<T> t({xd.n, w, xd.d, xd.h, xd.w});
    for (std::size_t n = 0; n < xd.n; ++n)
      std::copy(x.ptr() + (n * xd.c + c0) * vol, x.ptr() + (n * xd.c + c0 + w) * vol,
                t.ptr() + n * w * vol);
    out.push_back(std::move(t));
    c0 += w;
  }
  return out;
}

template <typename T>
Tensor<T> rescale_channels(const Tensor<T>& x, const Tensor<T>& v) {
  const Dims5 xd = dims5(x.shape, "rescale input");
  require(v.ndim() == 2 && v.dim(0) == xd.n && v.dim(1) == xd.c,
          "rescale: expected N x C weights matching feature channels");
  Tensor<T> out(x.shape);
  const std::size_t vol = plane(xd.d, xd.h, xd.w);
  const long NC = static_cast<long>(xd.n * xd.c);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) {
    const T s = v.data[static_cast<std::size_t>(nc)];
    const T* xc = x.ptr() + static_cast<std::size_t>(nc) * vol;
    T* oc = out.ptr() + static_cast<std::size_t>(nc) * vol;
#pragma omp simd
    for (std::size_t i = 0; i < vol; ++i) oc[i] = s * xc[i];
  }
  return out;
}

template <typename T>
void rescale_channels_backward(const Tensor<T>& x, const Tensor<T>& v, const Tensor<T>& dy,
                               Tensor<T>* dx, Tensor<T>* dv) {
  const Dims5 xd = dims5(x.shape, "rescale input");
  const std::size_t vol = plane(xd.d, xd.h, xd.w);
  const long NC = static_cast<long>(xd.n * xd.c);
#pragma omp parallel for schedule(static)
  for (long nc = 0; nc < NC; ++nc) {
    const std::size_t off = static_cast<std::size_t>(nc) * vol;
    const T s = v.data[static_cast<std::size_t>(nc)];
    const T* xc = x.ptr() + off;
    const T* dyc = dy.ptr() + off;
    if (dx) {
      T* dxc = dx->ptr() + off;
#pragma omp simd
      for (std::size_t i = 0; i < vol; ++i) dxc[i] += s * dyc[i];
    }
    if (dv) {
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (std::size_t i = 0; i < vol; ++i) acc += dyc[i] * xc[i];
      dv->data[static_cast<std::size_t>(nc)] += acc;
    }
  }
}

// ------------------------------------------------- explicit instantiation

#define GPR3D_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> conv3d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                       const ConvGeom&);                                          \
  template void conv3d_backward<T>(const Tensor<T>&, const Tensor<T>&, const ConvGeom&,          \
                                   const Tensor<T>&, Tensor<T>*, Tensor<T>*, Tensor<T>*);        \
  template Tensor<T> tconv3d_forward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                        const ConvGeom&);                                         \
  template void tconv3d_backward<T>(const Tensor<T>&, const Tensor<T>&, const ConvGeom&,         \
                                    const Tensor<T>&, Tensor<T>*, Tensor<T>*, Tensor<T>*);       \
  template Tensor<T> maxpool3d_forward<T>(const Tensor<T>&, std::vector<std::int64_t>&);         \
  template void maxpool3d_backward<T>(const std::vector<std::int64_t>&, const Tensor<T>&,        \
                                      Tensor<T>*);                                               \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);                                       \
  template void global_avg_pool_backward<T>(const Shape&, const Tensor<T>&, Tensor<T>*);         \
  template Tensor<T> fully_connected<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);   \
  template void fully_connected_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,\
                                            Tensor<T>*, Tensor<T>*, Tensor<T>*);                 \
  template Tensor<T> batchnorm_train<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, \
                                        T, Tensor<T>&, Tensor<T>&, BnCache<T>*);                 \
  template Tensor<T> batchnorm_infer<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, \
                                        const Tensor<T>&, const Tensor<T>&);                     \
  template void batchnorm_backward_train<T>(const Tensor<T>&, const Tensor<T>&,                  \
                                            const BnCache<T>&, const Tensor<T>&, Tensor<T>*,     \
                                            Tensor<T>*, Tensor<T>*);                             \
  template void batchnorm_backward_infer<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,\
                                            Tensor<T>*);                                         \
  template Tensor<T> activation<T>(ActKind, const Tensor<T>&);                                   \
  template void activation_backward<T>(ActKind, const Tensor<T>&, const Tensor<T>&,              \
                                       const Tensor<T>&, Tensor<T>*);                            \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> concat_channels<T>(const std::vector<const Tensor<T>*>&);                   \
  template void concat_channels_backward<T>(const std::vector<Shape>&, const Tensor<T>&,         \
                                            std::vector<Tensor<T>*>);                            \
  template std::vector<Tensor<T>> split_channels<T>(const Tensor<T>&,                            \
                                                    const std::vector<std::size_t>&);            \
  template Tensor<T> rescale_channels<T>(const Tensor<T>&, const Tensor<T>&);                    \
  template void rescale_channels_backward<T>(const Tensor<T>&, const Tensor<T>&,                 \
                                             const Tensor<T>&, Tensor<T>*, Tensor<T>*);

GPR3D_INSTANTIATE_OPS(float)
GPR3D_INSTANTIATE_OPS(double)

}  // namespace gpr3d::ops
