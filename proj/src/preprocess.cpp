#include "gpr3d/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace gpr3d {

namespace {
template <typename T>
void expect_volume(const Tensor<T>& c, const char* what) {
  require(c.ndim() == 3, std::string(what) + ": expected a D x H x W volume, got " + shape_str(c.shape));
  require(c.numel() > 0, std::string(what) + ": empty volume");
}
}  // namespace

template <typename T>
Tensor<T> time_zero_correction(const Tensor<T>& c) {
  expect_volume(c, "time_zero_correction");
  const std::size_t D = c.dim(0), H = c.dim(1), W = c.dim(2);
  const std::size_t traces = H * W;
  std::size_t peak = 0;
  T best = T(-1);
  for (std::size_t d = 0; d < D; ++d) {
    T mean = T(0);
    for (std::size_t t = 0; t < traces; ++t) mean += c.data[d * traces + t];
    mean /= static_cast<T>(traces);
    if (std::abs(mean) > best) {
      best = std::abs(mean);
      peak = d;
    }
  }
  Tensor<T> out(c.shape);
  for (std::size_t d = 0; d + peak < D; ++d)
    std::copy(c.data.begin() + static_cast<long>((d + peak) * traces),
              c.data.begin() + static_cast<long>((d + peak + 1) * traces),
              out.data.begin() + static_cast<long>(d * traces));
  return out;
}

template <typename T>
Tensor<T> mean_subtraction(const Tensor<T>& c) {
  expect_volume(c, "mean_subtraction");
  const std::size_t D = c.dim(0), traces = c.dim(1) * c.dim(2);
  require(traces >= 2, "mean_subtraction: needs at least 2 traces, got " + std::to_string(traces));
  Tensor<T> out(c.shape);
  for (std::size_t d = 0; d < D; ++d) {
    T mean = T(0);
    for (std::size_t t = 0; t < traces; ++t) mean += c.data[d * traces + t];
    mean /= static_cast<T>(traces);
    for (std::size_t t = 0; t < traces; ++t) out.data[d * traces + t] = c.data[d * traces + t] - mean;
  }
  return out;
}

template <typename T>
Tensor<T> normalize01(const Tensor<T>& c, T* out_min, T* out_max) {
  require(c.numel() > 0, "normalize01: empty volume");
  T lo = c.data[0], hi = c.data[0];
  for (const T v : c.data) {
    require(std::isfinite(static_cast<double>(v)), "normalize01: non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (out_min) *out_min = lo;
  if (out_max) *out_max = hi;
  return apply_normalization(c, lo, hi);
}

template <typename T>
Tensor<T> apply_normalization(const Tensor<T>& c, T frame_min, T frame_max) {
  Tensor<T> out(c.shape);
  const T span = frame_max - frame_min;
  if (span <= T(0)) return out;  // constant frame maps to all zeros
  for (std::size_t i = 0; i < c.numel(); ++i) out.data[i] = (c.data[i] - frame_min) / span;
  return out;
}

template <typename T>
Tensor<T> resize_trilinear(const Tensor<T>& c, const std::array<std::size_t, 3>& target) {
  expect_volume(c, "resize_trilinear");
  require(target[0] > 0 && target[1] > 0 && target[2] > 0, "resize_trilinear: empty target");
  if (c.shape[0] == target[0] && c.shape[1] == target[1] && c.shape[2] == target[2]) return c;
  const std::size_t SD = c.dim(0), SH = c.dim(1), SW = c.dim(2);
  Tensor<T> out({target[0], target[1], target[2]});
  auto src_coord = [](std::size_t i, std::size_t t, std::size_t s) {
    return t == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(s - 1) / static_cast<double>(t - 1);
  };
  const long TD = static_cast<long>(target[0]);
#pragma omp parallel for schedule(static)
  for (long od = 0; od < TD; ++od) {
    const double fz = src_coord(static_cast<std::size_t>(od), target[0], SD);
    const std::size_t z0 = static_cast<std::size_t>(fz), z1 = std::min(z0 + 1, SD - 1);
    const double wz = fz - static_cast<double>(z0);
    for (std::size_t oh = 0; oh < target[1]; ++oh) {
      const double fy = src_coord(oh, target[1], SH);
      const std::size_t y0 = static_cast<std::size_t>(fy), y1 = std::min(y0 + 1, SH - 1);
      const double wy = fy - static_cast<double>(y0);
      for (std::size_t ow = 0; ow < target[2]; ++ow) {
        const double fx = src_coord(ow, target[2], SW);
        const std::size_t x0 = static_cast<std::size_t>(fx), x1 = std::min(x0 + 1, SW - 1);
        const double wx = fx - static_cast<double>(x0);
        auto at = [&](std::size_t z, std::size_t y, std::size_t x) {
          return static_cast<double>(c.data[(z * SH + y) * SW + x]);
        };
        const double c00 = at(z0, y0, x0) * (1 - wx) + at(z0, y0, x1) * wx;
        const double c01 = at(z0, y1, x0) * (1 - wx) + at(z0, y1, x1) * wx;
        const double c10 = at(z1, y0, x0) * (1 - wx) + at(z1, y0, x1) * wx;
        const double c11 = at(z1, y1, x0) * (1 - wx) + at(z1, y1, x1) * wx;
        const double c0 = c00 * (1 - wy) + c01 * wy;
        const double c1 = c10 * (1 - wy) + c11 * wy;
        out.data[(static_cast<std::size_t>(od) * target[1] + oh) * target[2] + ow] =
            static_cast<T>(c0 * (1 - wz) + c1 * wz);
      }
    }
  }
  return out;
}

template <typename T>
T rms(const Tensor<T>& c) {
  T acc = T(0);
  for (const T v : c.data) acc += v * v;
  return std::sqrt(acc / static_cast<T>(c.numel()));
}

#define GPR3D_INSTANTIATE_PRE(T)                                                        \
  template Tensor<T> time_zero_correction<T>(const Tensor<T>&);                         \
  template Tensor<T> mean_subtraction<T>(const Tensor<T>&);                             \
  template Tensor<T> normalize01<T>(const Tensor<T>&, T*, T*);                          \
  template Tensor<T> apply_normalization<T>(const Tensor<T>&, T, T);                    \
  template Tensor<T> resize_trilinear<T>(const Tensor<T>&, const std::array<std::size_t, 3>&); \
  template T rms<T>(const Tensor<T>&);

GPR3D_INSTANTIATE_PRE(float)
GPR3D_INSTANTIATE_PRE(double)

}  // namespace gpr3d
