#include "gpr3d/clutter.hpp"

#include <cmath>
#include <vector>

#include "gpr3d/rng.hpp"

namespace gpr3d {

namespace {

// In-place separable Gaussian smoothing along one axis with sigma in
// samples (clamped kernel at the volume boundary).
void smooth_axis(Tensor<double>& vol, int axis, double sigma) {
  if (sigma <= 0) return;
  const long radius = std::max(1L, static_cast<long>(std::ceil(3.0 * sigma)));
  std::vector<double> kern(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0;
  for (long i = -radius; i <= radius; ++i) {
    kern[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * (static_cast<double>(i) / sigma) * (static_cast<double>(i) / sigma));
    norm += kern[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kern) k /= norm;

  const long D = static_cast<long>(vol.dim(0)), H = static_cast<long>(vol.dim(1)), W = static_cast<long>(vol.dim(2));
  const long ext[3] = {D, H, W};
  const long stride[3] = {H * W, W, 1};
  const long n_axis = ext[axis];
  const long s_axis = stride[axis];
  Tensor<double> out(vol.shape);
  const long total = static_cast<long>(vol.numel());
#pragma omp parallel for schedule(static)
  for (long idx = 0; idx < total; ++idx) {
    const long pos = (idx / s_axis) % n_axis;
    double acc = 0;
    for (long i = -radius; i <= radius; ++i) {
      long p = pos + i;
      if (p < 0) p = 0;
      if (p >= n_axis) p = n_axis - 1;
      acc += kern[static_cast<std::size_t>(i + radius)] * vol.data[static_cast<std::size_t>(idx + (p - pos) * s_axis)];
    }
    out.data[static_cast<std::size_t>(idx)] = acc;
  }
  vol.data.swap(out.data);
}

}  // namespace

Tensor<double> synthesize_clutter(const ClutterParams& params,
                                  const std::array<std::size_t, 3>& dims, double reference_rms) {
  require(params.amplitude_ratio >= 0, "clutter: amplitude_ratio must be non-negative");
  require(params.family >= 0, "clutter: family must be non-negative");
  require(dims[0] > 0 && dims[1] > 0 && dims[2] > 0, "clutter: dims must be positive");
  Tensor<double> field({dims[0], dims[1], dims[2]});
  const double f = static_cast<double>(params.family);
  const double target = params.amplitude_ratio * (1.0 + 0.25 * f) * reference_rms;
  if (target == 0.0) return field;

  Rng rng(mix_seed(params.seed, 0xC1A77E7 + static_cast<std::uint64_t>(params.family)));
  for (double& v : field.data) v = rng.normal();
  const double stretch = 1.0 + 0.5 * f;
  smooth_axis(field, 0, params.correlation_lengths[0] * stretch);
  smooth_axis(field, 1, params.correlation_lengths[1] * stretch);
  smooth_axis(field, 2, params.correlation_lengths[2] * stretch);

  double sq = 0;
  for (double v : field.data) sq += v * v;
  const double rms = std::sqrt(sq / static_cast<double>(field.numel()));
  if (rms == 0.0) return field;
  const double scale = target / rms;
  for (double& v : field.data) v *= scale;
  return field;
}

}  // namespace gpr3d
