#include "gpr3d/forward_model.hpp"

#include <algorithm>
#include <cmath>

namespace gpr3d {

namespace {
constexpr double kPi = 3.141592653589793238462643383279;
}

void validate(const SurveyConfig& s) {
  require(s.domain.x > 0 && s.domain.y > 0 && s.domain.z > 0, "survey: domain extents must be positive");
  require(s.lines > 0, "survey: lines must be positive");
  require(s.points_per_line > 0, "survey: points_per_line must be positive");
  require(s.tx_rx_offset >= 0, "survey: tx_rx_offset must be non-negative");
  require(s.tx_rx_offset < s.domain.x, "survey: tx_rx_offset must be smaller than the domain width");
  require(s.antenna_height >= 0, "survey: antenna_height must be non-negative");
  require(s.center_frequency > 0, "survey: center_frequency must be positive");
  require(s.time_window > 0, "survey: time_window must be positive");
  require(s.time_samples > 0, "survey: time_samples must be positive");
}

double ricker(double f_c, double t) {
  require(f_c > 0, "ricker: center frequency must be positive");
  const double a = kPi * kPi * f_c * f_c * t * t;
  return (1.0 - 2.0 * a) * std::exp(-a);
}

double fresnel_reflectivity(double eps_soil, double eps_obj) {
  const double a = std::sqrt(eps_soil), b = std::sqrt(eps_obj);
  return (a - b) / (a + b);
}

std::vector<Scatterer> collect_scatterers(const Scene& scene, double voxel_size,
                                          std::size_t cap_per_object) {
  require(voxel_size > 0, "collect_scatterers: voxel size must be positive");
  require(cap_per_object > 0, "collect_scatterers: cap must be positive");
  std::vector<Scatterer> out;
  for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
    const SubsurfaceObject& obj = scene.objects[oi];
    Vec3 lo, hi;
    obj.aabb(lo, hi);
    const long nx = std::max(1L, static_cast<long>(std::ceil((hi.x - lo.x) / voxel_size)));
    const long ny = std::max(1L, static_cast<long>(std::ceil((hi.y - lo.y) / voxel_size)));
    const long nz = std::max(1L, static_cast<long>(std::ceil((hi.z - lo.z) / voxel_size)));
    std::vector<Vec3> centers;
    for (long iz = 0; iz < nz; ++iz)
      for (long iy = 0; iy < ny; ++iy)
        for (long ix = 0; ix < nx; ++ix) {
          const Vec3 p{lo.x + (static_cast<double>(ix) + 0.5) * voxel_size,
                       lo.y + (static_cast<double>(iy) + 0.5) * voxel_size,
                       lo.z + (static_cast<double>(iz) + 0.5) * voxel_size};
          if (!obj.contains(p)) continue;
          bool claimed_later = false;
          for (std::size_t oj = oi + 1; oj < scene.objects.size() && !claimed_later; ++oj)
            claimed_later = scene.objects[oj].contains(p);
          if (!claimed_later) centers.push_back(p);
        }
    const double gamma = fresnel_reflectivity(scene.soil_epsilon_r, obj.epsilon_r);
    if (centers.size() <= cap_per_object) {
      for (const Vec3& p : centers) out.push_back({p, gamma});
    } else {
      // Deterministic stratified subsampling: index j maps to
      // floor(j * count / cap), visiting the voxel list in row-major order.
      for (std::size_t j = 0; j < cap_per_object; ++j)
        out.push_back({centers[j * centers.size() / cap_per_object], gamma});
    }
  }
  return out;
}

Tensor<double> synthesize_traces(const std::vector<Scatterer>& scatterers,
                                 const SurveyConfig& survey, double soil_epsilon_r) {
  validate(survey);
  require(soil_epsilon_r > 0, "synthesize_traces: soil permittivity must be positive");
  const std::size_t T = static_cast<std::size_t>(survey.time_samples);
  const std::size_t L = static_cast<std::size_t>(survey.lines);
  const std::size_t P = static_cast<std::size_t>(survey.points_per_line);
  Tensor<double> cscan({T, L, P});
  const double dt = survey.time_window / static_cast<double>(survey.time_samples);
  const double v = kSpeedOfLight / std::sqrt(soil_epsilon_r);
  // Ricker support cutoff: beyond (pi f t)^2 = 38 the wavelet is below
  // double-precision noise for unit amplitude.
  const double t_cut = std::sqrt(38.0) / (kPi * survey.center_frequency);
  const long n_traces = static_cast<long>(L * P);

#pragma omp parallel for schedule(static)
  for (long tr = 0; tr < n_traces; ++tr) {
    const std::size_t line = static_cast<std::size_t>(tr) / P;
    const std::size_t pt = static_cast<std::size_t>(tr) % P;
    const double x = (static_cast<double>(pt) + 0.5) * survey.domain.x / static_cast<double>(P);
    const double y = (static_cast<double>(line) + 0.5) * survey.domain.y / static_cast<double>(L);
    const Vec3 tx{x - 0.5 * survey.tx_rx_offset, y, -survey.antenna_height};
    const Vec3 rx{x + 0.5 * survey.tx_rx_offset, y, -survey.antenna_height};
    double* trace = cscan.ptr() + static_cast<std::size_t>(tr);
    for (const Scatterer& s : scatterers) {
      const Vec3 d1 = s.pos - tx, d2 = s.pos - rx;
      const double r1 = std::sqrt(d1.x * d1.x + d1.y * d1.y + d1.z * d1.z);
      const double r2 = std::sqrt(d2.x * d2.x + d2.y * d2.y + d2.z * d2.z);
      const double rsum = r1 + r2;
      if (rsum <= 0) continue;
      const double tau = rsum / v;
      const double amp = s.reflectivity / rsum;
      const long k_lo = std::max(0L, static_cast<long>(std::ceil((tau - t_cut) / dt)));
      const long k_hi = std::min(static_cast<long>(T) - 1, static_cast<long>(std::floor((tau + t_cut) / dt)));
      for (long k = k_lo; k <= k_hi; ++k)
        trace[static_cast<std::size_t>(k) * L * P] += amp * ricker(survey.center_frequency, static_cast<double>(k) * dt - tau);
    }
  }
  return cscan;
}

Tensor<double> forward_model(const Scene& scene, const SurveyConfig& survey,
                             double scatter_voxel_size, std::size_t cap_per_object) {
  const std::vector<Scatterer> scatterers = collect_scatterers(scene, scatter_voxel_size, cap_per_object);
  require(scene.objects.empty() || !scatterers.empty(),
          "forward_model: non-empty object list produced zero scatterer samples");
  return synthesize_traces(scatterers, survey, scene.soil_epsilon_r);
}

}  // namespace gpr3d
