#pragma once

#include "gpr3d/scene.hpp"

namespace gpr3d {

inline constexpr double kSpeedOfLight = 299792458.0;

/// Survey geometry and excitation. The scan grid covers the domain's xy
/// footprint with `lines` rows along y and `points_per_line` positions
/// along x (cell-centered spacing); TX and RX straddle each scan point
/// along x at antenna_height above the ground.
struct SurveyConfig {
  Vec3 domain{1.0, 1.0, 0.26};
  int lines = 12;
  int points_per_line = 10;
  double tx_rx_offset = 0.10;
  double antenna_height = 0.02;
  double center_frequency = 1e9;   // Hz
  double time_window = 15e-9;      // s
  int time_samples = 160;
};

void validate(const SurveyConfig& survey);

/// Peak-normalized Ricker wavelet w(t) = (1 - 2 pi^2 f^2 t^2) exp(-pi^2 f^2 t^2).
double ricker(double f_c, double t);

/// Normal-incidence reflectivity between soil and object.
double fresnel_reflectivity(double eps_soil, double eps_obj);

struct Scatterer {
  Vec3 pos;
  double reflectivity = 0.0;
};

/// Object-occupied voxel centers at `voxel_size` resolution, strided down
/// deterministically to at most cap_per_object samples per object. Voxels
/// claimed by a later object in list order are skipped, mirroring the
/// rasterization overwrite rule.
std::vector<Scatterer> collect_scatterers(const Scene& scene, double voxel_size,
                                          std::size_t cap_per_object);

/// Single-scattering superposition: every scatterer adds
/// reflectivity * w(t - tau) / (R_tx + R_rx) with tau = (R_tx + R_rx) / v
/// and v = c / sqrt(soil permittivity). Output volume is
/// time_samples x lines x points_per_line.
Tensor<double> synthesize_traces(const std::vector<Scatterer>& scatterers,
                                 const SurveyConfig& survey, double soil_epsilon_r);

/// Noise-free C-scan of a scene. Errors if a non-empty object list yields
/// zero scatterer samples (degenerate subsampling).
Tensor<double> forward_model(const Scene& scene, const SurveyConfig& survey,
                             double scatter_voxel_size = 0.01, std::size_t cap_per_object = 2000);

}  // namespace gpr3d
