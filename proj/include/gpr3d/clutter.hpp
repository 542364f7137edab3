#pragma once

#include <array>
#include <cstdint>

#include "gpr3d/tensor.hpp"

namespace gpr3d {

/// Correlated random-field clutter standing in for reflections from
/// heterogeneous soil. `family` selects a distinct noise population: it
/// reseeds the stream, stretches the correlation lengths by (1 + f/2) and
/// scales the amplitude by (1 + f/4), standing in for different soil
/// conditions. `background_epsilon_r` is the matching ground-truth map
/// background.
struct ClutterParams {
  int family = 0;
  double amplitude_ratio = 0.5;  // clutter RMS / reference RMS
  std::array<double, 3> correlation_lengths{4.0, 2.0, 2.0};  // samples, (D,H,W)
  std::uint64_t seed = 0;
  double background_epsilon_r = 4.0;
};

/// White Gaussian field smoothed by a separable Gaussian kernel with the
/// configured per-axis correlation lengths, then scaled so its RMS equals
/// amplitude_ratio * reference_rms. Deterministic given (seed, family).
Tensor<double> synthesize_clutter(const ClutterParams& params,
                                  const std::array<std::size_t, 3>& dims, double reference_rms);

}  // namespace gpr3d
