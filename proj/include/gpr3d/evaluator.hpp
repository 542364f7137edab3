#pragma once

#include "gpr3d/dataset.hpp"
#include "gpr3d/denoiser.hpp"
#include "gpr3d/inverter.hpp"
#include "gpr3d/metrics.hpp"

namespace gpr3d {

struct EvalOptions {
  double mape_floor = 1e-6;
};

/// Runs the two-stage pipeline over every manifest record: the noisy
/// C-scan goes through the denoiser (when given), the result through the
/// inverter. Denoising metrics compare the clean C-scan against the
/// denoised one (dynamic range 1); inversion metrics compare the ground
/// truth map against the prediction (dynamic range max - min per pair).
/// `manifest_dir` anchors the relative file paths in the manifest.
EvalReport evaluate_dataset(Network<float>* denoiser, Network<float>& inverter,
                            const InverterConfig& inverter_cfg, const Manifest& manifest,
                            const std::string& manifest_dir, const EvalOptions& options = {});

}  // namespace gpr3d
