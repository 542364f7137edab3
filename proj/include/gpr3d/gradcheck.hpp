#pragma once

#include "gpr3d/network.hpp"

namespace gpr3d {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst;  // parameter name, or "input"
};

/// Compares the analytic gradient of a fixed randomly-weighted sum of the
/// network output against central finite differences, per parameter element
/// and per input element. Returns the maximum relative error
/// |a - n| / max(|a|, |n|, floor).
GradCheckReport grad_check_network(Network<double>& net, const Tensor<double>& input, double step,
                                   Mode mode = Mode::Train, std::uint64_t weight_seed = 0x5EED,
                                   double floor = 1e-6);

/// Distance of the sample point from the nearest non-differentiability:
/// the smallest |preactivation| feeding a ReLU and the smallest
/// top-two gap inside any max-pool block. Finite-difference checks are
/// only valid when the step stays well inside this margin.
double kink_margin(Network<double>& net, const Tensor<double>& input, Mode mode);

}  // namespace gpr3d
