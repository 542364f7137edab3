#pragma once

#include <array>

#include "gpr3d/tensor.hpp"

namespace gpr3d {

/// Shifts every trace by one global offset so that the absolute maximum of
/// the mean trace lands on time index 0 (tail zero-padded). Volumes are
/// D (time) x H (line) x W (trace).
template <typename T>
Tensor<T> time_zero_correction(const Tensor<T>& c);

/// Subtracts, at each time index, the mean over all traces. Requires at
/// least two traces.
template <typename T>
Tensor<T> mean_subtraction(const Tensor<T>& c);

/// Affine map of [min, max] onto [0, 1]; a constant volume maps to all
/// zeros. The observed min/max are reported when requested.
template <typename T>
Tensor<T> normalize01(const Tensor<T>& c, T* out_min = nullptr, T* out_max = nullptr);

/// Re-expresses a volume in the normalization frame of another volume
/// (same affine map); used to keep clean/noisy pairs consistent.
template <typename T>
Tensor<T> apply_normalization(const Tensor<T>& c, T frame_min, T frame_max);

/// Corner-aligned trilinear resampling to target dims.
template <typename T>
Tensor<T> resize_trilinear(const Tensor<T>& c, const std::array<std::size_t, 3>& target);

template <typename T>
T rms(const Tensor<T>& c);

}  // namespace gpr3d
