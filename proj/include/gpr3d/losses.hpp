#pragma once

#include <cmath>

#include "gpr3d/tensor.hpp"

namespace gpr3d {

/// Mean squared voxel error. When dpred is given it receives
/// d(loss)/d(pred) = 2 (pred - truth) / numel.
template <typename T>
T loss_mse(const Tensor<T>& pred, const Tensor<T>& truth, Tensor<T>* dpred = nullptr) {
  require(same_shape(pred, truth),
          "loss_mse: shape mismatch " + shape_str(pred.shape) + " vs " + shape_str(truth.shape));
  const std::size_t n = pred.numel();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred.data[i] - truth.data[i];
    acc += d * d;
    if (dpred) dpred->data[i] = T(2) * d / static_cast<T>(n);
  }
  return acc / static_cast<T>(n);
}

/// Mean absolute voxel error; the subgradient at zero difference is 0.
template <typename T>
T loss_mae(const Tensor<T>& pred, const Tensor<T>& truth, Tensor<T>* dpred = nullptr) {
  require(same_shape(pred, truth),
          "loss_mae: shape mismatch " + shape_str(pred.shape) + " vs " + shape_str(truth.shape));
  const std::size_t n = pred.numel();
  T acc = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    const T d = pred.data[i] - truth.data[i];
    acc += std::abs(d);
    if (dpred) dpred->data[i] = (d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0))) / static_cast<T>(n);
  }
  return acc / static_cast<T>(n);
}

}  // namespace gpr3d
