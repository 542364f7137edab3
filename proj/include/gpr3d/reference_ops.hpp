#pragma once

#include "gpr3d/ops.hpp"

// Serial reference implementations written as direct nested loops over the
// defining sums. They are kept deliberately independent of the optimized
// kernels in gpr3d::ops: tests compare the two paths and the benchmark
// times them against each other.
namespace gpr3d::refops {

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                 const ops::ConvGeom& g);

template <typename T>
Tensor<T> tconv3d(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                  const ops::ConvGeom& g);

template <typename T>
Tensor<T> maxpool3d(const Tensor<T>& x);

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
T mse(const Tensor<T>& pred, const Tensor<T>& truth);

template <typename T>
T mae(const Tensor<T>& pred, const Tensor<T>& truth);

}  // namespace gpr3d::refops
