#pragma once

#include <cstdint>
#include <vector>

#include "gpr3d/tensor.hpp"

namespace gpr3d::ops {

enum class ActKind { ReLU, Sigmoid, Linear };

/// Per-axis-uniform convolution geometry (all kernels in this project are
/// cubic). kernel >= 1, stride >= 1, pad >= 0.
struct ConvGeom {
  int kernel = 3;
  int stride = 1;
  int pad = 0;
};

/// out extent for a direct convolution; division must be exact in every
/// configuration this project builds.
std::size_t conv_out_extent(std::size_t in, const ConvGeom& g, const char* axis);

// ----- convolution -----------------------------------------------------
// x: N x Cin x D x H x W, kernel: Cout x Cin x k x k x k, bias: Cout.

template <typename T>
Tensor<T> conv3d_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                         const ConvGeom& g);

/// Accumulates (+=) into any non-null gradient tensor, which must be
/// pre-sized to match x / kernel / bias.
template <typename T>
void conv3d_backward(const Tensor<T>& x, const Tensor<T>& kernel, const ConvGeom& g,
                     const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dkernel, Tensor<T>* dbias);

// ----- transposed convolution ------------------------------------------
// Output extent is (E - 1) * stride + kernel. For the k == s case used by
// the decoder, every output voxel receives exactly one input contribution;
// k > s falls back to the general scatter-add rule.

template <typename T>
Tensor<T> tconv3d_forward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& bias,
                          const ConvGeom& g);

template <typename T>
void tconv3d_backward(const Tensor<T>& x, const Tensor<T>& kernel, const ConvGeom& g,
                      const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dkernel, Tensor<T>* dbias);

// ----- pooling ----------------------------------------------------------

/// 2x2x2 max pooling with stride 2; spatial extents must be even. argmax
/// records the flat input index of each output's maximum (first occurrence
/// in row-major order on ties).
template <typename T>
Tensor<T> maxpool3d_forward(const Tensor<T>& x, std::vector<std::int64_t>& argmax);

template <typename T>
void maxpool3d_backward(const std::vector<std::int64_t>& argmax, const Tensor<T>& dy,
                        Tensor<T>* dx);

/// N x C x D x H x W -> N x C channel means.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
void global_avg_pool_backward(const Shape& in_shape, const Tensor<T>& dy, Tensor<T>* dx);

// ----- fully connected ----------------------------------------------------
// x: N x Cin, w: Cout x Cin, b: Cout.

template <typename T>
Tensor<T> fully_connected(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

template <typename T>
void fully_connected_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                              Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db);

// ----- batch normalization ------------------------------------------------

template <typename T>
struct BnCache {
  Tensor<T> mean;    // C
  Tensor<T> invstd;  // C
};

/// Train mode: normalizes each channel over batch and all spatial
/// positions using the population variance, applies (gamma, beta), and
/// updates the running statistics as r = (1 - momentum) * r + momentum * batch.
template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          T eps, T momentum, Tensor<T>& running_mean, Tensor<T>& running_var,
                          BnCache<T>* cache);

template <typename T>
Tensor<T> batchnorm_infer(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                          T eps, const Tensor<T>& running_mean, const Tensor<T>& running_var);

template <typename T>
void batchnorm_backward_train(const Tensor<T>& x, const Tensor<T>& gamma, const BnCache<T>& cache,
                              const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dgamma,
                              Tensor<T>* dbeta);

template <typename T>
void batchnorm_backward_infer(const Tensor<T>& gamma, const Tensor<T>& invstd_infer,
                              const Tensor<T>& dy, Tensor<T>* dx);

// ----- elementwise ---------------------------------------------------------

template <typename T>
Tensor<T> activation(ActKind kind, const Tensor<T>& x);

/// dy is the upstream gradient, y the activation output (sigmoid reuses it;
/// ReLU's subgradient at exactly 0 is 0).
template <typename T>
void activation_backward(ActKind kind, const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy,
                         Tensor<T>* dx);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// ----- channel concat / rescale --------------------------------------------

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& xs);

/// Slices the channel-concatenated gradient back into per-input blocks.
template <typename T>
void concat_channels_backward(const std::vector<Shape>& in_shapes, const Tensor<T>& dy,
                              std::vector<Tensor<T>*> dxs);

template <typename T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, const std::vector<std::size_t>& widths);

/// Channel-wise multiply: x is N x C x D x H x W, v is N x C.
template <typename T>
Tensor<T> rescale_channels(const Tensor<T>& x, const Tensor<T>& v);

template <typename T>
void rescale_channels_backward(const Tensor<T>& x, const Tensor<T>& v, const Tensor<T>& dy,
                               Tensor<T>* dx, Tensor<T>* dv);

}  // namespace gpr3d::ops
