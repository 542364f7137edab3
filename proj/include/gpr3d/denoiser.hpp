#pragma once

#include "gpr3d/network.hpp"

namespace gpr3d {

/// Denoiser hyperparameters: m feature-learning modules of width C1 with a
/// channel-attention reduction ratio r (r must divide C1).
struct DenoiserConfig {
  int m = 2;
  int c1 = 8;
  int r = 4;
};

void validate(const DenoiserConfig& cfg);

/// Builds the denoising network: one 3x3x3 conv (1 -> C1) with ReLU, m
/// feature-learning modules (two residual blocks plus channel attention),
/// and a 3x3x3 reconstruction conv (C1 -> 1) added onto the input with a
/// final ReLU. No batch normalization anywhere.
template <typename T>
Network<T> build_denoiser(const DenoiserConfig& cfg, std::uint64_t seed);

/// Standalone feature-learning module (input: C1 channels) so the block can
/// be exercised and checked in isolation.
template <typename T>
Network<T> build_feature_module(int c1, int r, std::uint64_t seed);

/// Applies the denoiser to a single D x H x W volume (any extents; the
/// network is fully convolutional). Rejects non-finite input values.
template <typename T>
Tensor<T> denoiser_forward(Network<T>& net, const Tensor<T>& volume);

}  // namespace gpr3d
