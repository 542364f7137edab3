#pragma once

#include "gpr3d/network.hpp"

namespace gpr3d {

/// Inverter hyperparameters: n encoder/decoder levels with base width C2.
/// msfa_enabled=false forwards only the last conv of each block (the
/// single-scale baseline used for ablation).
struct InverterConfig {
  int n = 4;
  int c2 = 8;
  bool msfa_enabled = true;
};

void validate(const InverterConfig& cfg);

/// Receptive-field recursion r_f = r_{f-1} + (k_f - 1) * prod_{i<f} s_i,
/// starting from r0. Returns r_f for every stage.
std::vector<long> receptive_field(const std::vector<int>& kernels, const std::vector<int>& strides,
                                  long r0 = 1);

/// U-shaped encoder-decoder: n encoding blocks (multi-scale aggregation +
/// 2x2x2 max pool), a bridge block of width 2^n * C2, n decoding blocks
/// (2x2x2 transposed conv + skip concat + aggregation block), and a final
/// 3x3x3 conv to one channel with linear activation.
template <typename T>
Network<T> build_inverter(const InverterConfig& cfg, std::uint64_t seed);

/// Standalone aggregation block (three conv+BN+ReLU stages of width
/// `width`, channel-concatenated when enabled) for isolated testing.
template <typename T>
Network<T> build_msfa_block(int c_in, int width, bool msfa_enabled, std::uint64_t seed);

/// Errors (naming the axis) unless every spatial extent is divisible by 2^n.
void validate_inverter_input(const InverterConfig& cfg, const Shape& volume_shape);

/// Applies the inverter to a single D x H x W volume.
template <typename T>
Tensor<T> inverter_forward(Network<T>& net, const InverterConfig& cfg, const Tensor<T>& volume);

}  // namespace gpr3d
