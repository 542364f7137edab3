#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gpr3d/ops.hpp"
#include "gpr3d/rng.hpp"
#include "gpr3d/tensor.hpp"

namespace gpr3d {

enum class LayerKind {
  Conv3d,
  TConv3d,
  MaxPool3d,
  GlobalAvgPool,
  FullyConnected,
  BatchNorm3d,
  Activation,
  ConcatChannels,
  ResidualAdd,
  RescaleChannels,
};

/// One node of the static computation graph. Node id == position in the
/// layer list; an input id of -1 refers to the network input.
struct LayerDef {
  std::string name;
  LayerKind kind{};
  std::vector<int> inputs;

  int weight = -1;  // param id: conv/tconv kernel or FC weight
  int bias = -1;    // param id
  int gamma = -1;   // BN affine params
  int beta = -1;
  int running_mean = -1;  // BN buffer ids
  int running_var = -1;

  ops::ConvGeom geom{};
  ops::ActKind act = ops::ActKind::Linear;
};

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
};

enum class Mode { Train, Infer };

/// A feed-forward graph over the fixed layer vocabulary above, with a
/// named parameter registry. Forward output shapes are validated along
/// the graph as it executes.
template <typename T>
struct Network {
  std::vector<LayerDef> layers;
  std::vector<Param<T>> params;   // trainable
  std::vector<Param<T>> buffers;  // BN running statistics
  int output_node = -1;
  std::int64_t bn_batches_seen = 0;  // train-mode forwards recorded
  T bn_eps = T(1e-5);
  T bn_momentum = T(0.1);

  int add_param(const std::string& name, Tensor<T> value);
  int add_buffer(const std::string& name, Tensor<T> value);
  int add_layer(LayerDef def);  // returns the new node id

  const Param<T>* find_param(const std::string& name) const;
  Param<T>* find_param(const std::string& name);
  const LayerDef* find_layer(const std::string& name) const;
  int layer_id(const std::string& name) const;

  void zero_grads();
};

/// Sum of all trainable scalar parameters; depends only on shapes.
template <typename T>
std::size_t count_parameters(const Network<T>& net);

/// Activations and per-layer side data captured by forward() so that
/// backward() can run without recomputation.
template <typename T>
struct ForwardTrace {
  std::vector<Tensor<T>> acts;
  std::vector<std::vector<std::int64_t>> pool_argmax;
  std::vector<ops::BnCache<T>> bn_cache;
  std::vector<Tensor<T>> bn_infer_invstd;
  Mode mode = Mode::Infer;
};

/// Runs the graph. `trace`, when given, keeps every intermediate needed by
/// backward(). Train mode updates BN running statistics.
template <typename T>
Tensor<T> forward(Network<T>& net, const Tensor<T>& input, Mode mode,
                  ForwardTrace<T>* trace = nullptr);

/// Reverse pass. Accumulates parameter gradients in-place (params must be
/// zero_grads()-ed by the caller per step) and returns d(loss)/d(input).
template <typename T>
Tensor<T> backward(Network<T>& net, const Tensor<T>& input, const ForwardTrace<T>& trace,
                   const Tensor<T>& dout);

/// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) tensor; biases start at zero.
template <typename T>
Tensor<T> init_uniform_fan_in(const Shape& shape, std::size_t fan_in, Rng& rng);

template <typename To, typename From>
Network<To> network_cast(const Network<From>& net);

// Builder shorthand used by the denoiser/inverter constructors.
template <typename T>
int append_conv(Network<T>& net, const std::string& name, int input, std::size_t c_in,
                std::size_t c_out, ops::ConvGeom geom, Rng& rng);
template <typename T>
int append_tconv(Network<T>& net, const std::string& name, int input, std::size_t c_in,
                 std::size_t c_out, ops::ConvGeom geom, Rng& rng);
template <typename T>
int append_fc(Network<T>& net, const std::string& name, int input, std::size_t c_in,
              std::size_t c_out, Rng& rng);
template <typename T>
int append_batchnorm(Network<T>& net, const std::string& name, int input, std::size_t channels);
template <typename T>
int append_activation(Network<T>& net, const std::string& name, int input, ops::ActKind act);

extern template struct Network<float>;
extern template struct Network<double>;

}  // namespace gpr3d
