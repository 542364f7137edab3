#include "gpr3d/denoiser.hpp"

#include <cmath>

namespace gpr3d {

void validate(const DenoiserConfig& cfg) {
  require(cfg.m >= 0, "denoiser: m must be >= 0");
  require(cfg.c1 >= 1, "denoiser: C1 must be >= 1");
  require(cfg.r >= 1, "denoiser: r must be >= 1");
  require(cfg.c1 % cfg.r == 0, "denoiser: reduction ratio " + std::to_string(cfg.r) +
                                   " does not divide C1=" + std::to_string(cfg.c1));
}

namespace {

// Residual block: out = relu(conv(relu(conv(x))) + x).
template <typename T>
int append_residual_block(Network<T>& net, const std::string& name, int input, std::size_t c,
                          Rng& rng) {
  const ops::ConvGeom g{3, 1, 1};
  int a = append_conv(net, name + ".conv1", input, c, c, g, rng);
  a = append_activation(net, name + ".relu1", a, ops::ActKind::ReLU);
  a = append_conv(net, name + ".conv2", a, c, c, g, rng);
  LayerDef add;
  add.name = name + ".add";
  add.kind = LayerKind::ResidualAdd;
  add.inputs = {a, input};
  a = net.add_layer(std::move(add));
  return append_activation(net, name + ".relu2", a, ops::ActKind::ReLU);
}

// Feature-learning module: two residual blocks, channel attention, and a
// residual connection from the module input.
template <typename T>
int append_feature_module(Network<T>& net, const std::string& name, int input, std::size_t c,
                          std::size_t r, Rng& rng) {
  const int f1 = append_residual_block(net, name + ".res1", input, c, rng);
  const int f2 = append_residual_block(net, name + ".res2", f1, c, rng);

  LayerDef gap;
  gap.name = name + ".att.gap";
  gap.kind = LayerKind::GlobalAvgPool;
  gap.inputs = {f2};
  int a = net.add_layer(std::move(gap));
  a = append_fc(net, name + ".att.squeeze", a, c, c / r, rng);
  a = append_activation(net, name + ".att.relu", a, ops::ActKind::ReLU);
  a = append_fc(net, name + ".att.excite", a, c / r, c, rng);
  a = append_activation(net, name + ".att.sigmoid", a, ops::ActKind::Sigmoid);

  LayerDef rescale;
  rescale.name = name + ".att.rescale";
  rescale.kind = LayerKind::RescaleChannels;
  rescale.inputs = {f2, a};
  const int scaled = net.add_layer(std::move(rescale));

  LayerDef add;
  add.name = name + ".add";
  add.kind = LayerKind::ResidualAdd;
  add.inputs = {scaled, input};
  return net.add_layer(std::move(add));
}

}  // namespace

template <typename T>
Network<T> build_denoiser(const DenoiserConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Network<T> net;
  Rng rng(seed);
  const std::size_t c1 = static_cast<std::size_t>(cfg.c1);
  const ops::ConvGeom g{3, 1, 1};

  int a = append_conv(net, "feat0.conv", -1, 1, c1, g, rng);
  const int f0 = append_activation(net, "feat0.relu", a, ops::ActKind::ReLU);

  int fm = f0;
  for (int i = 1; i <= cfg.m; ++i)
    fm = append_feature_module(net, "mod" + std::to_string(i), fm, c1,
                               static_cast<std::size_t>(cfg.r), rng);

  LayerDef sum;
  sum.name = "recon.sum";
  sum.kind = LayerKind::ResidualAdd;
  sum.inputs = {f0, fm};
  a = net.add_layer(std::move(sum));
  a = append_conv(net, "recon.conv", a, c1, 1, g, rng);
  // Zero-initialized reconstruction conv: the residual path starts as the
  // identity, so the initial output equals ReLU of the input.
  for (T& v : net.find_param("recon.conv.kernel")->value.data) v = T(0);
  LayerDef skip;
  skip.name = "recon.add_input";
  skip.kind = LayerKind::ResidualAdd;
  skip.inputs = {a, -1};
  a = net.add_layer(std::move(skip));
  append_activation(net, "recon.relu", a, ops::ActKind::ReLU);
  return net;
}

template <typename T>
Network<T> build_feature_module(int c1, int r, std::uint64_t seed) {
  DenoiserConfig cfg{1, c1, r};
  validate(cfg);
  Network<T> net;
  Rng rng(seed);
  append_feature_module(net, "mod1", -1, static_cast<std::size_t>(c1), static_cast<std::size_t>(r),
                        rng);
  return net;
}

template <typename T>
Tensor<T> denoiser_forward(Network<T>& net, const Tensor<T>& volume) {
  require(volume.ndim() == 3, "denoiser: expected a D x H x W volume, got " + shape_str(volume.shape));
  for (const T v : volume.data)
    require(std::isfinite(static_cast<double>(v)), "denoiser: input contains non-finite values");
  Tensor<T> x = volume;
  x.shape = {1, 1, volume.dim(0), volume.dim(1), volume.dim(2)};
  Tensor<T> y = forward(net, x, Mode::Infer);
  y.shape = volume.shape;
  return y;
}

template Network<float> build_denoiser<float>(const DenoiserConfig&, std::uint64_t);
template Network<double> build_denoiser<double>(const DenoiserConfig&, std::uint64_t);
template Network<float> build_feature_module<float>(int, int, std::uint64_t);
template Network<double> build_feature_module<double>(int, int, std::uint64_t);
template Tensor<float> denoiser_forward<float>(Network<float>&, const Tensor<float>&);
template Tensor<double> denoiser_forward<double>(Network<double>&, const Tensor<double>&);

}  // namespace gpr3d
