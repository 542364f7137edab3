#include "gpr3d/inverter.hpp"

namespace gpr3d {

void validate(const InverterConfig& cfg) {
  require(cfg.n >= 1, "inverter: n must be >= 1");
  require(cfg.c2 >= 1, "inverter: C2 must be >= 1");
}

std::vector<long> receptive_field(const std::vector<int>& kernels, const std::vector<int>& strides,
                                  long r0) {
  require(!kernels.empty(), "receptive_field: empty kernel list");
  require(kernels.size() == strides.size(), "receptive_field: kernel/stride lists differ in length");
  std::vector<long> rf;
  long r = r0;
  long jump = 1;  // product of strides before the current layer
  for (std::size_t f = 0; f < kernels.size(); ++f) {
    require(kernels[f] >= 1 && strides[f] >= 1, "receptive_field: entries must be >= 1");
    r = r + static_cast<long>(kernels[f] - 1) * jump;
    rf.push_back(r);
    jump *= strides[f];
  }
  return rf;
}

namespace {

struct BlockOut {
  int node;
  std::size_t channels;
};

// Three successive conv(3,1,1) -> BN -> ReLU stages; the enabled variant
// concatenates all three stage outputs, the ablation forwards only the last.
template <typename T>
BlockOut append_msfa(Network<T>& net, const std::string& name, int input, std::size_t c_in,
                     std::size_t width, bool msfa_enabled, Rng& rng) {
  const ops::ConvGeom g{3, 1, 1};
  std::vector<int> stages;
  int a = input;
  std::size_t in_c = c_in;
  for (int s = 1; s <= 3; ++s) {
    const std::string stage = name + ".conv" + std::to_string(s);
    a = append_conv(net, stage, a, in_c, width, g, rng);
    a = append_batchnorm(net, stage + ".bn", a, width);
    a = append_activation(net, stage + ".relu", a, ops::ActKind::ReLU);
    stages.push_back(a);
    in_c = width;
  }
  if (!msfa_enabled) return {stages.back(), width};
  LayerDef cat;
  cat.name = name + ".concat";
  cat.kind = LayerKind::ConcatChannels;
  cat.inputs = stages;
  return {net.add_layer(std::move(cat)), 3 * width};
}

}  // namespace

template <typename T>
Network<T> build_inverter(const InverterConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  Network<T> net;
  Rng rng(seed);
  const std::size_t c2 = static_cast<std::size_t>(cfg.c2);

  // Encoder: block l has width 2^(l-1) * C2 and keeps its pre-pool output
  // for the matching decoder skip.
  std::vector<BlockOut> enc;
  BlockOut cur{-1, 1};
  for (int l = 1; l <= cfg.n; ++l) {
    const std::size_t width = c2 << (l - 1);
    BlockOut b = append_msfa(net, "enc" + std::to_string(l), cur.node, cur.channels, width,
                             cfg.msfa_enabled, rng);
    enc.push_back(b);
    LayerDef pool;
    pool.name = "enc" + std::to_string(l) + ".pool";
    pool.kind = LayerKind::MaxPool3d;
    pool.inputs = {b.node};
    cur = {net.add_layer(std::move(pool)), b.channels};
  }

  cur = append_msfa(net, "bridge", cur.node, cur.channels, c2 << cfg.n, cfg.msfa_enabled, rng);

  for (int j = 1; j <= cfg.n; ++j) {
    const std::size_t width = c2 << (cfg.n - j);
    const std::string name = "dec" + std::to_string(j);
    int a = append_tconv(net, name + ".up", cur.node, cur.channels, width, ops::ConvGeom{2, 2, 0},
                         rng);
    a = append_batchnorm(net, name + ".up.bn", a, width);
    a = append_activation(net, name + ".up.relu", a, ops::ActKind::ReLU);
    const BlockOut& skip = enc[static_cast<std::size_t>(cfg.n - j)];
    LayerDef cat;
    cat.name = name + ".skip";
    cat.kind = LayerKind::ConcatChannels;
    cat.inputs = {a, skip.node};
    const int fused = net.add_layer(std::move(cat));
    cur = append_msfa(net, name, fused, width + skip.channels, width, cfg.msfa_enabled, rng);
  }

  int head = append_conv(net, "head.conv", cur.node, cur.channels, 1, ops::ConvGeom{3, 1, 1}, rng);
  append_activation(net, "head.linear", head, ops::ActKind::Linear);
  return net;
}

template <typename T>
Network<T> build_msfa_block(int c_in, int width, bool msfa_enabled, std::uint64_t seed) {
  Network<T> net;
  Rng rng(seed);
  append_msfa(net, "msfa", -1, static_cast<std::size_t>(c_in), static_cast<std::size_t>(width),
              msfa_enabled, rng);
  return net;
}

void validate_inverter_input(const InverterConfig& cfg, const Shape& volume_shape) {
  require(volume_shape.size() == 3, "inverter: expected a D x H x W volume, got " + shape_str(volume_shape));
  const std::size_t divisor = std::size_t(1) << cfg.n;
  const char* axes[3] = {"D", "H", "W"};
  for (int i = 0; i < 3; ++i)
    require(volume_shape[static_cast<std::size_t>(i)] % divisor == 0,
            std::string("inverter: axis ") + axes[i] + " extent " +
                std::to_string(volume_shape[static_cast<std::size_t>(i)]) + " not divisible by 2^n = " +
                std::to_string(divisor));
}

template <typename T>
Tensor<T> inverter_forward(Network<T>& net, const InverterConfig& cfg, const Tensor<T>& volume) {
  validate_inverter_input(cfg, volume.shape);
  Tensor<T> x = volume;
  x.shape = {1, 1, volume.dim(0), volume.dim(1), volume.dim(2)};
  Tensor<T> y = forward(net, x, Mode::Infer);
  y.shape = volume.shape;
  return y;
}

template Network<float> build_inverter<float>(const InverterConfig&, std::uint64_t);
template Network<double> build_inverter<double>(const InverterConfig&, std::uint64_t);
template Network<float> build_msfa_block<float>(int, int, bool, std::uint64_t);
template Network<double> build_msfa_block<double>(int, int, bool, std::uint64_t);
template Tensor<float> inverter_forward<float>(Network<float>&, const InverterConfig&, const Tensor<float>&);
template Tensor<double> inverter_forward<double>(Network<double>&, const InverterConfig&, const Tensor<double>&);

}  // namespace gpr3d
