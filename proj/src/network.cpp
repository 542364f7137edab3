#include "gpr3d/network.hpp"

#include <algorithm>
#include <cmath>

namespace gpr3d {

template <typename T>
int Network<T>::add_param(const std::string& name, Tensor<T> value) {
  for (const Param<T>& p : params)
    require(p.name != name, "Network: duplicate parameter name '" + name + "'");
  params.push_back({name, std::move(value)});
  return static_cast<int>(params.size()) - 1;
}

template <typename T>
int Network<T>::add_buffer(const std::string& name, Tensor<T> value) {
  for (const Param<T>& p : buffers)
    require(p.name != name, "Network: duplicate buffer name '" + name + "'");
  buffers.push_back({name, std::move(value)});
  return static_cast<int>(buffers.size()) - 1;
}

template <typename T>
int Network<T>::add_layer(LayerDef def) {
  const int id = static_cast<int>(layers.size());
  for (int in : def.inputs)
    require(in >= -1 && in < id, "Network: layer '" + def.name + "' references a later node");
  layers.push_back(std::move(def));
  output_node = id;
  return id;
}

template <typename T>
const Param<T>* Network<T>::find_param(const std::string& name) const {
  for (const Param<T>& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
Param<T>* Network<T>::find_param(const std::string& name) {
  for (Param<T>& p : params)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
const LayerDef* Network<T>::find_layer(const std::string& name) const {
  for (const LayerDef& l : layers)
    if (l.name == name) return &l;
  return nullptr;
}

template <typename T>
int Network<T>::layer_id(const std::string& name) const {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == name) return static_cast<int>(i);
  return -1;
}

template <typename T>
void Network<T>::zero_grads() {
  for (Param<T>& p : params) {
    p.value.ensure_grad();
    p.value.zero_grad();
  }
}

template <typename T>
std::size_t count_parameters(const Network<T>& net) {
  std::size_t n = 0;
  for (const Param<T>& p : net.params) n += p.value.numel();
  return n;
}

template <typename T>
Tensor<T> forward(Network<T>& net, const Tensor<T>& input, Mode mode, ForwardTrace<T>* trace) {
  const std::size_t L = net.layers.size();
  std::vector<Tensor<T>> local_acts;
  std::vector<Tensor<T>>& acts = trace ? trace->acts : local_acts;
  acts.assign(L, Tensor<T>());
  if (trace) {
    trace->pool_argmax.assign(L, {});
    trace->bn_cache.assign(L, {});
    trace->bn_infer_invstd.assign(L, Tensor<T>());
    trace->mode = mode;
  }
  bool saw_train_bn = false;

  auto at = [&](int id) -> const Tensor<T>& { return id < 0 ? input : acts[static_cast<std::size_t>(id)]; };

  for (std::size_t i = 0; i < L; ++i) {
    LayerDef& l = net.layers[i];
    const Tensor<T>& x0 = at(l.inputs.empty() ? -1 : l.inputs[0]);
    switch (l.kind) {
      case LayerKind::Conv3d:
        acts[i] = ops::conv3d_forward(x0, net.params[static_cast<std::size_t>(l.weight)].value,
                                      net.params[static_cast<std::size_t>(l.bias)].value, l.geom);
        break;
      case LayerKind::TConv3d:
        acts[i] = ops::tconv3d_forward(x0, net.params[static_cast<std::size_t>(l.weight)].value,
                                       net.params[static_cast<std::size_t>(l.bias)].value, l.geom);
        break;
      case LayerKind::MaxPool3d: {
        std::vector<std::int64_t> argmax;
        acts[i] = ops::maxpool3d_forward(x0, argmax);
        if (trace) trace->pool_argmax[i] = std::move(argmax);
        break;
      }
      case LayerKind::GlobalAvgPool:
        acts[i] = ops::global_avg_pool(x0);
        break;
      case LayerKind::FullyConnected:
        acts[i] = ops::fully_connected(x0, net.params[static_cast<std::size_t>(l.weight)].value,
                                       net.params[static_cast<std::size_t>(l.bias)].value);
        break;
      case LayerKind::BatchNorm3d: {
        Tensor<T>& rmean = net.buffers[static_cast<std::size_t>(l.running_mean)].value;
        Tensor<T>& rvar = net.buffers[static_cast<std::size_t>(l.running_var)].value;
        if (mode == Mode::Train) {
          ops::BnCache<T> cache;
          acts[i] = ops::batchnorm_train(x0, net.params[static_cast<std::size_t>(l.gamma)].value,
                                         net.params[static_cast<std::size_t>(l.beta)].value,
                                         net.bn_eps, net.bn_momentum, rmean, rvar,
                                         trace ? &cache : nullptr);
          if (trace) trace->bn_cache[i] = std::move(cache);
          saw_train_bn = true;
        } else {
          require(net.bn_batches_seen > 0,
                  "batch_norm '" + l.name + "': inference requested before any running statistics were accumulated");
          acts[i] = ops::batchnorm_infer(x0, net.params[static_cast<std::size_t>(l.gamma)].value,
                                         net.params[static_cast<std::size_t>(l.beta)].value,
                                         net.bn_eps, rmean, rvar);
          if (trace) {
            Tensor<T> inv({rvar.numel()});
            for (std::size_t c = 0; c < rvar.numel(); ++c)
              inv.data[c] = T(1) / std::sqrt(rvar.data[c] + net.bn_eps);
            trace->bn_infer_invstd[i] = std::move(inv);
          }
        }
        break;
      }
      case LayerKind::Activation:
        acts[i] = ops::activation(l.act, x0);
        break;
      case LayerKind::ConcatChannels: {
        std::vector<const Tensor<T>*> xs;
        for (int in : l.inputs) xs.push_back(&at(in));
        acts[i] = ops::concat_channels(xs);
        break;
      }
      case LayerKind::ResidualAdd:
        acts[i] = ops::add(at(l.inputs[0]), at(l.inputs[1]));
        break;
      case LayerKind::RescaleChannels:
        acts[i] = ops::rescale_channels(at(l.inputs[0]), at(l.inputs[1]));
        break;
    }
  }
  if (saw_train_bn) ++net.bn_batches_seen;
  require(net.output_node >= 0, "Network: empty graph");
  return acts[static_cast<std::size_t>(net.output_node)];
}

template <typename T>
Tensor<T> backward(Network<T>& net, const Tensor<T>& input, const ForwardTrace<T>& trace,
                   const Tensor<T>& dout) {
  const std::size_t L = net.layers.size();
  require(trace.acts.size() == L, "Network::backward: trace does not match graph");
  std::vector<Tensor<T>> node_grads(L);
  Tensor<T> input_grad = Tensor<T>::zeros(input.shape);
  node_grads[static_cast<std::size_t>(net.output_node)] = dout;

  auto grad_of = [&](int id) -> Tensor<T>& {
    if (id < 0) return input_grad;
    Tensor<T>& g = node_grads[static_cast<std::size_t>(id)];
    if (g.numel() == 0) g = Tensor<T>::zeros(trace.acts[static_cast<std::size_t>(id)].shape);
    return g;
  };
  auto act_of = [&](int id) -> const Tensor<T>& {
    return id < 0 ? input : trace.acts[static_cast<std::size_t>(id)];
  };

  for (std::size_t ri = L; ri-- > 0;) {
    LayerDef& l = net.layers[ri];
    Tensor<T>& dy = node_grads[ri];
    if (dy.numel() == 0) continue;  // node unused downstream
    const int in0 = l.inputs.empty() ? -1 : l.inputs[0];
    switch (l.kind) {
      case LayerKind::Conv3d: {
        Param<T>& kern = net.params[static_cast<std::size_t>(l.weight)];
        Param<T>& bias = net.params[static_cast<std::size_t>(l.bias)];
        kern.value.ensure_grad();
        bias.value.ensure_grad();
        Tensor<T> dk(kern.value.shape);
        dk.data.swap(kern.value.grad);
        Tensor<T> db(bias.value.shape);
        db.data.swap(bias.value.grad);
        ops::conv3d_backward(act_of(in0), kern.value, l.geom, dy, &grad_of(in0), &dk, &db);
        kern.value.grad.swap(dk.data);
        bias.value.grad.swap(db.data);
        break;
      }
      case LayerKind::TConv3d: {
        Param<T>& kern = net.params[static_cast<std::size_t>(l.weight)];
        Param<T>& bias = net.params[static_cast<std::size_t>(l.bias)];
        kern.value.ensure_grad();
        bias.value.ensure_grad();
        Tensor<T> dk(kern.value.shape);
        dk.data.swap(kern.value.grad);
        Tensor<T> db(bias.value.shape);
        db.data.swap(bias.value.grad);
        ops::tconv3d_backward(act_of(in0), kern.value, l.geom, dy, &grad_of(in0), &dk, &db);
        kern.value.grad.swap(dk.data);
        bias.value.grad.swap(db.data);
        break;
      }
      case LayerKind::MaxPool3d:
        ops::maxpool3d_backward(trace.pool_argmax[ri], dy, &grad_of(in0));
        break;
      case LayerKind::GlobalAvgPool:
        ops::global_avg_pool_backward(act_of(in0).shape, dy, &grad_of(in0));
        break;
      case LayerKind::FullyConnected: {
        Param<T>& w = net.params[static_cast<std::size_t>(l.weight)];
        Param<T>& b = net.params[static_cast<std::size_t>(l.bias)];
        w.value.ensure_grad();
        b.value.ensure_grad();
        Tensor<T> dw(w.value.shape);
        dw.data.swap(w.value.grad);
        Tensor<T> db(b.value.shape);
        db.data.swap(b.value.grad);
        ops::fully_connected_backward(act_of(in0), w.value, dy, &grad_of(in0), &dw, &db);
        w.value.grad.swap(dw.data);
        b.value.grad.swap(db.data);
        break;
      }
      case LayerKind::BatchNorm3d: {
        Param<T>& gamma = net.params[static_cast<std::size_t>(l.gamma)];
        Param<T>& beta = net.params[static_cast<std::size_t>(l.beta)];
        gamma.value.ensure_grad();
        beta.value.ensure_grad();
        Tensor<T> dg(gamma.value.shape);
        dg.data.swap(gamma.value.grad);
        Tensor<T> db(beta.value.shape);
        db.data.swap(beta.value.grad);
        if (trace.mode == Mode::Train) {
          ops::batchnorm_backward_train(act_of(in0), gamma.value, trace.bn_cache[ri], dy,
                                        &grad_of(in0), &dg, &db);
        } else {
          ops::batchnorm_backward_infer(gamma.value, trace.bn_infer_invstd[ri], dy, &grad_of(in0));
        }
        gamma.value.grad.swap(dg.data);
        beta.value.grad.swap(db.data);
        break;
      }
      case LayerKind::Activation:
        ops::activation_backward(l.act, act_of(in0), trace.acts[ri], dy, &grad_of(in0));
        break;
      case LayerKind::ConcatChannels: {
        std::vector<Shape> shapes;
        std::vector<Tensor<T>*> dxs;
        for (int in : l.inputs) {
          shapes.push_back(act_of(in).shape);
          dxs.push_back(&grad_of(in));
        }
        ops::concat_channels_backward(shapes, dy, dxs);
        break;
      }
      case LayerKind::ResidualAdd: {
        for (int in : l.inputs) {
          Tensor<T>& g = grad_of(in);
          const long n = static_cast<long>(dy.numel());
          T* gp = g.ptr();
          const T* dyp = dy.ptr();
#pragma omp parallel for simd schedule(static)
          for (long j = 0; j < n; ++j) gp[j] += dyp[j];
        }
        break;
      }
      case LayerKind::RescaleChannels:
        ops::rescale_channels_backward(act_of(l.inputs[0]), act_of(l.inputs[1]), dy,
                                       &grad_of(l.inputs[0]), &grad_of(l.inputs[1]));
        break;
    }
  }
  return input_grad;
}

template <typename T>
Tensor<T> init_uniform_fan_in(const Shape& shape, std::size_t fan_in, Rng& rng) {
  Tensor<T> t(shape);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i)
    t.data[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename To, typename From>
Network<To> network_cast(const Network<From>& net) {
  Network<To> out;
  out.layers = net.layers;
  out.output_node = net.output_node;
  out.bn_batches_seen = net.bn_batches_seen;
  out.bn_eps = static_cast<To>(net.bn_eps);
  out.bn_momentum = static_cast<To>(net.bn_momentum);
  for (const Param<From>& p : net.params) out.params.push_back({p.name, tensor_cast<To>(p.value)});
  for (const Param<From>& b : net.buffers) out.buffers.push_back({b.name, tensor_cast<To>(b.value)});
  return out;
}

template <typename T>
int append_conv(Network<T>& net, const std::string& name, int input, std::size_t c_in,
                std::size_t c_out, ops::ConvGeom geom, Rng& rng) {
  const std::size_t k = static_cast<std::size_t>(geom.kernel);
  const std::size_t fan_in = c_in * k * k * k;
  LayerDef def;
  def.name = name;
  def.kind = LayerKind::Conv3d;
  def.inputs = {input};
  def.geom = geom;
  def.weight = net.add_param(name + ".kernel", init_uniform_fan_in<T>({c_out, c_in, k, k, k}, fan_in, rng));
  def.bias = net.add_param(name + ".bias", Tensor<T>::zeros({c_out}));
  return net.add_layer(std::move(def));
}

template <typename T>
int append_tconv(Network<T>& net, const std::string& name, int input, std::size_t c_in,
                 std::size_t c_out, ops::ConvGeom geom, Rng& rng) {
  const std::size_t k = static_cast<std::size_t>(geom.kernel);
  const std::size_t fan_in = c_in * k * k * k;
  LayerDef def;
  def.name = name;
  def.kind = LayerKind::TConv3d;
  def.inputs = {input};
  def.geom = geom;
  def.weight = net.add_param(name + ".kernel", init_uniform_fan_in<T>({c_out, c_in, k, k, k}, fan_in, rng));
  def.bias = net.add_param(name + ".bias", Tensor<T>::zeros({c_out}));
  return net.add_layer(std::move(def));
}

template <typename T>
int append_fc(Network<T>& net, const std::string& name, int input, std::size_t c_in,
              std::size_t c_out, Rng& rng) {
  LayerDef def;
  def.name = name;
  def.kind = LayerKind::FullyConnected;
  def.inputs = {input};
  def.weight = net.add_param(name + ".weight", init_uniform_fan_in<T>({c_out, c_in}, c_in, rng));
  def.bias = net.add_param(name + ".bias", Tensor<T>::zeros({c_out}));
  return net.add_layer(std::move(def));
}

template <typename T>
int append_batchnorm(Network<T>& net, const std::string& name, int input, std::size_t channels) {
  LayerDef def;
  def.name = name;
  def.kind = LayerKind::BatchNorm3d;
  def.inputs = {input};
  def.gamma = net.add_param(name + ".gamma", Tensor<T>::full({channels}, T(1)));
  def.beta = net.add_param(name + ".beta", Tensor<T>::zeros({channels}));
  def.running_mean = net.add_buffer(name + ".running_mean", Tensor<T>::zeros({channels}));
  def.running_var = net.add_buffer(name + ".running_var", Tensor<T>::full({channels}, T(1)));
  return net.add_layer(std::move(def));
}

template <typename T>
int append_activation(Network<T>& net, const std::string& name, int input, ops::ActKind act) {
  LayerDef def;
  def.name = name;
  def.kind = LayerKind::Activation;
  def.inputs = {input};
  def.act = act;
  return net.add_layer(std::move(def));
}

template struct Network<float>;
template struct Network<double>;

#define GPR3D_INSTANTIATE_NET(T)                                                                  \
  template std::size_t count_parameters<T>(const Network<T>&);                                   \
  template Tensor<T> forward<T>(Network<T>&, const Tensor<T>&, Mode, ForwardTrace<T>*);          \
  template Tensor<T> backward<T>(Network<T>&, const Tensor<T>&, const ForwardTrace<T>&,          \
                                 const Tensor<T>&);                                              \
  template Tensor<T> init_uniform_fan_in<T>(const Shape&, std::size_t, Rng&);                    \
  template int append_conv<T>(Network<T>&, const std::string&, int, std::size_t, std::size_t,    \
                              ops::ConvGeom, Rng&);                                              \
  template int append_tconv<T>(Network<T>&, const std::string&, int, std::size_t, std::size_t,   \
                               ops::ConvGeom, Rng&);                                             \
  template int append_fc<T>(Network<T>&, const std::string&, int, std::size_t, std::size_t,      \
                            Rng&);                                                               \
  template int append_batchnorm<T>(Network<T>&, const std::string&, int, std::size_t);           \
  template int append_activation<T>(Network<T>&, const std::string&, int, ops::ActKind);

GPR3D_INSTANTIATE_NET(float)
GPR3D_INSTANTIATE_NET(double)

template Network<float> network_cast<float, double>(const Network<double>&);
template Network<double> network_cast<double, float>(const Network<float>&);

}  // namespace gpr3d
