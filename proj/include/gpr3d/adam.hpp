#pragma once

#include <cmath>

#include "gpr3d/network.hpp"

namespace gpr3d {

/// Adam state: first/second moments per parameter plus the shared step
/// counter. Defaults follow the published method.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::int64_t t = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);

  static AdamState for_network(const Network<T>& net) {
    AdamState s;
    for (const Param<T>& p : net.params) {
      s.m.push_back(Tensor<T>::zeros(p.value.shape));
      s.v.push_back(Tensor<T>::zeros(p.value.shape));
    }
    return s;
  }
};

/// Bias-corrected Adam update over every trainable parameter from the
/// gradients accumulated in param.value.grad. Rejects non-finite gradients.
template <typename T>
void adam_step(Network<T>& net, AdamState<T>& state, T lr) {
  require(state.m.size() == net.params.size(), "adam_step: state does not match network");
  ++state.t;
  const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta1), static_cast<double>(state.t)));
  const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta2), static_cast<double>(state.t)));
  for (std::size_t pi = 0; pi < net.params.size(); ++pi) {
    Param<T>& p = net.params[pi];
    require(p.value.has_grad(), "adam_step: parameter '" + p.name + "' has no gradient");
    T* m = state.m[pi].ptr();
    T* v = state.v[pi].ptr();
    T* th = p.value.ptr();
    const T* g = p.value.gptr();
    const long n = static_cast<long>(p.value.numel());
    for (long i = 0; i < n; ++i) {
      require(std::isfinite(static_cast<double>(g[i])),
              "adam_step: non-finite gradient in '" + p.name + "'");
      m[i] = state.beta1 * m[i] + (T(1) - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (T(1) - state.beta2) * g[i] * g[i];
      const T mhat = m[i] / bc1;
      const T vhat = v[i] / bc2;
      th[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace gpr3d
