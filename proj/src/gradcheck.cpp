#include "gpr3d/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gpr3d {

GradCheckReport grad_check_network(Network<double>& net, const Tensor<double>& input, double step,
                                   Mode mode, std::uint64_t weight_seed, double floor) {
  ForwardTrace<double> trace;
  Tensor<double> y = forward(net, input, mode, &trace);
  Tensor<double> w(y.shape);
  Rng wr(weight_seed);
  for (double& v : w.data) v = wr.uniform(-1.0, 1.0);

  net.zero_grads();
  Tensor<double> mutable_input = input;
  Tensor<double> din = backward(net, mutable_input, trace, w);

  auto loss = [&]() {
    Tensor<double> out = forward(net, mutable_input, mode);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.numel(); ++i) acc += w.data[i] * out.data[i];
    return acc;
  };

  GradCheckReport report;
  auto check = [&](double analytic, double* slot, const std::string& where) {
    const double saved = *slot;
    *slot = saved + step;
    const double lp = loss();
    *slot = saved - step;
    const double lm = loss();
    *slot = saved;
    const double numeric = (lp - lm) / (2.0 * step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    const double rel = std::abs(analytic - numeric) / denom;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = where;
    }
  };

  for (Param<double>& p : net.params)
    for (std::size_t i = 0; i < p.value.numel(); ++i)
      check(p.value.grad[i], &p.value.data[i], p.name);
  for (std::size_t i = 0; i < mutable_input.numel(); ++i)
    check(din.data[i], &mutable_input.data[i], "input");
  return report;
}

double kink_margin(Network<double>& net, const Tensor<double>& input, Mode mode) {
  ForwardTrace<double> trace;
  forward(net, input, mode, &trace);
  auto act_of = [&](int id) -> const Tensor<double>& {
    return id < 0 ? input : trace.acts[static_cast<std::size_t>(id)];
  };
  double margin = std::numeric_limits<double>::infinity();
  for (const LayerDef& l : net.layers) {
    if (l.kind == LayerKind::Activation && l.act == ops::ActKind::ReLU) {
      for (double v : act_of(l.inputs[0]).data) margin = std::min(margin, std::abs(v));
    } else if (l.kind == LayerKind::MaxPool3d) {
      const Tensor<double>& x = act_of(l.inputs[0]);
      const std::size_t C = x.dim(0) * x.dim(1), D = x.dim(2), H = x.dim(3), W = x.dim(4);
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t od = 0; od < D / 2; ++od)
          for (std::size_t oh = 0; oh < H / 2; ++oh)
            for (std::size_t ow = 0; ow < W / 2; ++ow) {
              double top = -std::numeric_limits<double>::infinity(), second = top;
              for (std::size_t dz = 0; dz < 2; ++dz)
                for (std::size_t dy = 0; dy < 2; ++dy)
                  for (std::size_t dx = 0; dx < 2; ++dx) {
                    const double v = x.data[((c * D + 2 * od + dz) * H + 2 * oh + dy) * W + 2 * ow + dx];
                    if (v > top) {
                      second = top;
                      top = v;
                    } else if (v > second) {
                      second = v;
                    }
                  }
              // An exact tie at 0 comes from ReLU clamping; every tied route
              // carries zero gradient, so it is not a discontinuity.
              if (top == second && top == 0.0) continue;
              margin = std::min(margin, top - second);
            }
    }
  }
  return margin;
}

}  // namespace gpr3d
