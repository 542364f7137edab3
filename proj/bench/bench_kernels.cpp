// Times the OpenMP kernels against the serial reference loops and checks
// that the two paths agree. Build and run:
//   cmake --build build && ./build/bench/bench_kernels [workers]
#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "gpr3d/ops.hpp"
#include "gpr3d/parallel.hpp"
#include "gpr3d/reference_ops.hpp"
#include "gpr3d/rng.hpp"

using namespace gpr3d;
using clock_type = std::chrono::steady_clock;

namespace {

template <typename F>
double time_best_of(int reps, F&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = clock_type::now();
    fn();
    const auto t1 = clock_type::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

template <typename T>
Tensor<T> rand_tensor(const Shape& s, Rng& rng) {
  Tensor<T> t(s);
  for (auto& v : t.data) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  return t;
}

template <typename T>
double diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
  return m;
}

template <typename T>
void bench_conv(const char* label, std::size_t c_in, std::size_t c_out, std::size_t e) {
  Rng rng(42);
  const Tensor<T> x = rand_tensor<T>({1, c_in, e, e, e}, rng);
  const Tensor<T> k = rand_tensor<T>({c_out, c_in, 3, 3, 3}, rng);
  const Tensor<T> b = rand_tensor<T>({c_out}, rng);
  const ops::ConvGeom g{3, 1, 1};

  Tensor<T> serial, parallel;
  const double t_serial = time_best_of(2, [&] { serial = refops::conv3d(x, k, b, g); });
  const double t_par = time_best_of(3, [&] { parallel = ops::conv3d_forward(x, k, b, g); });

  Tensor<T> dy = rand_tensor<T>(parallel.shape, rng);
  Tensor<T> dx(x.shape), dk(k.shape), db(b.shape);
  const double t_bwd = time_best_of(3, [&] {
    std::fill(dx.data.begin(), dx.data.end(), T(0));
    std::fill(dk.data.begin(), dk.data.end(), T(0));
    std::fill(db.data.begin(), db.data.end(), T(0));
    ops::conv3d_backward(x, k, g, dy, &dx, &dk, &db);
  });

  std::printf("%-26s serial %8.2f ms   omp %8.2f ms   x%-5.1f bwd %8.2f ms   |diff| %.2e\n", label,
              1e3 * t_serial, 1e3 * t_par, t_serial / t_par, 1e3 * t_bwd, diff(serial, parallel));
}

template <typename T>
void bench_tconv(const char* label, std::size_t c_in, std::size_t c_out, std::size_t e) {
  Rng rng(43);
  const Tensor<T> x = rand_tensor<T>({1, c_in, e, e, e}, rng);
  const Tensor<T> k = rand_tensor<T>({c_out, c_in, 2, 2, 2}, rng);
  const Tensor<T> b = rand_tensor<T>({c_out}, rng);
  const ops::ConvGeom g{2, 2, 0};
  Tensor<T> serial, parallel;
  const double t_serial = time_best_of(2, [&] { serial = refops::tconv3d(x, k, b, g); });
  const double t_par = time_best_of(3, [&] { parallel = ops::tconv3d_forward(x, k, b, g); });
  std::printf("%-26s serial %8.2f ms   omp %8.2f ms   x%-5.1f %21s |diff| %.2e\n", label,
              1e3 * t_serial, 1e3 * t_par, t_serial / t_par, "", diff(serial, parallel));
}

template <typename T>
void bench_pool(const char* label, std::size_t c, std::size_t e) {
  Rng rng(44);
  const Tensor<T> x = rand_tensor<T>({1, c, e, e, e}, rng);
  Tensor<T> serial, parallel;
  std::vector<std::int64_t> argmax;
  const double t_serial = time_best_of(2, [&] { serial = refops::maxpool3d(x); });
  const double t_par = time_best_of(3, [&] { parallel = ops::maxpool3d_forward(x, argmax); });
  std::printf("%-26s serial %8.2f ms   omp %8.2f ms   x%-5.1f %21s |diff| %.2e\n", label,
              1e3 * t_serial, 1e3 * t_par, t_serial / t_par, "", diff(serial, parallel));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) set_workers(std::atoi(argv[1]));
  std::printf("workers: %d\n", max_workers());
  bench_conv<float>("conv3d f32 8->8 32^3", 8, 8, 32);
  bench_conv<float>("conv3d f32 16->16 32^3", 16, 16, 32);
  bench_conv<double>("conv3d f64 8->8 32^3", 8, 8, 32);
  bench_tconv<float>("tconv3d f32 16->8 16^3", 16, 8, 16);
  bench_pool<float>("maxpool f32 8ch 64^3", 8, 64);
  return 0;
}
