// Acceptance suite: one pass/fail line per criterion. Run all criteria or a
// subset by id:  ./acceptance            (all)
//                ./acceptance 1 5 6      (selected)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <vector>

#include "gpr3d/cli.hpp"
#include "gpr3d/clutter.hpp"
#include "gpr3d/dataset.hpp"
#include "gpr3d/denoiser.hpp"
#include "gpr3d/evaluator.hpp"
#include "gpr3d/forward_model.hpp"
#include "gpr3d/gradcheck.hpp"
#include "gpr3d/inverter.hpp"
#include "gpr3d/losses.hpp"
#include "gpr3d/metrics.hpp"
#include "gpr3d/parallel.hpp"
#include "gpr3d/preprocess.hpp"
#include "gpr3d/reference_ops.hpp"
#include "gpr3d/trainer.hpp"
#include "gpr3d/volume_io.hpp"

using namespace gpr3d;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

bool expect(bool ok, const char* what) {
  if (!ok) std::printf("       FAILED: %s\n", what);
  return ok;
}

const fs::path kWork = "acceptance_work";

// ---------------------------------------------------------------- shared

// Desk-scale benchmark configuration used by criteria 7 and 8.
RunConfig bench_config() {
  RunConfig cfg;
  cfg.min_objects = 1;
  cfg.max_objects = 2;
  cfg.survey.time_window = 7.5e-9;
  cfg.survey.time_samples = 120;
  cfg.cscan_dims = {32, 32, 32};
  cfg.map_dims = {32, 32, 32};
  cfg.denoiser = {1, 4, 4};
  cfg.inverter = {3, 4, true};
  cfg.train_split = 0.86;  // 48 train / 8 val out of 56
  return cfg;
}

constexpr int kDenoiserEpochs = 30;
constexpr int kInverterEpochs = 48;
constexpr int kAblationDenoiserEpochs = 15;
constexpr int kAblationInverterEpochs = 30;

struct BenchData {
  Manifest train_man, test_man;
  std::string train_dir, test_dir;
};

BenchData make_bench_data() {
  BenchData d;
  d.train_dir = (kWork / "bench_train").string();
  d.test_dir = (kWork / "bench_test").string();
  RunConfig cfg = bench_config();
  cfg.dataset_count = 56;
  cfg.dataset_seed = 1001;
  if (fs::exists(d.train_dir + "/manifest.json") && fs::exists(d.test_dir + "/manifest.json")) {
    d.train_man = load_manifest(d.train_dir + "/manifest.json");
    d.test_man = load_manifest(d.test_dir + "/manifest.json");
    if (d.train_man.fingerprint == config_fingerprint(cfg) && d.train_man.records.size() == 56)
      return d;  // reuse across criteria
  }
  d.train_man = generate_dataset(cfg, d.train_dir);
  RunConfig tcfg = cfg;
  tcfg.dataset_count = 8;
  tcfg.dataset_seed = 2002;
  d.test_man = generate_dataset(tcfg, d.test_dir);
  return d;
}

TrainResult train_denoiser_stage(const BenchData& d, int epochs, std::uint64_t seed) {
  TrainSchedule sch;
  sch.epochs = epochs;
  sch.split = 0.86;
  sch.seed = seed;
  Network<float> net = build_denoiser<float>(bench_config().denoiser, mix_seed(seed, 0xD0));
  return train_stage(net, denoiser_task(), d.train_man, d.train_dir, sch);
}

TrainResult train_inverter_stage(const BenchData& d, int epochs, std::uint64_t seed, bool msfa,
                                 InputKind input) {
  TrainSchedule sch;
  sch.epochs = epochs;
  sch.split = 0.86;
  sch.seed = seed;
  InverterConfig cfg = bench_config().inverter;
  cfg.msfa_enabled = msfa;
  Network<float> net = build_inverter<float>(cfg, mix_seed(seed, 0x10));
  net.find_param("head.conv.bias")->value.data[0] =
      static_cast<float>(manifest_target_mean(d.train_man, d.train_dir, TargetKind::Map));
  return train_stage(net, inverter_task(input), d.train_man, d.train_dir, sch);
}

double mean_test_iou(const BenchData& d, Network<float>* den, Network<float>& inv,
                     const InverterConfig& icfg) {
  double total = 0;
  for (const ManifestRecord& rec : d.test_man.records) {
    Tensor<float> noisy = read_volume<float>(d.test_dir + "/" + rec.noisy_path);
    Tensor<float> gt = read_volume<float>(d.test_dir + "/" + rec.map_path);
    Tensor<float> stage1 = den ? denoiser_forward(*den, noisy) : noisy;
    Tensor<float> pred = inverter_forward(inv, icfg, stage1);
    double min_eps = 1e300;
    for (const SubsurfaceObject& o : rec.scene.objects) min_eps = std::min(min_eps, o.epsilon_r);
    // threshold midway between background and object permittivity
    const float tau = static_cast<float>(0.5 * (rec.scene.soil_epsilon_r + min_eps));
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < gt.numel(); ++i) {
      const bool g = gt.data[i] >= tau, p = pred.data[i] >= tau;
      inter += (g && p);
      uni += (g || p);
    }
    total += uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
  }
  return total / static_cast<double>(d.test_man.records.size());
}

// ------------------------------------------------------------- criteria

bool criterion1() {
  const std::size_t inv = count_parameters(build_inverter<float>({4, 8, true}, 1));
  const std::size_t den = count_parameters(build_denoiser<float>({2, 8, 4}, 1));
  std::printf("       inverter(4,8,msfa) = %zu (anchor 3208642), denoiser(2,8,4) = %zu\n", inv, den);
  bool ok = expect(std::abs(static_cast<double>(inv) - 3208642.0) / 3208642.0 < 0.01,
                   "inverter count within 1% of 3.06 * 2^20");
  ok &= expect(den >= 10000 && den <= 16000, "denoiser count in [10000, 16000]");
  ok &= expect(den == 14413, "denoiser ledger value 14413");
  return ok;
}

bool criterion2() { return expect(run_gradcheck_suite(1e-3) == 0, "gradient suite all green"); }

bool criterion3() {
  Rng rng(0x0AC1E);
  double worst = 0;
  auto track = [&](double got, double want) {
    const double denom = std::max({std::abs(got), std::abs(want), 1e-12});
    worst = std::max(worst, std::abs(got - want) / denom);
  };
  auto rnd = [&](const Shape& s, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(s);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
  };

  for (int i = 0; i < 100; ++i) {
    // conv3d over mixed geometries
    const std::size_t cin = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const std::size_t cout = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const ops::ConvGeom g{rng.uniform_int(0, 1) ? 3 : 2, 1, rng.uniform_int(0, 1)};
    const std::size_t e = static_cast<std::size_t>(rng.uniform_int(g.kernel, 6));
    Tensor<double> x = rnd({1, cin, e, e, e});
    Tensor<double> k = rnd({cout, cin, static_cast<std::size_t>(g.kernel),
                            static_cast<std::size_t>(g.kernel), static_cast<std::size_t>(g.kernel)});
    Tensor<double> b = rnd({cout});
    Tensor<double> got = ops::conv3d_forward(x, k, b, g);
    Tensor<double> want = refops::conv3d(x, k, b, g);
    for (std::size_t j = 0; j < got.numel(); ++j) track(got.data[j], want.data[j]);

    // transposed conv, non-overlapping and overlapping
    const ops::ConvGeom tg{rng.uniform_int(0, 1) ? 2 : 3, 2, 0};
    Tensor<double> tk = rnd({cout, cin, static_cast<std::size_t>(tg.kernel),
                             static_cast<std::size_t>(tg.kernel), static_cast<std::size_t>(tg.kernel)});
    Tensor<double> tx = rnd({1, cin, 3, 3, 3});
    Tensor<double> tgot = ops::tconv3d_forward(tx, tk, b, tg);
    Tensor<double> twant = refops::tconv3d(tx, tk, b, tg);
    for (std::size_t j = 0; j < tgot.numel(); ++j) track(tgot.data[j], twant.data[j]);

    // pooling
    Tensor<double> px = rnd({1, 2, 4, 4, 4});
    std::vector<std::int64_t> argmax;
    Tensor<double> pgot = ops::maxpool3d_forward(px, argmax);
    Tensor<double> pwant = refops::maxpool3d(px);
    for (std::size_t j = 0; j < pgot.numel(); ++j) track(pgot.data[j], pwant.data[j]);

    // fully connected
    Tensor<double> fx = rnd({2, 5});
    Tensor<double> fw = rnd({3, 5});
    Tensor<double> fb = rnd({3});
    Tensor<double> fgot = ops::fully_connected(fx, fw, fb);
    Tensor<double> fwant = refops::fully_connected(fx, fw, fb);
    for (std::size_t j = 0; j < fgot.numel(); ++j) track(fgot.data[j], fwant.data[j]);

    // losses against their defining sums
    Tensor<double> p = rnd({4, 3, 4});
    Tensor<double> t = rnd({4, 3, 4});
    track(loss_mse(p, t), refops::mse(p, t));
    track(loss_mae(p, t), refops::mae(p, t));

    // metrics against naive loops
    Tensor<double> mt = rnd({4, 4, 4}, 0.0, 1.0);
    Tensor<double> mp = rnd({4, 4, 4}, 0.0, 1.0);
    const std::size_t n = mt.numel();
    double mu_t = 0, mu_p = 0;
    for (std::size_t j = 0; j < n; ++j) {
      mu_t += mt.data[j];
      mu_p += mp.data[j];
    }
    mu_t /= static_cast<double>(n);
    mu_p /= static_cast<double>(n);
    double vt = 0, vp = 0, cov = 0, se = 0, ae = 0, rel_num = 0, rel_den = 0, ape = 0;
    for (std::size_t j = 0; j < n; ++j) {
      vt += (mt.data[j] - mu_t) * (mt.data[j] - mu_t);
      vp += (mp.data[j] - mu_p) * (mp.data[j] - mu_p);
      cov += (mt.data[j] - mu_t) * (mp.data[j] - mu_p);
      const double dd = mp.data[j] - mt.data[j];
      se += dd * dd;
      ae += std::abs(dd);
      rel_num += dd * dd;
      rel_den += mt.data[j] * mt.data[j];
      ape += std::abs(dd) / std::max(std::abs(mt.data[j]), 1e-6);
    }
    vt /= static_cast<double>(n);
    vp /= static_cast<double>(n);
    cov /= static_cast<double>(n);
    const double c1 = 1e-4, c2 = 9e-4;
    track(compute_ssim(mt, mp, SsimConstants(1.0)),
          (2 * mu_p * mu_t + c1) * (2 * cov + c2) /
              ((mu_p * mu_p + mu_t * mu_t + c1) * (vp + vt + c2)));
    track(compute_mse(mt, mp), se / static_cast<double>(n));
    track(compute_mae(mt, mp), ae / static_cast<double>(n));
    track(compute_psnr(mt, mp), 10.0 * std::log10(static_cast<double>(n) / se));
    track(compute_mre(mt, mp), std::sqrt(rel_num / rel_den) * 100.0);
    track(compute_mape(mt, mp), ape / static_cast<double>(n) * 100.0);
  }
  std::printf("       worst relative deviation vs naive loops: %.3e\n", worst);
  return expect(worst < 1e-9, "all loop-oracle deviations below 1e-9");
}

bool criterion4() {
  bool ok = expect(fresnel_reflectivity(4.0, 16.0) == -1.0 / 3.0, "Gamma(4 -> 16) == -1/3");

  Scene zero;
  SubsurfaceObject s;
  s.shape = ObjectShape::Sphere;
  s.center = {0.5, 0.5, 0.13};
  s.radius = 0.04;
  s.epsilon_r = 4.0;
  zero.objects.push_back(s);
  SurveyConfig survey;
  survey.time_samples = 128;
  Tensor<double> c = forward_model(zero, survey);
  bool all_zero = true;
  for (double v : c.data) all_zero &= v == 0.0;
  ok &= expect(all_zero, "zero-contrast scene gives an all-zero C-scan");

  SurveyConfig apex_survey;
  apex_survey.tx_rx_offset = 0.0;
  apex_survey.antenna_height = 0.0;
  apex_survey.time_samples = 512;
  const double v = kSpeedOfLight / 2.0;
  const double dt = apex_survey.time_window / apex_survey.time_samples;
  Rng rng(0xA9E);
  int misses = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int pi = rng.uniform_int(0, 9), li = rng.uniform_int(0, 11);
    const double px = (pi + 0.5) * 0.1, py = (li + 0.5) / 12.0;
    const Vec3 pos{px + rng.uniform(-0.02, 0.02), py + rng.uniform(-0.02, 0.02),
                   rng.uniform(0.08, 0.24)};
    Tensor<double> ct = synthesize_traces({{pos, 0.5}}, apex_survey, 4.0);
    const double dxp = pos.x - px, dyp = pos.y - py;
    const double expect_tau = 2.0 * std::sqrt(dxp * dxp + dyp * dyp + pos.z * pos.z) / v;
    std::size_t k_best = 0;
    double a_best = 0;
    for (std::size_t k = 0; k < 512; ++k) {
      const double a = std::abs(ct.data[k * 120 + static_cast<std::size_t>(li * 10 + pi)]);
      if (a > a_best) {
        a_best = a;
        k_best = k;
      }
    }
    misses += std::abs(static_cast<double>(k_best) * dt - expect_tau) > dt;
  }
  std::printf("       apex-time misses: %d / 20\n", misses);
  ok &= expect(misses == 0, "hyperbola apexes within one time sample");
  return ok;
}

bool criterion5() {
  const std::vector<long> rf = receptive_field({3, 3, 3}, {1, 1, 1});
  return expect(rf == std::vector<long>{3, 5, 7}, "receptive fields [3,5,7]");
}

bool criterion6() {
  bool ok = true;
  {
    Network<float> net = build_denoiser<float>({2, 8, 4}, 7);
    for (float& v : net.find_param("recon.conv.kernel")->value.data) v = 0.0f;
    for (float& v : net.find_param("recon.conv.bias")->value.data) v = 0.0f;
    Rng rng(3);
    Tensor<float> y({12, 12, 12});
    for (float& v : y.data) v = static_cast<float>(rng.uniform(-0.5, 1.0));
    Tensor<float> out = denoiser_forward(net, y);
    bool identical = out.shape == y.shape;
    for (std::size_t i = 0; identical && i < y.numel(); ++i) {
      const float want = y.data[i] > 0.0f ? y.data[i] : 0.0f;
      identical &= std::memcmp(&out.data[i], &want, sizeof(float)) == 0;
    }
    ok &= expect(identical, "zeroed reconstruction conv returns ReLU(input) bit-exactly");
  }
  {
    InverterConfig icfg{4, 8, true};
    Network<float> net = build_inverter<float>(icfg, 7);
    net.bn_batches_seen = 1;
    Rng rng(4);
    for (std::size_t e : {std::size_t(32), std::size_t(64)}) {
      Tensor<float> x({e, e, e});
      for (float& v : x.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
      ok &= expect(inverter_forward(net, icfg, x).shape == x.shape,
                   "inverter output shape equals input shape");
    }
  }
  ok &= expect(count_parameters(build_inverter<float>({4, 8, false}, 1)) <
                   count_parameters(build_inverter<float>({4, 8, true}, 1)),
               "disabling aggregation strictly reduces the parameter count");
  return ok;
}

bool criterion7() {
  BenchData d = make_bench_data();
  TrainResult den = train_denoiser_stage(d, kDenoiserEpochs, 11);
  TrainResult inv = train_inverter_stage(d, kInverterEpochs, 12, true, InputKind::Clean);
  const InverterConfig icfg = bench_config().inverter;
  EvalReport report = evaluate_dataset(&den.best_net, inv.best_net, icfg, d.test_man, d.test_dir);
  const double ssim = report.summary.at("all").den_ssim;
  const double iou = mean_test_iou(d, &den.best_net, inv.best_net, icfg);
  std::printf("       test denoised SSIM %.4f (>= 0.90), localization IoU %.3f (>= 0.3)\n", ssim, iou);
  std::printf("       inverter test MAE %.4f, MSE %.4f\n", report.summary.at("all").inv_mae,
              report.summary.at("all").inv_mse);
  bool ok = expect(ssim >= 0.90, "denoised C-scan SSIM >= 0.90");
  ok &= expect(iou >= 0.3, "object-localization IoU >= 0.3");

  // persist artifacts for inspection / reuse
  save_checkpoint((kWork / "denoiser.gprc").string(),
                  stage_checkpoint(den, arch_header(bench_config().denoiser), d.train_man.fingerprint));
  save_checkpoint((kWork / "inverter.gprc").string(),
                  stage_checkpoint(inv, arch_header(icfg), d.train_man.fingerprint));
  return ok;
}

bool criterion8() {
  BenchData d = make_bench_data();
  double mae_full = 0, mae_base = 0;
  for (std::uint64_t seed : {21ull, 22ull, 23ull}) {
    TrainResult den = train_denoiser_stage(d, kAblationDenoiserEpochs, seed);
    TrainResult inv = train_inverter_stage(d, kAblationInverterEpochs, seed, true, InputKind::Clean);
    const InverterConfig on = bench_config().inverter;
    EvalReport full = evaluate_dataset(&den.best_net, inv.best_net, on, d.test_man, d.test_dir);
    mae_full += full.summary.at("all").inv_mae;

    // Model (1): no denoiser, no multi-scale aggregation, noisy inputs
    TrainResult base = train_inverter_stage(d, kAblationInverterEpochs, seed, false, InputKind::Noisy);
    InverterConfig off = bench_config().inverter;
    off.msfa_enabled = false;
    EvalReport baseline = evaluate_dataset(nullptr, base.best_net, off, d.test_man, d.test_dir);
    mae_base += baseline.summary.at("all").inv_mae;
    std::printf("       seed %llu: full MAE %.4f vs baseline MAE %.4f\n",
                static_cast<unsigned long long>(seed), full.summary.at("all").inv_mae,
                baseline.summary.at("all").inv_mae);
  }
  mae_full /= 3.0;
  mae_base /= 3.0;
  std::printf("       mean inversion MAE: full %.4f, model(1) %.4f\n", mae_full, mae_base);
  return expect(mae_full < mae_base, "full pipeline strictly beats model (1)");
}

bool criterion9() {
  bool ok = true;
  // dataset generation is bit-identical for any worker count
  RunConfig cfg = bench_config();
  cfg.dataset_count = 3;
  cfg.dataset_seed = 909;
  cfg.survey.time_samples = 64;
  cfg.cscan_dims = {16, 16, 16};
  cfg.map_dims = {16, 16, 16};
  const std::string d1 = (kWork / "det_w1").string(), d2 = (kWork / "det_w2").string();
  fs::remove_all(d1);
  fs::remove_all(d2);
  set_workers(1);
  Manifest m1 = generate_dataset(cfg, d1);
  set_workers(2);
  Manifest m2 = generate_dataset(cfg, d2);
  set_workers(1);
  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
  };
  bool same = true;
  for (std::size_t i = 0; i < m1.records.size(); ++i) {
    same &= slurp(d1 + "/" + m1.records[i].noisy_path) == slurp(d2 + "/" + m2.records[i].noisy_path);
    same &= slurp(d1 + "/" + m1.records[i].clean_path) == slurp(d2 + "/" + m2.records[i].clean_path);
    same &= slurp(d1 + "/" + m1.records[i].map_path) == slurp(d2 + "/" + m2.records[i].map_path);
  }
  ok &= expect(same, "datasets bit-identical across worker counts");

  // identical seeds give bit-identical loss curves regardless of workers
  Manifest man = load_manifest(d1 + "/manifest.json");
  TrainSchedule sch;
  sch.epochs = 4;
  sch.seed = 5;
  Network<float> n1 = build_denoiser<float>({1, 2, 2}, 6);
  Network<float> n2 = build_denoiser<float>({1, 2, 2}, 6);
  set_workers(2);
  TrainResult r1 = train_stage(n1, denoiser_task(), man, d1, sch);
  set_workers(1);
  TrainResult r2 = train_stage(n2, denoiser_task(), man, d1, sch);
  bool curves = r1.history.size() == r2.history.size();
  for (std::size_t i = 0; curves && i < r1.history.size(); ++i)
    curves &= r1.history[i].train_loss == r2.history[i].train_loss &&
              r1.history[i].val_loss == r2.history[i].val_loss;
  ok &= expect(curves, "loss curves bit-identical across worker counts");

  // checkpoint round trip preserves forward outputs bit-exactly
  Checkpoint ck = stage_checkpoint(r1, arch_header(DenoiserConfig{1, 2, 2}), man.fingerprint);
  const std::string ck_path = (kWork / "det_ck.gprc").string();
  save_checkpoint(ck_path, ck);
  Network<float> restored = network_from_checkpoint(load_checkpoint(ck_path));
  Rng rng(7);
  Tensor<float> x({8, 8, 8});
  for (float& v : x.data) v = static_cast<float>(rng.uniform(0.0, 1.0));
  Tensor<float> a = denoiser_forward(r1.best_net, x);
  Tensor<float> b = denoiser_forward(restored, x);
  ok &= expect(a.data == b.data, "checkpoint round trip forward bit-exact");
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  fs::create_directories(kWork);
  struct Entry {
    int id;
    const char* title;
    std::function<bool()> fn;
  };
  const std::vector<Entry> criteria = {
      {1, "parameter-count anchors", criterion1},
      {2, "gradient suite", criterion2},
      {3, "oracle equivalence vs naive loops", criterion3},
      {4, "forward-model physics", criterion4},
      {5, "receptive-field anchor", criterion5},
      {6, "architecture identities", criterion6},
      {7, "desk-scale end-to-end quality", criterion7},
      {8, "ablation ordering over 3 seeds", criterion8},
      {9, "determinism and persistence", criterion9},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const Entry& e : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), e.id) == selected.end())
      continue;
    const auto t0 = clock_type::now();
    bool ok = false;
    try {
      ok = e.fn();
    } catch (const std::exception& ex) {
      std::printf("       EXCEPTION: %s\n", ex.what());
    }
    const double secs = std::chrono::duration<double>(clock_type::now() - t0).count();
    std::printf("[%s] criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", e.id, e.title, secs);
    std::fflush(stdout);
    failures += !ok;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
