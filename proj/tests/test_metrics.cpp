#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gpr3d/dataset.hpp"
#include "gpr3d/evaluator.hpp"
#include "gpr3d/metrics.hpp"
#include "gpr3d/volume_io.hpp"
#include "helpers.hpp"

using namespace gpr3d;
using gpr3d::test::random_tensor;
using gpr3d::test::TempDir;

namespace {

// Straight-line transcription of the global-statistics similarity formula,
// kept independent of compute_ssim.
double ssim_oracle(const Tensor<double>& t, const Tensor<double>& p, double c1, double c2) {
  const double n = static_cast<double>(t.numel());
  double mt = 0, mp = 0;
  for (std::size_t i = 0; i < t.numel(); ++i) {
    mt += t.data[i];
    mp += p.data[i];
  }
  mt /= n;
  mp /= n;
  double vt = 0, vp = 0, cov = 0;
  for (std::size_t i = 0; i < t.numel(); ++i) {
    vt += (t.data[i] - mt) * (t.data[i] - mt);
    vp += (p.data[i] - mp) * (p.data[i] - mp);
    cov += (t.data[i] - mt) * (p.data[i] - mp);
  }
  vt /= n;
  vp /= n;
  cov /= n;
  return (2 * mp * mt + c1) * (2 * cov + c2) / ((mp * mp + mt * mt + c1) * (vp + vt + c2));
}

}  // namespace

TEST_CASE("ssim: identity, closed-form degenerate case, oracle, symmetry") {
  Rng rng(1);
  Tensor<double> t = random_tensor<double>({6, 6, 6}, rng, 0.0, 1.0);
  CHECK(compute_ssim(t, t, SsimConstants(1.0)) == doctest::Approx(1.0).epsilon(1e-12));

  Tensor<double> ones({4, 4, 4}, 1.0);
  Tensor<double> zeros({4, 4, 4}, 0.0);
  const double c1 = 1e-4;
  CHECK(compute_ssim(ones, zeros, SsimConstants(1.0)) ==
        doctest::Approx(c1 / (1.0 + c1)).epsilon(1e-12));
  CHECK(compute_ssim(ones, zeros, SsimConstants(1.0)) == doctest::Approx(9.999e-5).epsilon(1e-3));

  for (int i = 0; i < 100; ++i) {
    Tensor<double> a = random_tensor<double>({5, 4, 3}, rng, 0.0, 1.0);
    Tensor<double> b = random_tensor<double>({5, 4, 3}, rng, 0.0, 1.0);
    const SsimConstants k(1.0);
    CHECK(compute_ssim(a, b, k) == doctest::Approx(ssim_oracle(a, b, k.c1, k.c2)).epsilon(1e-12));
    CHECK(compute_ssim(a, b, k) == doctest::Approx(compute_ssim(b, a, k)).epsilon(1e-12));
  }
}

TEST_CASE("psnr: log arithmetic, infinity sentinel, monotonicity") {
  Tensor<double> t({4, 4, 4}, 0.0);
  Tensor<double> p({4, 4, 4}, 1.0);
  CHECK(compute_psnr(t, p) == doctest::Approx(0.0).epsilon(1e-12));  // MSE = 1
  Tensor<double> p2({4, 4, 4}, 0.1);
  CHECK(compute_psnr(t, p2) == doctest::Approx(20.0).epsilon(1e-12));  // MSE = 0.01
  CHECK(std::isinf(compute_psnr(t, t)));

  Rng rng(2);
  Tensor<double> base = random_tensor<double>({5, 5, 5}, rng, 0.0, 1.0);
  Tensor<double> noise = random_tensor<double>({5, 5, 5}, rng);
  double prev = std::numeric_limits<double>::infinity();
  for (double amp : {0.01, 0.02, 0.05, 0.1, 0.2}) {
    Tensor<double> pert = base;
    for (std::size_t i = 0; i < pert.numel(); ++i) pert.data[i] += amp * noise.data[i];
    const double v = compute_psnr(base, pert);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("mre: anchors, scale covariance, all-zero rejection") {
  Rng rng(3);
  Tensor<double> t = random_tensor<double>({4, 5, 6}, rng, 0.5, 2.0);
  CHECK(compute_mre(t, t) == 0.0);

  Tensor<double> zero(t.shape, 0.0);
  CHECK(compute_mre(t, zero) == doctest::Approx(100.0).epsilon(1e-12));
  Tensor<double> twice = t;
  for (double& v : twice.data) v *= 2.0;
  CHECK(compute_mre(t, twice) == doctest::Approx(100.0).epsilon(1e-12));
  CHECK_THROWS_WITH_AS(compute_mre(zero, t), doctest::Contains("identically zero"), Error);

  // MRE(T, T + a E) is linear in |a|
  Tensor<double> e = random_tensor<double>(t.shape, rng);
  const double base = [&] {
    Tensor<double> p = t;
    for (std::size_t i = 0; i < p.numel(); ++i) p.data[i] += e.data[i];
    return compute_mre(t, p);
  }();
  for (double a : {0.25, 0.5, 2.0, 4.0}) {
    Tensor<double> p = t;
    for (std::size_t i = 0; i < p.numel(); ++i) p.data[i] += a * e.data[i];
    CHECK(compute_mre(t, p) == doctest::Approx(a * base).epsilon(1e-9));
  }
}

TEST_CASE("mape: anchors and loop oracle on permittivity-range data") {
  Tensor<double> four({3, 3, 3}, 4.0);
  Tensor<double> five({3, 3, 3}, 5.0);
  CHECK(compute_mape(four, four) == 0.0);
  CHECK(compute_mape(four, five) == doctest::Approx(25.0).epsilon(1e-12));

  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    Tensor<double> t = random_tensor<double>({4, 4, 4}, rng, 3.6, 27.0);
    Tensor<double> p = random_tensor<double>({4, 4, 4}, rng, 3.6, 27.0);
    double acc = 0;
    for (std::size_t i = 0; i < t.numel(); ++i)
      acc += std::abs(p.data[i] - t.data[i]) / std::abs(t.data[i]);
    CHECK(compute_mape(t, p) == doctest::Approx(acc / 64.0 * 100.0).epsilon(1e-12));
  }
}

TEST_CASE("mse / mae match their defining sums") {
  Rng rng(5);
  Tensor<double> t = random_tensor<double>({5, 4, 3}, rng);
  Tensor<double> p = random_tensor<double>({5, 4, 3}, rng);
  double se = 0, ae = 0;
  for (std::size_t i = 0; i < t.numel(); ++i) {
    se += (p.data[i] - t.data[i]) * (p.data[i] - t.data[i]);
    ae += std::abs(p.data[i] - t.data[i]);
  }
  CHECK(compute_mse(t, p) == doctest::Approx(se / 60.0).epsilon(1e-12));
  CHECK(compute_mae(t, p) == doctest::Approx(ae / 60.0).epsilon(1e-12));
}

TEST_CASE("scene grouping by bounding-box intersection") {
  SubsurfaceObject sphere;
  sphere.shape = ObjectShape::Sphere;
  sphere.center = {0.4, 0.4, 0.1};
  sphere.radius = 0.03;
  sphere.epsilon_r = 10;

  Scene one;
  one.objects = {sphere};
  CHECK(classify_group(one) == SceneGroup::I);

  SubsurfaceObject far_box;
  far_box.shape = ObjectShape::Box;
  far_box.center = {0.6, 0.6, 0.2};
  far_box.edges = {0.05, 0.05, 0.05};
  Scene separated;
  separated.objects = {sphere, far_box};
  CHECK(classify_group(separated) == SceneGroup::II);

  SubsurfaceObject close_sphere = sphere;
  close_sphere.center = {0.44, 0.4, 0.1};  // centers 0.04 apart, radii sum 0.06
  Scene overlapping;
  overlapping.objects = {sphere, close_sphere};
  CHECK(classify_group(overlapping) == SceneGroup::III);

  Scene none;
  CHECK(classify_group(none) == SceneGroup::Other);
  Scene three;
  three.objects = {sphere, far_box, close_sphere};
  CHECK(classify_group(three) == SceneGroup::Other);
}

namespace {

// Builds a one-record manifest whose clean volume equals the noisy one and
// whose map is the constant the zeroed inverter will output.
Manifest perfect_manifest(const TempDir& dir, double constant) {
  Rng rng(77);
  Tensor<float> noisy = random_tensor<float>({8, 8, 8}, rng, 0.0, 1.0);
  Tensor<float> map({8, 8, 8}, static_cast<float>(constant));
  write_volume(dir.file("noisy_0000.gprv"), noisy);
  write_volume(dir.file("clean_0000.gprv"), noisy);
  write_volume(dir.file("map_0000.gprv"), map);
  Manifest man;
  man.fingerprint = "test";
  ManifestRecord rec;
  rec.id = 0;
  rec.group = "i";
  rec.noisy_path = "noisy_0000.gprv";
  rec.clean_path = "clean_0000.gprv";
  rec.map_path = "map_0000.gprv";
  SubsurfaceObject o;
  o.shape = ObjectShape::Sphere;
  o.center = {0.5, 0.5, 0.1};
  o.radius = 0.03;
  rec.scene.objects = {o};
  man.records.push_back(rec);
  return man;
}

}  // namespace

TEST_CASE("perfect oracle networks reach SSIM 1 and zero errors") {
  TempDir dir("eval_perfect");
  Manifest man = perfect_manifest(dir, 4.0);

  // identity denoiser: zeroed reconstruction conv on non-negative input
  Network<float> den = build_denoiser<float>({1, 2, 2}, 5);
  for (float& v : den.find_param("recon.conv.kernel")->value.data) v = 0.0f;
  for (float& v : den.find_param("recon.conv.bias")->value.data) v = 0.0f;

  // constant inverter: all parameters zero except the head bias
  InverterConfig icfg{1, 2, true};
  Network<float> inv = build_inverter<float>(icfg, 6);
  for (Param<float>& p : inv.params)
    for (float& v : p.value.data) v = 0.0f;
  inv.find_param("head.conv.bias")->value.data[0] = 4.0f;
  inv.bn_batches_seen = 1;

  EvalReport report = evaluate_dataset(&den, inv, icfg, man, dir.str());
  REQUIRE(report.rows.size() == 1);
  const SampleMetrics& m = report.rows[0];
  CHECK(m.den_ssim == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::isinf(m.den_psnr));
  CHECK(m.den_mae == 0.0);
  CHECK(m.den_mre == 0.0);
  CHECK(m.inv_ssim == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(m.inv_mse == 0.0);
  CHECK(m.inv_mae == 0.0);
  CHECK(m.inv_mape == 0.0);

  // single sample: the overall averages equal that sample's metrics
  CHECK(report.summary.at("all").count == 1);
  CHECK(report.summary.at("all").inv_mae == m.inv_mae);
  CHECK(report.summary.at("i").den_ssim == m.den_ssim);
}

TEST_CASE("group aggregation matches an independent recomputation") {
  std::vector<SampleMetrics> rows;
  Rng rng(31);
  const char* groups[4] = {"i", "ii", "iii", "other"};
  for (int i = 0; i < 40; ++i) {
    SampleMetrics m;
    m.id = i;
    m.group = groups[rng.uniform_int(0, 3)];
    m.den_ssim = rng.uniform(0.8, 1.0);
    m.den_psnr = rng.uniform(20, 60);
    m.den_mae = rng.uniform(0, 0.1);
    m.den_mre = rng.uniform(0, 5);
    m.inv_ssim = rng.uniform(0.8, 1.0);
    m.inv_mse = rng.uniform(0, 0.5);
    m.inv_mae = rng.uniform(0, 0.5);
    m.inv_mape = rng.uniform(0, 10);
    rows.push_back(m);
  }
  auto summary = aggregate_rows(rows);

  // independent recomputation of one group and the i-iii pool
  for (const std::string key : {"i", "ii", "iii", "all"}) {
    double sum = 0;
    std::size_t count = 0;
    for (const SampleMetrics& m : rows) {
      const bool in_group = key == "all" ? (m.group != "other") : (m.group == key);
      if (!in_group) continue;
      sum += m.inv_mae;
      ++count;
    }
    REQUIRE(summary.at(key).count == count);
    CHECK(summary.at(key).inv_mae == doctest::Approx(sum / static_cast<double>(count)).epsilon(1e-9));
  }

  // CSV round trip feeds the same aggregation
  TempDir dir("eval_agg");
  EvalReport report;
  report.rows = rows;
  report.summary = summary;
  write_eval_csv(dir.file("eval.csv"), report);
  auto reread = read_eval_csv(dir.file("eval.csv"));
  auto summary2 = aggregate_rows(reread);
  CHECK(summary2.at("all").inv_mape ==
        doctest::Approx(summary.at("all").inv_mape).epsilon(1e-9));
  CHECK(summary2.at("ii").den_psnr == doctest::Approx(summary.at("ii").den_psnr).epsilon(1e-9));
}
