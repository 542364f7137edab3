#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "gpr3d/dataset.hpp"
#include "gpr3d/denoiser.hpp"
#include "gpr3d/gradcheck.hpp"
#include "gpr3d/losses.hpp"
#include "gpr3d/reference_ops.hpp"
#include "gpr3d/trainer.hpp"
#include "gpr3d/volume_io.hpp"
#include "helpers.hpp"

using namespace gpr3d;
using gpr3d::test::bit_equal;
using gpr3d::test::max_abs_diff;
using gpr3d::test::random_tensor;
using gpr3d::test::TempDir;

TEST_CASE("losses: worked examples and loop oracles") {
  Rng rng(1);
  Tensor<float> a = random_tensor<float>({4, 4, 4}, rng);
  CHECK(loss_mse(a, a) == 0.0f);
  CHECK(loss_mae(a, a) == 0.0f);

  Tensor<float> b = a;
  for (float& v : b.data) v += 0.25f;
  CHECK(loss_mse(b, a) == doctest::Approx(0.0625).epsilon(1e-6));
  CHECK(loss_mae(b, a) == doctest::Approx(0.25).epsilon(1e-6));

  Tensor<double> p = random_tensor<double>({5, 3, 4}, rng);
  Tensor<double> t = random_tensor<double>({5, 3, 4}, rng);
  CHECK(std::abs(loss_mse(p, t) - refops::mse(p, t)) < 1e-12);
  CHECK(std::abs(loss_mae(p, t) - refops::mae(p, t)) < 1e-12);

  Tensor<double> wrong({5, 3, 5});
  CHECK_THROWS_AS(loss_mse(p, wrong), Error);
  CHECK_THROWS_AS(loss_mae(p, wrong), Error);
}

TEST_CASE("loss gradients agree with central finite differences") {
  Rng rng(2);
  Tensor<double> p = random_tensor<double>({3, 3, 3}, rng);
  Tensor<double> t = random_tensor<double>({3, 3, 3}, rng, 2.0, 3.0);  // keep |p - t| > 0
  for (LossKind kind : {LossKind::Mse, LossKind::Mae}) {
    Tensor<double> g(p.shape);
    const auto eval = [&](const Tensor<double>& x) {
      return kind == LossKind::Mse ? loss_mse(x, t) : loss_mae(x, t);
    };
    (kind == LossKind::Mse ? loss_mse(p, t, &g) : loss_mae(p, t, &g));
    for (std::size_t i = 0; i < p.numel(); i += 5) {
      Tensor<double> pp = p, pm = p;
      pp.data[i] += 1e-6;
      pm.data[i] -= 1e-6;
      const double fd = (eval(pp) - eval(pm)) / 2e-6;
      CHECK(g.data[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

namespace {
// One scalar parameter theta with loss theta^2, driven through the real
// optimizer plumbing.
struct Quadratic {
  Network<double> net;
  AdamState<double> adam;
  Quadratic(double theta0) {
    net.add_param("theta", Tensor<double>({1}, theta0));
    adam = AdamState<double>::for_network(net);
  }
  double theta() const { return net.params[0].value.data[0]; }
  void step(double lr) {
    net.params[0].value.ensure_grad();
    net.params[0].value.grad[0] = 2.0 * theta();
    adam_step(net, adam, lr);
  }
};
}  // namespace

TEST_CASE("adam: hand-computed first step, zero-gradient step, convergence") {
  Quadratic q(1.0);
  q.step(0.001);
  CHECK(q.theta() == doctest::Approx(0.999).epsilon(1e-9));

  Quadratic frozen(0.5);
  frozen.net.params[0].value.ensure_grad();
  frozen.net.params[0].value.grad[0] = 0.0;
  adam_step(frozen.net, frozen.adam, 0.001);
  CHECK(frozen.theta() == 0.5);
  CHECK(frozen.adam.t == 1);

  Quadratic run(1.0);
  for (int i = 0; i < 2000; ++i) run.step(0.01);
  CHECK(std::abs(run.theta()) < 1e-3);

  Quadratic bad(1.0);
  bad.net.params[0].value.ensure_grad();
  bad.net.params[0].value.grad[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(adam_step(bad.net, bad.adam, 0.001), doctest::Contains("non-finite"), Error);
}

TEST_CASE("learning-rate decay triggers only when the loss stops dropping") {
  CHECK(update_lr(0.001, {1.0, 0.9}, 0.98) == 0.001);
  CHECK(update_lr(0.001, {1.0, 1.1}, 0.98) == doctest::Approx(0.00098).epsilon(1e-12));
  CHECK(update_lr(0.001, {1.0, 1.0}, 0.98) == doctest::Approx(0.00098).epsilon(1e-12));
  CHECK_THROWS_AS(update_lr(0.001, {1.0}, 0.98), Error);
}

namespace {
RunConfig overfit_config(int count) {
  RunConfig cfg;
  cfg.dataset_count = count;
  cfg.dataset_seed = 4242;
  cfg.survey.time_samples = 64;
  cfg.survey.time_window = 7.5e-9;
  cfg.cscan_dims = {16, 16, 16};
  cfg.map_dims = {16, 16, 16};
  return cfg;
}
}  // namespace

TEST_CASE("two-sample overfit run drives the training loss to the floor") {
  TempDir dir("trainer_overfit");
  Manifest man = generate_dataset(overfit_config(2), dir.str());

  Network<float> net = build_denoiser<float>({1, 4, 4}, 12);
  TrainSchedule schedule;
  schedule.epochs = 200;
  schedule.seed = 31;
  TrainResult result = train_stage(net, denoiser_task(), man, dir.str(), schedule);
  CHECK(result.history.back().train_loss < 1e-4);
  CHECK(result.history[99].train_loss < 1e-3);  // the loose bound holds long before

  // LR sequence is non-increasing; best val <= every recorded val loss
  for (std::size_t i = 1; i < result.history.size(); ++i)
    CHECK(result.history[i].lr <= result.history[i - 1].lr);
  for (const EpochStats& e : result.history) CHECK(result.best_val_loss <= e.val_loss);
}

TEST_CASE("zero-epoch training returns the initialization unchanged") {
  TempDir dir("trainer_zero");
  Manifest man = generate_dataset(overfit_config(2), dir.str());
  Network<float> net = build_denoiser<float>({1, 2, 2}, 5);
  const Network<float> before = net;
  TrainSchedule schedule;
  schedule.epochs = 0;
  TrainResult result = train_stage(net, denoiser_task(), man, dir.str(), schedule);
  CHECK(result.history.empty());
  for (std::size_t i = 0; i < net.params.size(); ++i)
    CHECK(bit_equal(result.best_net.params[i].value, before.params[i].value));
}

TEST_CASE("identical seeds give bit-identical loss curves") {
  TempDir dir("trainer_det");
  Manifest man = generate_dataset(overfit_config(4), dir.str());
  TrainSchedule schedule;
  schedule.epochs = 5;
  schedule.seed = 17;
  Network<float> n1 = build_denoiser<float>({1, 2, 2}, 7);
  Network<float> n2 = build_denoiser<float>({1, 2, 2}, 7);
  TrainResult r1 = train_stage(n1, denoiser_task(), man, dir.str(), schedule);
  TrainResult r2 = train_stage(n2, denoiser_task(), man, dir.str(), schedule);
  REQUIRE(r1.history.size() == r2.history.size());
  for (std::size_t i = 0; i < r1.history.size(); ++i) {
    CHECK(r1.history[i].train_loss == r2.history[i].train_loss);
    CHECK(r1.history[i].val_loss == r2.history[i].val_loss);
    CHECK(r1.history[i].lr == r2.history[i].lr);
  }
}

TEST_CASE("split validation: too-small datasets are rejected") {
  TempDir dir("trainer_split");
  Manifest man = generate_dataset(overfit_config(1), dir.str());
  Network<float> net = build_denoiser<float>({0, 2, 2}, 5);
  TrainSchedule schedule;
  CHECK_THROWS_WITH_AS(train_stage(net, denoiser_task(), man, dir.str(), schedule),
                       doctest::Contains("split"), Error);
}

TEST_CASE("checkpoint round trip preserves forward outputs bit-exactly") {
  TempDir dir("ckpt_rt");
  Network<float> net = build_denoiser<float>({1, 4, 4}, 123);
  Rng rng(9);
  Tensor<float> x = random_tensor<float>({8, 8, 8}, rng, 0.0, 1.0);
  const Tensor<float> before = denoiser_forward(net, x);

  Checkpoint ckpt = checkpoint_from_network(net, arch_header(DenoiserConfig{1, 4, 4}));
  save_checkpoint(dir.file("d.gprc"), ckpt);
  Checkpoint loaded = load_checkpoint(dir.file("d.gprc"));
  Network<float> restored = network_from_checkpoint(loaded);
  CHECK(bit_equal(denoiser_forward(restored, x), before));
}

TEST_CASE("checkpoint errors: truncation, bad magic, architecture mismatch") {
  TempDir dir("ckpt_err");
  Network<float> net = build_inverter<float>({2, 2, true}, 3);
  Checkpoint ckpt = checkpoint_from_network(net, arch_header(InverterConfig{2, 2, true}));
  save_checkpoint(dir.file("i.gprc"), ckpt);

  {  // truncate
    std::ifstream in(dir.file("i.gprc"), std::ios::binary);
    std::vector<char> bytes(std::istreambuf_iterator<char>(in), {});
    bytes.resize(bytes.size() / 2);
    std::ofstream out(dir.file("trunc.gprc"), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    load_checkpoint(dir.file("trunc.gprc"));
    FAIL("expected truncation error");
  } catch (const IoError& e) {
    CHECK(e.kind == IoErrorKind::Truncated);
  }

  {  // wrong magic
    std::ofstream out(dir.file("bad.gprc"), std::ios::binary);
    out << "XXXXjunkjunkjunk";
  }
  try {
    load_checkpoint(dir.file("bad.gprc"));
    FAIL("expected bad-magic error");
  } catch (const IoError& e) {
    CHECK(e.kind == IoErrorKind::BadMagic);
  }

  // load with mismatched architecture (n = 3 network, n = 2 entries)
  Network<float> other = build_inverter<float>({3, 2, true}, 3);
  CHECK_THROWS_WITH_AS(apply_checkpoint(ckpt, other), doctest::Contains("architecture mismatch"),
                       Error);
}

TEST_CASE("fine-tuning: zero epochs is the identity; LR starts at 0.0006") {
  TempDir dir("ft_identity");
  Manifest man = generate_dataset(overfit_config(3), dir.str());
  Network<float> net = build_denoiser<float>({1, 2, 2}, 11);
  TrainSchedule pre;
  pre.epochs = 3;
  TrainResult pretrained = train_stage(net, denoiser_task(), man, dir.str(), pre);
  Checkpoint source = stage_checkpoint(pretrained, arch_header(DenoiserConfig{1, 2, 2}), man.fingerprint);

  TrainSchedule ft;
  ft.lr0 = 0.0006;
  ft.decay_factor = 0.99;
  ft.epochs = 0;
  Checkpoint tuned = fine_tune(source, denoiser_task(), man, dir.str(), ft, man.fingerprint);
  Rng rng(12);
  Tensor<float> x = random_tensor<float>({8, 8, 8}, rng, 0.0, 1.0);
  Network<float> a = network_from_checkpoint(source);
  Network<float> b = network_from_checkpoint(tuned);
  CHECK(bit_equal(denoiser_forward(a, x), denoiser_forward(b, x)));

  ft.epochs = 2;
  Network<float> c = network_from_checkpoint(source);
  TrainResult r = train_stage(c, denoiser_task(), man, dir.str(), ft);
  CHECK(r.history[0].lr == 0.0006);
}

TEST_CASE("fine-tuning on a new clutter family improves that family's loss") {
  RunConfig cfg_a = overfit_config(10);
  RunConfig cfg_b = cfg_a;
  cfg_b.clutter.family = 1;
  cfg_b.dataset_seed = 5151;
  TempDir da("ft_family_a"), db("ft_family_b");
  Manifest man_a = generate_dataset(cfg_a, da.str());
  Manifest man_b = generate_dataset(cfg_b, db.str());

  Network<float> net = build_denoiser<float>({1, 4, 4}, 21);
  TrainSchedule pre;
  pre.epochs = 30;
  pre.seed = 3;
  TrainResult pretrained = train_stage(net, denoiser_task(), man_a, da.str(), pre);
  Checkpoint source = stage_checkpoint(pretrained, arch_header(DenoiserConfig{1, 4, 4}), man_a.fingerprint);

  auto family_loss = [&](Network<float>& model) {
    double total = 0;
    for (const ManifestRecord& rec : man_b.records) {
      Tensor<float> noisy = read_volume<float>(db.file(rec.noisy_path));
      Tensor<float> clean = read_volume<float>(db.file(rec.clean_path));
      Tensor<float> denoised = denoiser_forward(model, noisy);
      total += loss_mse(denoised, clean);
    }
    return total / static_cast<double>(man_b.records.size());
  };

  Network<float> unadapted = network_from_checkpoint(source);
  const double before = family_loss(unadapted);

  TrainSchedule ft;
  ft.lr0 = 0.0006;
  ft.decay_factor = 0.99;
  ft.epochs = 30;
  ft.seed = 4;
  Checkpoint tuned = fine_tune(source, denoiser_task(), man_b, db.str(), ft, man_b.fingerprint);
  Network<float> adapted = network_from_checkpoint(tuned);
  const double after = family_loss(adapted);
  CHECK(after < before);
}

TEST_CASE("end-to-end loss gradient matches finite differences on a tiny network") {
  for (std::uint64_t seed = 1;; ++seed) {
    Network<double> net = build_denoiser<double>(DenoiserConfig{1, 2, 2}, seed);
    Rng xr(seed * 31);
    for (double& v : net.find_param("recon.conv.kernel")->value.data) v = xr.uniform(-0.3, 0.3);
    Tensor<double> x({1, 1, 8, 8, 8});
    for (double& v : x.data) v = xr.uniform(0.05, 1.0);
    if (kink_margin(net, x, Mode::Train) < 1e-4) continue;

    Tensor<double> target({1, 1, 8, 8, 8});
    for (double& v : target.data) v = xr.uniform(0.0, 1.0);

    ForwardTrace<double> trace;
    Tensor<double> pred = forward(net, x, Mode::Train, &trace);
    Tensor<double> dpred(pred.shape);
    loss_mse(pred, target, &dpred);
    net.zero_grads();
    backward(net, x, trace, dpred);

    double worst = 0;
    for (Param<double>& p : net.params)
      for (std::size_t i = 0; i < p.value.numel(); i += 3) {
        const double saved = p.value.data[i];
        p.value.data[i] = saved + 1e-6;
        const double lp = loss_mse(forward(net, x, Mode::Train), target);
        p.value.data[i] = saved - 1e-6;
        const double lm = loss_mse(forward(net, x, Mode::Train), target);
        p.value.data[i] = saved;
        const double fd = (lp - lm) / 2e-6;
        const double ana = p.value.grad[i];
        worst = std::max(worst, std::abs(ana - fd) / std::max({std::abs(ana), std::abs(fd), 1e-4}));
      }
    CHECK(worst < 1e-3);
    break;
  }
}
