#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "gpr3d/checkpoint.hpp"
#include "gpr3d/cli.hpp"
#include "gpr3d/config.hpp"
#include "gpr3d/metrics.hpp"
#include "gpr3d/volume_io.hpp"
#include "helpers.hpp"

using namespace gpr3d;
using gpr3d::test::bit_equal;
using gpr3d::test::random_tensor;
using gpr3d::test::TempDir;

namespace {
int run_cli(std::initializer_list<const char*> args) {
  std::vector<const char*> argv{"gpr3dinv"};
  argv.insert(argv.end(), args);
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}
}  // namespace

TEST_CASE("volume files round-trip bit-exactly in both precisions") {
  TempDir dir("vol_rt");
  Rng rng(1);
  Tensor<float> f = random_tensor<float>({8, 8, 8}, rng);
  write_volume(dir.file("f.gprv"), f);
  CHECK(bit_equal(read_volume<float>(dir.file("f.gprv")), f));

  Tensor<double> d = random_tensor<double>({4, 6, 8}, rng);
  write_volume(dir.file("d.gprv"), d);
  CHECK(bit_equal(read_volume<double>(dir.file("d.gprv")), d));

  CHECK(!std::filesystem::exists(dir.file("f.gprv.tmp")));
}

TEST_CASE("volume reader distinguishes error kinds") {
  TempDir dir("vol_err");
  {
    std::ofstream out(dir.file("magic.gprv"), std::ios::binary);
    out << "XXXX rest of the file";
  }
  try {
    read_volume<float>(dir.file("magic.gprv"));
    FAIL("expected bad magic");
  } catch (const IoError& e) {
    CHECK(e.kind == IoErrorKind::BadMagic);
  }

  // dims product exceeding the payload
  std::vector<std::uint8_t> decl = {'G', 'P', 'R', 'V', 1, 0, 0, 3,
                                    2, 0, 0, 0, 2, 0, 0, 0, 2, 0, 0, 0};
  for (int i = 0; i < 3 * 4; ++i) decl.push_back(0);  // 3 floats, dims declare 8
  write_bytes(dir.file("short.gprv"), decl);
  try {
    read_volume<float>(dir.file("short.gprv"));
    FAIL("expected truncation");
  } catch (const IoError& e) {
    CHECK(e.kind == IoErrorKind::Truncated);
  }

  // dimension overflow: 2^20 per axis over three axes
  std::vector<std::uint8_t> huge = {'G', 'P', 'R', 'V', 1, 0, 0, 3};
  for (int axis = 0; axis < 3; ++axis) {
    huge.push_back(0);
    huge.push_back(0);
    huge.push_back(0x10);
    huge.push_back(0);
  }
  write_bytes(dir.file("huge.gprv"), huge);
  try {
    read_volume<float>(dir.file("huge.gprv"));
    FAIL("expected dim overflow");
  } catch (const IoError& e) {
    CHECK(e.kind == IoErrorKind::DimOverflow);
  }

  // unsupported version
  std::vector<std::uint8_t> ver = {'G', 'P', 'R', 'V', 9, 0, 0, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  write_bytes(dir.file("ver.gprv"), ver);
  try {
    read_volume<float>(dir.file("ver.gprv"));
    FAIL("expected bad version");
  } catch (const IoError& e) {
    CHECK(e.kind == IoErrorKind::BadVersion);
  }
}

TEST_CASE("empty config document yields the documented defaults") {
  RunConfig cfg = parse_config_json(nlohmann::json::object());
  CHECK(cfg.survey.center_frequency == 1e9);
  CHECK(cfg.survey.time_window == 15e-9);
  CHECK(cfg.survey.lines == 12);
  CHECK(cfg.survey.points_per_line == 10);
  CHECK(cfg.survey.tx_rx_offset == 0.1);
  CHECK(cfg.survey.antenna_height == 0.02);
  CHECK(cfg.soil_epsilon_r == 4.0);
  CHECK(cfg.ranges.eps_lo == 8.0);
  CHECK(cfg.ranges.eps_hi == 27.0);
  CHECK(cfg.train_lr0 == 0.001);
  CHECK(cfg.train_decay == 0.98);
  CHECK(cfg.train_epochs == 100);
  CHECK(cfg.train_batch == 2);
  CHECK(cfg.train_split == 0.9);
  CHECK(cfg.ft_lr0 == 0.0006);
  CHECK(cfg.ft_decay == 0.99);
  CHECK(cfg.denoiser.m == 2);
  CHECK(cfg.denoiser.c1 == 8);
  CHECK(cfg.denoiser.r == 4);
  CHECK(cfg.inverter.n == 4);
  CHECK(cfg.inverter.c2 == 8);
  CHECK(cfg.inverter.msfa_enabled);
  CHECK(cfg.cscan_dims == std::array<std::size_t, 3>{128, 128, 128});
  CHECK(cfg.clutter.amplitude_ratio == 0.5);
  CHECK(cfg.scatterer_cap == 2000);
}

TEST_CASE("config validation names the offending key") {
  CHECK_THROWS_WITH_AS(parse_config_json({{"train", {{"lr0", -1.0}}}}),
                       doctest::Contains("train.lr0"), Error);
  CHECK_THROWS_WITH_AS(parse_config_json({{"trian", nlohmann::json::object()}}),
                       doctest::Contains("trian"), Error);
  CHECK_THROWS_WITH_AS(parse_config_json({{"scene", {{"max_objects", 7}}}}),
                       doctest::Contains("scene.max_objects"), Error);
  CHECK_THROWS_WITH_AS(parse_config_json({{"denoiser", {{"c1", 8}, {"r", 3}}}}),
                       doctest::Contains("denoiser.r"), Error);
}

TEST_CASE("config round trip is a fixed point; fingerprint ignores key order") {
  const nlohmann::json doc = {{"train", {{"lr0", 0.002}, {"epochs", 5}}},
                              {"survey", {{"lines", 6}}}};
  RunConfig cfg = parse_config_json(doc);
  const nlohmann::json canon = serialize_config(cfg);
  RunConfig cfg2 = parse_config_json(canon);
  CHECK(serialize_config(cfg2) == canon);

  RunConfig reordered = parse_config_json(nlohmann::json::parse(
      R"({"survey":{"lines":6},"train":{"epochs":5,"lr0":0.002}})"));
  CHECK(config_fingerprint(reordered) == config_fingerprint(cfg));
  CHECK(config_fingerprint(RunConfig{}) != config_fingerprint(cfg));
}

TEST_CASE("cli: unknown commands and missing flags exit nonzero") {
  CHECK(run_cli({"frobnicate"}) != 0);
  CHECK(run_cli({"eval", "--manifest", "nope.json"}) != 0);  // missing --inverter/--out
  CHECK(run_cli({"train-denoiser"}) != 0);
  CHECK(run_cli({"gen"}) != 0);
}

TEST_CASE("cli gradcheck runs the full suite and exits zero") {
  CHECK(run_cli({"gradcheck", "--step", "1e-3"}) == 0);
}

TEST_CASE("cli infer rejects volumes the inverter cannot pool") {
  TempDir dir("cli_infer");
  InverterConfig icfg{4, 1, true};
  Network<float> inv = build_inverter<float>(icfg, 2);
  inv.bn_batches_seen = 1;
  save_checkpoint(dir.file("inv.gprc"), checkpoint_from_network(inv, arch_header(icfg)));

  Rng rng(7);
  write_volume(dir.file("v24.gprv"), random_tensor<float>({24, 24, 24}, rng, 0.0, 1.0));
  const std::string inv_path = dir.file("inv.gprc");
  const std::string vol_path = dir.file("v24.gprv");
  const std::string out_dir = dir.file("out");
  CHECK(run_cli({"infer", "--inverter", inv_path.c_str(), "--volume", vol_path.c_str(), "--out",
                 out_dir.c_str()}) != 0);

  write_volume(dir.file("v32.gprv"), random_tensor<float>({32, 32, 32}, rng, 0.0, 1.0));
  const std::string vol32 = dir.file("v32.gprv");
  CHECK(run_cli({"infer", "--inverter", inv_path.c_str(), "--volume", vol32.c_str(), "--out",
                 out_dir.c_str()}) == 0);
  CHECK(std::filesystem::exists(dir.file("out/permittivity.gprv")));
}

TEST_CASE("cli report re-aggregates an evaluation CSV") {
  TempDir dir("cli_report");
  EvalReport report;
  Rng rng(5);
  for (int i = 0; i < 6; ++i) {
    SampleMetrics m;
    m.id = i;
    m.group = i % 2 ? "i" : "ii";
    m.den_ssim = rng.uniform(0.9, 1.0);
    m.inv_mae = rng.uniform(0.0, 1.0);
    report.rows.push_back(m);
  }
  report.summary = aggregate_rows(report.rows);
  write_eval_csv(dir.file("eval.csv"), report);

  const std::string in_csv = dir.file("eval.csv");
  const std::string out_json = dir.file("summary.json");
  CHECK(run_cli({"report", "--in", in_csv.c_str(), "--out", out_json.c_str()}) == 0);

  std::ifstream in(out_json);
  nlohmann::json doc = nlohmann::json::parse(in);
  CHECK(doc.contains("all"));
  CHECK(doc.contains("i"));
  CHECK(doc.contains("ii"));
  CHECK(doc.at("all").at("count").get<int>() == 6);
}
