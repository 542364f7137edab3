#include "gpr3d/metrics.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace gpr3d {

namespace {
void expect_pair(const Tensor<double>& t, const Tensor<double>& p, const char* what) {
  require(same_shape(t, p),
          std::string(what) + ": shape mismatch " + shape_str(t.shape) + " vs " + shape_str(p.shape));
  require(t.numel() > 0, std::string(what) + ": empty volumes");
}
}  // namespace

double compute_ssim(const Tensor<double>& truth, const Tensor<double>& pred,
                    const SsimConstants& k) {
  expect_pair(truth, pred, "ssim");
  const std::size_t n = truth.numel();
  double mu_t = 0, mu_p = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mu_t += truth.data[i];
    mu_p += pred.data[i];
  }
  mu_t /= static_cast<double>(n);
  mu_p /= static_cast<double>(n);
  double var_t = 0, var_p = 0, cov = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = truth.data[i] - mu_t, dp = pred.data[i] - mu_p;
    var_t += dt * dt;
    var_p += dp * dp;
    cov += dt * dp;
  }
  var_t /= static_cast<double>(n);
  var_p /= static_cast<double>(n);
  cov /= static_cast<double>(n);
  return ((2 * mu_p * mu_t + k.c1) * (2 * cov + k.c2)) /
         ((mu_p * mu_p + mu_t * mu_t + k.c1) * (var_p + var_t + k.c2));
}

double compute_mse(const Tensor<double>& truth, const Tensor<double>& pred) {
  expect_pair(truth, pred, "mse");
  double acc = 0;
  for (std::size_t i = 0; i < truth.numel(); ++i) {
    const double d = pred.data[i] - truth.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(truth.numel());
}

double compute_mae(const Tensor<double>& truth, const Tensor<double>& pred) {
  expect_pair(truth, pred, "mae");
  double acc = 0;
  for (std::size_t i = 0; i < truth.numel(); ++i) acc += std::abs(pred.data[i] - truth.data[i]);
  return acc / static_cast<double>(truth.numel());
}

double compute_psnr(const Tensor<double>& truth, const Tensor<double>& pred) {
  const double mse = compute_mse(truth, pred);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double compute_mre(const Tensor<double>& truth, const Tensor<double>& pred) {
  expect_pair(truth, pred, "mre");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < truth.numel(); ++i) {
    const double d = pred.data[i] - truth.data[i];
    num += d * d;
    den += truth.data[i] * truth.data[i];
  }
  require(den > 0, "mre: ground truth is identically zero");
  return std::sqrt(num) / std::sqrt(den) * 100.0;
}

double compute_mape(const Tensor<double>& truth, const Tensor<double>& pred, double floor) {
  expect_pair(truth, pred, "mape");
  require(floor > 0, "mape: floor must be positive");
  double acc = 0;
  for (std::size_t i = 0; i < truth.numel(); ++i)
    acc += std::abs(pred.data[i] - truth.data[i]) / std::max(std::abs(truth.data[i]), floor);
  return acc / static_cast<double>(truth.numel()) * 100.0;
}

const char* group_label(SceneGroup g) {
  switch (g) {
    case SceneGroup::I: return "i";
    case SceneGroup::II: return "ii";
    case SceneGroup::III: return "iii";
    case SceneGroup::Other: return "other";
  }
  return "?";
}

SceneGroup classify_group(const Scene& scene) {
  if (scene.objects.size() == 1) return SceneGroup::I;
  if (scene.objects.size() != 2) return SceneGroup::Other;
  Vec3 lo1, hi1, lo2, hi2;
  scene.objects[0].aabb(lo1, hi1);
  scene.objects[1].aabb(lo2, hi2);
  const bool disjoint = hi1.x < lo2.x || hi2.x < lo1.x || hi1.y < lo2.y || hi2.y < lo1.y ||
                        hi1.z < lo2.z || hi2.z < lo1.z;
  return disjoint ? SceneGroup::II : SceneGroup::III;
}

std::map<std::string, GroupSummary> aggregate_rows(const std::vector<SampleMetrics>& rows) {
  std::map<std::string, GroupSummary> sums;
  auto fold = [&](const std::string& key, const SampleMetrics& m) {
    GroupSummary& s = sums[key];
    ++s.count;
    s.den_ssim += m.den_ssim;
    s.den_psnr += m.den_psnr;
    s.den_mae += m.den_mae;
    s.den_mre += m.den_mre;
    s.inv_ssim += m.inv_ssim;
    s.inv_mse += m.inv_mse;
    s.inv_mae += m.inv_mae;
    s.inv_mape += m.inv_mape;
  };
  for (const SampleMetrics& m : rows) {
    fold(m.group, m);
    if (m.group == "i" || m.group == "ii" || m.group == "iii") fold("all", m);
  }
  for (auto& [key, s] : sums) {
    if (s.count == 0) continue;
    const double c = static_cast<double>(s.count);
    s.den_ssim /= c;
    s.den_psnr /= c;
    s.den_mae /= c;
    s.den_mre /= c;
    s.inv_ssim /= c;
    s.inv_mse /= c;
    s.inv_mae /= c;
    s.inv_mape /= c;
  }
  return sums;
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
  std::ofstream out(path + ".tmp", std::ios::trunc);
  require(static_cast<bool>(out), "eval: cannot write '" + path + "'");
  out << "id,group,den_ssim,den_psnr,den_mae,den_mre,inv_ssim,inv_mse,inv_mae,inv_mape\n";
  out.precision(17);
  for (const SampleMetrics& m : report.rows)
    out << m.id << ',' << m.group << ',' << m.den_ssim << ',' << m.den_psnr << ',' << m.den_mae
        << ',' << m.den_mre << ',' << m.inv_ssim << ',' << m.inv_mse << ',' << m.inv_mae << ','
        << m.inv_mape << '\n';
  out.close();
  std::filesystem::rename(path + ".tmp", path);
}

std::vector<SampleMetrics> read_eval_csv(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "eval: cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "eval: empty CSV '" + path + "'");
  std::vector<SampleMetrics> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    SampleMetrics m;
    std::string field;
    auto next = [&]() {
      require(static_cast<bool>(std::getline(ss, field, ',')), "eval: malformed CSV row in '" + path + "'");
      return field;
    };
    m.id = std::stoi(next());
    m.group = next();
    m.den_ssim = std::stod(next());
    m.den_psnr = std::stod(next());
    m.den_mae = std::stod(next());
    m.den_mre = std::stod(next());
    m.inv_ssim = std::stod(next());
    m.inv_mse = std::stod(next());
    m.inv_mae = std::stod(next());
    m.inv_mape = std::stod(next());
    rows.push_back(std::move(m));
  }
  return rows;
}

void write_eval_json(const std::string& path, const EvalReport& report) {
  using nlohmann::json;
  auto num = [](double v) -> json {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
  };
  json doc;
  for (const auto& [key, s] : report.summary) {
    doc[key] = {{"count", s.count},
                {"denoiser", {{"SSIM", num(s.den_ssim)}, {"PSNR_dB", num(s.den_psnr)}, {"MAE", num(s.den_mae)}, {"MRE_pct", num(s.den_mre)}}},
                {"inverter", {{"SSIM", num(s.inv_ssim)}, {"MSE", num(s.inv_mse)}, {"MAE", num(s.inv_mae)}, {"MAPE_pct", num(s.inv_mape)}}}};
  }
  std::ofstream out(path + ".tmp", std::ios::trunc);
  require(static_cast<bool>(out), "eval: cannot write '" + path + "'");
  out << doc.dump(1) << '\n';
  out.close();
  std::filesystem::rename(path + ".tmp", path);
}

}  // namespace gpr3d
