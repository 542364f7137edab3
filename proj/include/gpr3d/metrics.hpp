#pragma once

#include <map>
#include <string>
#include <vector>

#include "gpr3d/scene.hpp"
#include "gpr3d/tensor.hpp"

namespace gpr3d {

/// Stabilizers derived from the dynamic range i of the data.
struct SsimConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  explicit SsimConstants(double dynamic_range) {
    require(dynamic_range > 0, "ssim: dynamic range must be positive");
    c1 = 0.01 * dynamic_range * 0.01 * dynamic_range;
    c2 = 0.03 * dynamic_range * 0.03 * dynamic_range;
  }
};

/// Global-statistics structural similarity between truth T and prediction
/// P: one mean/variance/covariance per volume, no sliding window. Variances
/// are population (1/N) second central moments.
double compute_ssim(const Tensor<double>& truth, const Tensor<double>& pred,
                    const SsimConstants& constants);

double compute_mse(const Tensor<double>& truth, const Tensor<double>& pred);
double compute_mae(const Tensor<double>& truth, const Tensor<double>& pred);

/// 10 log10(1 / MSE); assumes unit-peak data. Zero MSE reports +infinity.
double compute_psnr(const Tensor<double>& truth, const Tensor<double>& pred);

/// ||P - T||_2 / ||T||_2 * 100. Errors when T is identically zero.
double compute_mre(const Tensor<double>& truth, const Tensor<double>& pred);

/// mean(|P - T| / max(|T|, floor)) * 100.
double compute_mape(const Tensor<double>& truth, const Tensor<double>& pred, double floor = 1e-6);

enum class SceneGroup { I, II, III, Other };
const char* group_label(SceneGroup g);

/// One object -> i; two objects with disjoint axis-aligned bounding boxes
/// -> ii; intersecting boxes -> iii. Zero or three objects -> other
/// (excluded from the i-iii aggregate).
SceneGroup classify_group(const Scene& scene);

struct SampleMetrics {
  int id = 0;
  std::string group;
  double den_ssim = 0, den_psnr = 0, den_mae = 0, den_mre = 0;
  double inv_ssim = 0, inv_mse = 0, inv_mae = 0, inv_mape = 0;
};

struct GroupSummary {
  std::size_t count = 0;
  double den_ssim = 0, den_psnr = 0, den_mae = 0, den_mre = 0;
  double inv_ssim = 0, inv_mse = 0, inv_mae = 0, inv_mape = 0;
};

struct EvalReport {
  std::vector<SampleMetrics> rows;
  std::map<std::string, GroupSummary> summary;  // keys: i, ii, iii, all, other
};

/// Mean of every metric per group plus the "all" row over groups i-iii.
std::map<std::string, GroupSummary> aggregate_rows(const std::vector<SampleMetrics>& rows);

void write_eval_csv(const std::string& path, const EvalReport& report);
std::vector<SampleMetrics> read_eval_csv(const std::string& path);
void write_eval_json(const std::string& path, const EvalReport& report);

}  // namespace gpr3d
