#include "gpr3d/evaluator.hpp"

#include <algorithm>
#include <filesystem>

#include "gpr3d/volume_io.hpp"

namespace gpr3d {

EvalReport evaluate_dataset(Network<float>* denoiser, Network<float>& inverter,
                            const InverterConfig& inverter_cfg, const Manifest& manifest,
                            const std::string& manifest_dir, const EvalOptions& options) {
  namespace fs = std::filesystem;
  require(!manifest.records.empty(), "evaluate_dataset: empty manifest");
  EvalReport report;
  for (const ManifestRecord& rec : manifest.records) {
    const auto resolve = [&](const std::string& p) { return (fs::path(manifest_dir) / p).string(); };
    Tensor<float> noisy = read_volume<float>(resolve(rec.noisy_path));
    Tensor<float> clean = read_volume<float>(resolve(rec.clean_path));
    Tensor<float> truth_map = read_volume<float>(resolve(rec.map_path));
    require(same_shape(noisy, clean),
            "evaluate_dataset: sample " + std::to_string(rec.id) + " has inconsistent volumes");

    Tensor<float> denoised = denoiser ? denoiser_forward(*denoiser, noisy) : noisy;
    Tensor<float> predicted = inverter_forward(inverter, inverter_cfg, denoised);

    const Tensor<double> t_clean = tensor_cast<double>(clean);
    const Tensor<double> t_den = tensor_cast<double>(denoised);
    const Tensor<double> t_map = tensor_cast<double>(truth_map);
    const Tensor<double> t_pred = tensor_cast<double>(predicted);

    SampleMetrics m;
    m.id = rec.id;
    m.group = rec.group;
    m.den_ssim = compute_ssim(t_clean, t_den, SsimConstants(1.0));
    m.den_psnr = compute_psnr(t_clean, t_den);
    m.den_mae = compute_mae(t_clean, t_den);
    m.den_mre = compute_mre(t_clean, t_den);
    const auto [lo_it, hi_it] = std::minmax_element(t_map.data.begin(), t_map.data.end());
    const double range = *hi_it - *lo_it;
    m.inv_ssim = compute_ssim(t_map, t_pred, SsimConstants(range > 0 ? range : 1.0));
    m.inv_mse = compute_mse(t_map, t_pred);
    m.inv_mae = compute_mae(t_map, t_pred);
    m.inv_mape = compute_mape(t_map, t_pred, options.mape_floor);
    report.rows.push_back(std::move(m));
  }
  report.summary = aggregate_rows(report.rows);
  return report;
}

}  // namespace gpr3d
