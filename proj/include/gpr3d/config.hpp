#pragma once

#include <array>
#include <string>

#include "json.hpp"

#include "gpr3d/clutter.hpp"
#include "gpr3d/denoiser.hpp"
#include "gpr3d/forward_model.hpp"
#include "gpr3d/inverter.hpp"
#include "gpr3d/scene.hpp"

namespace gpr3d {

/// Run-wide configuration. Every field has a documented default (all
/// survey/training constants default to the reference acquisition and
/// schedule); unknown JSON keys are rejected and range errors name the
/// offending key.
struct RunConfig {
  // scene
  int min_objects = 1;
  int max_objects = 2;
  double soil_epsilon_r = 4.0;
  double soil_conductivity = 0.0;
  SceneRanges ranges;

  SurveyConfig survey;

  ClutterParams clutter;

  // forward model & preprocessing chain
  double scatter_voxel_m = 0.01;
  std::size_t scatterer_cap = 2000;
  bool apply_time_zero = false;
  bool apply_mean_subtraction = true;

  // grids; the map covers the survey footprint so that C-scan and map
  // voxels stay laterally aligned (convolutions cannot express a zoom)
  std::array<std::size_t, 3> cscan_dims{128, 128, 128};
  std::array<std::size_t, 3> map_dims{128, 128, 128};
  Vec3 map_origin{0.0, 0.0, 0.0};
  Vec3 map_size{1.0, 1.0, 0.26};
  int raster_supersample = 1;

  // dataset
  int dataset_count = 16;
  std::uint64_t dataset_seed = 1234;

  DenoiserConfig denoiser;
  InverterConfig inverter;

  // training (pre-training schedule)
  double train_lr0 = 0.001;
  double train_decay = 0.98;
  int train_epochs = 100;
  int train_batch = 2;
  double train_split = 0.9;
  std::uint64_t train_seed = 7;
  std::string train_input = "clean";  // inverter input: "clean" | "noisy"

  // fine-tuning schedule
  double ft_lr0 = 0.0006;
  double ft_decay = 0.99;
  int ft_epochs = 100;

  // evaluation
  double mape_floor = 1e-6;
};

RunConfig parse_config_json(const nlohmann::json& doc);
RunConfig parse_config(const std::string& path);

/// Canonical JSON with every default filled in; parse(serialize(x)) is a
/// fixed point and the fingerprint is stable under key reordering.
nlohmann::json serialize_config(const RunConfig& cfg);
std::string config_fingerprint(const RunConfig& cfg);

}  // namespace gpr3d
