#include "gpr3d/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gpr3d/clutter.hpp"
#include "gpr3d/forward_model.hpp"
#include "gpr3d/metrics.hpp"
#include "gpr3d/preprocess.hpp"
#include "gpr3d/volume_io.hpp"

namespace gpr3d {

namespace {

using nlohmann::json;

std::string sample_name(const char* kind, int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04d.gprv", kind, id);
  return buf;
}

// Clean C-scan of one scene after the configured preprocessing chain,
// resampled to the target grid.
Tensor<double> clean_cscan(const RunConfig& cfg, const Scene& scene) {
  Tensor<double> raw = forward_model(scene, cfg.survey, cfg.scatter_voxel_m, cfg.scatterer_cap);
  if (cfg.apply_time_zero) raw = time_zero_correction(raw);
  if (cfg.apply_mean_subtraction) raw = mean_subtraction(raw);
  return resize_trilinear(raw, cfg.cscan_dims);
}

// Reference signal level for scenes with no reflectors: a standard sphere
// in the middle of the placement domain, so empty scenes still receive a
// clutter field of a comparable magnitude.
double calibration_rms(const RunConfig& cfg) {
  Scene scene;
  scene.soil_epsilon_r = cfg.soil_epsilon_r;
  SubsurfaceObject sphere;
  sphere.shape = ObjectShape::Sphere;
  sphere.center = 0.5 * (cfg.ranges.placement_lo + cfg.ranges.placement_hi);
  sphere.radius = 0.035;
  sphere.epsilon_r = 16.0;
  scene.objects.push_back(sphere);
  return rms(clean_cscan(cfg, scene));
}

}  // namespace

json scene_to_json(const Scene& scene) {
  json objs = json::array();
  for (const SubsurfaceObject& o : scene.objects) {
    objs.push_back({{"shape", shape_name(o.shape)},
                    {"center", {o.center.x, o.center.y, o.center.z}},
                    {"radius", o.radius},
                    {"length", o.length},
                    {"edges", {o.edges.x, o.edges.y, o.edges.z}},
                    {"euler", {o.euler.x, o.euler.y, o.euler.z}},
                    {"epsilon_r", o.epsilon_r}});
  }
  return {{"soil_epsilon_r", scene.soil_epsilon_r},
          {"soil_conductivity", scene.soil_conductivity},
          {"seed", scene.seed},
          {"objects", objs}};
}

Scene scene_from_json(const json& j) {
  Scene scene;
  scene.soil_epsilon_r = j.at("soil_epsilon_r").get<double>();
  scene.soil_conductivity = j.at("soil_conductivity").get<double>();
  scene.seed = j.at("seed").get<std::uint64_t>();
  for (const json& jo : j.at("objects")) {
    SubsurfaceObject o;
    o.shape = shape_from_name(jo.at("shape").get<std::string>());
    o.center = {jo.at("center")[0], jo.at("center")[1], jo.at("center")[2]};
    o.radius = jo.at("radius").get<double>();
    o.length = jo.at("length").get<double>();
    o.edges = {jo.at("edges")[0], jo.at("edges")[1], jo.at("edges")[2]};
    o.euler = {jo.at("euler")[0], jo.at("euler")[1], jo.at("euler")[2]};
    o.epsilon_r = jo.at("epsilon_r").get<double>();
    scene.objects.push_back(o);
  }
  return scene;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  json doc;
  doc["fingerprint"] = manifest.fingerprint;
  doc["config"] = manifest.config_echo;
  json records = json::array();
  for (const ManifestRecord& r : manifest.records) {
    records.push_back({{"id", r.id},
                       {"scene_seed", r.scene_seed},
                       {"n_objects", r.n_objects},
                       {"group", r.group},
                       {"scene", scene_to_json(r.scene)},
                       {"norm_min", r.norm_min},
                       {"norm_max", r.norm_max},
                       {"files",
                        {{"noisy", r.noisy_path}, {"clean", r.clean_path}, {"map", r.map_path}}}});
  }
  doc["records"] = std::move(records);
  const std::string text = doc.dump(1);
  namespace fs = std::filesystem;
  const fs::path tmp = path + ".tmp";
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  {
    std::ofstream out(tmp, std::ios::trunc);
    require(static_cast<bool>(out), "manifest: cannot write '" + tmp.string() + "'");
    out << text;
  }
  fs::rename(tmp, path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "manifest: cannot open '" + path + "'");
  json doc = json::parse(in, nullptr, false);
  require(!doc.is_discarded(), "manifest: '" + path + "' is not valid JSON");
  Manifest m;
  m.fingerprint = doc.at("fingerprint").get<std::string>();
  m.config_echo = doc.at("config");
  for (const json& jr : doc.at("records")) {
    ManifestRecord r;
    r.id = jr.at("id").get<int>();
    r.scene_seed = jr.at("scene_seed").get<std::uint64_t>();
    r.n_objects = jr.at("n_objects").get<int>();
    r.group = jr.at("group").get<std::string>();
    r.scene = scene_from_json(jr.at("scene"));
    r.norm_min = jr.at("norm_min").get<double>();
    r.norm_max = jr.at("norm_max").get<double>();
    r.noisy_path = jr.at("files").at("noisy").get<std::string>();
    r.clean_path = jr.at("files").at("clean").get<std::string>();
    r.map_path = jr.at("files").at("map").get<std::string>();
    m.records.push_back(std::move(r));
  }
  return m;
}

Manifest generate_dataset(const RunConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  require(cfg.dataset_count >= 0, "generate_dataset: negative count");
  fs::create_directories(out_dir);

  Manifest manifest;
  manifest.fingerprint = config_fingerprint(cfg);
  manifest.config_echo = serialize_config(cfg);
  manifest.records.resize(static_cast<std::size_t>(cfg.dataset_count));

  const double fallback_rms = cfg.min_objects == 0 ? calibration_rms(cfg) : 0.0;

  const long count = cfg.dataset_count;
  // Scene-level parallelism: every sample depends only on (seed, index).
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) {
    const std::uint64_t scene_seed = mix_seed(cfg.dataset_seed, static_cast<std::uint64_t>(i));
    Rng rng(scene_seed);
    const int n_objects = cfg.min_objects == cfg.max_objects
                              ? cfg.min_objects
                              : rng.uniform_int(cfg.min_objects, cfg.max_objects);
    Scene scene = sample_scene(rng, n_objects, cfg.ranges, cfg.soil_epsilon_r);
    scene.soil_conductivity = cfg.soil_conductivity;
    scene.seed = scene_seed;

    Tensor<double> clean = clean_cscan(cfg, scene);
    double ref = rms(clean);
    if (ref == 0.0) ref = fallback_rms > 0.0 ? fallback_rms : calibration_rms(cfg);

    ClutterParams cl = cfg.clutter;
    cl.seed = mix_seed(scene_seed, 0xC7);
    const Tensor<double> noise = synthesize_clutter(cl, cfg.cscan_dims, ref);

    Tensor<double> noisy(clean.shape);
    for (std::size_t k = 0; k < noisy.numel(); ++k) noisy.data[k] = clean.data[k] + noise.data[k];

    double lo = 0, hi = 0;
    const Tensor<double> noisy01 = normalize01(noisy, &lo, &hi);
    const Tensor<double> clean01 = apply_normalization(clean, lo, hi);

    const int ss = cfg.raster_supersample;
    const std::array<std::size_t, 3> raster_dims{cfg.map_dims[0] * static_cast<std::size_t>(ss),
                                                 cfg.map_dims[1] * static_cast<std::size_t>(ss),
                                                 cfg.map_dims[2] * static_cast<std::size_t>(ss)};
    const Vec3 voxel{cfg.map_size.x / static_cast<double>(raster_dims[2]),
                     cfg.map_size.y / static_cast<double>(raster_dims[1]),
                     cfg.map_size.z / static_cast<double>(raster_dims[0])};
    Tensor<double> map = rasterize_permittivity(scene, raster_dims, cfg.map_origin, voxel,
                                                cfg.clutter.background_epsilon_r);
    if (ss > 1) map = resize_trilinear(map, cfg.map_dims);

    ManifestRecord& rec = manifest.records[static_cast<std::size_t>(i)];
    rec.id = static_cast<int>(i);
    rec.scene_seed = scene_seed;
    rec.n_objects = n_objects;
    rec.group = group_label(classify_group(scene));
    rec.scene = scene;
    rec.norm_min = lo;
    rec.norm_max = hi;
    rec.noisy_path = sample_name("noisy", static_cast<int>(i));
    rec.clean_path = sample_name("clean", static_cast<int>(i));
    rec.map_path = sample_name("map", static_cast<int>(i));
    write_volume((fs::path(out_dir) / rec.noisy_path).string(), tensor_cast<float>(noisy01));
    write_volume((fs::path(out_dir) / rec.clean_path).string(), tensor_cast<float>(clean01));
    write_volume((fs::path(out_dir) / rec.map_path).string(), tensor_cast<float>(map));
  }

  save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace gpr3d
